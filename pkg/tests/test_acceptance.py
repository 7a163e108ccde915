"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are written
straight to the terminal even when output capture is on.
"""

import time

import numpy as np
import pytest

from magneto_qed import fields as F
from magneto_qed import modes as M
from magneto_qed import pv
from magneto_qed.causality import cross_bound_report, kk_residual, onsager_residual
from magneto_qed.couplings import factorize_gamma_A, random_passive, random_unitary, roundtrip_residual
from magneto_qed.grid import SpectralGrid
from magneto_qed.media import BandRegion, MediumModel, OscillatorBand

from .conftest import dm1_model, me_n1_model, stack_model, zeeman_model


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, value, tolerance, extra=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {name}: {value:.3e} (tolerance {tolerance:.1e}){extra}"
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def test_kk_closure(report):
    start = time.perf_counter()
    worst = max(kk_residual(m).max_residual for m in (dm1_model(), me_n1_model()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and elapsed <= 10
    assert report(1, "kk closure", ok, worst, 1e-3, f" in {elapsed:.1f} s")


def test_factorization_round_trip(report):
    start = time.perf_counter()
    rng = np.random.default_rng(20240)
    worst = 0.0
    for _ in range(500):
        m = random_passive(rng)
        worst = max(worst, roundtrip_residual(factorize_gamma_A(m), m))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed <= 5
    assert report(2, "factorization round trip", ok, worst, 1e-12, f" over 500 samples in {elapsed:.1f} s")


def test_cross_coupling_bound(report):
    fixtures = {"dm1": dm1_model(), "me_n1": me_n1_model(), "zeeman": zeeman_model()}
    three = MediumModel(
        (
            BandRegion(
                "n3",
                (
                    OscillatorBand(0, electric=(0.4, 1.0, 0.1), magnetic=(0.1, 1.2, 0.2), sign=1),
                    OscillatorBand(1, electric=(0.2, 2.0, 0.3), magnetic=(0.3, 0.8, 0.1), sign=-1),
                    OscillatorBand(2, electric=(0.1, 0.5, 0.05)),
                ),
            ),
        )
    )
    fixtures["n3"] = three
    worst = max(cross_bound_report(m, tol=1e-10).max_residual for m in fixtures.values())
    slack = cross_bound_report(me_n1_model(), tol=1e-10).details["min_slack"]
    ok = worst <= 1e-10 and abs(slack) <= 1e-12
    assert report(3, "cross-coupling bound", ok, worst, 1e-10, f"; N=1 equality gap {abs(slack):.1e} (tolerance 1e-12)")


def test_onsager_time_reversal(report):
    worst = max(onsager_residual(m).max_residual for m in (dm1_model(), me_n1_model(), zeeman_model()))

    class Corrupted(BandRegion):
        def response(self, w):
            out = super().response(w)
            out[..., 3:, :3] = out[..., :3, 3:]
            return out

    band = OscillatorBand(0, electric=(0.5, 1.0, 0.1), magnetic=(0.2, 1.0, 0.1))
    control = onsager_residual(MediumModel((Corrupted("corrupted", (band,)),)))
    ok = worst <= 1e-10 and control.max_residual >= 0.1 and not control.passed
    assert report(4, "onsager", ok, worst, 1e-10, f"; corrupted control {control.max_residual:.2f} fails")


def _oracle_agreement(model, grid, omegas):
    """Worst Z mismatch and worst field mismatch (to a phase) over k and omega."""
    resp = model.regions[0]
    z_err, f_err, compared = 0.0, 0.0, 0
    for w in omegas:
        fam = M.solve_modes(model, grid, w)
        g = resp.response(np.array([w]))[0]
        blocks = np.array([m.coeffs.reshape(grid.n_k, 4) for m in fam.modes])
        weight = np.linalg.norm(blocks, axis=2)
        home = np.argmax(weight, axis=1)
        for ki in range(grid.n_k):
            oracle, _, _ = M.homogeneous_oracle(g, grid.wavevectors[grid.active[ki]], w)
            mine = [j for j in range(len(fam.modes)) if home[j] == ki]
            f_err = max([f_err] + [weight[j].sum() / weight[j, ki] - 1 for j in mine])
            zs = np.array([fam.modes[j].z for j in mine])
            assert len(mine) == len(oracle)
            for o in oracle:
                scale = max(1.0, abs(o.z))
                dz = np.abs(zs - o.z) / scale
                z_err = max(z_err, dz.min())
                match = [mine[i] for i in np.nonzero(dz <= 1e-8)[0]]
                vecs = np.array([blocks[j, ki] / np.linalg.norm(blocks[j, ki]) for j in match]).T
                if len(match) == 1:
                    ov = np.vdot(vecs[:, 0], o.coeffs)
                    diff = np.linalg.norm(o.coeffs - vecs[:, 0] * ov / abs(ov))
                else:
                    q, _ = np.linalg.qr(vecs)
                    diff = np.linalg.norm(o.coeffs - q @ (q.conj().T @ o.coeffs))
                f_err = max(f_err, diff)
                compared += 1
    return z_err, f_err, compared


def test_eigenproblem_oracle(report):
    start = time.perf_counter()
    grid = SpectralGrid.line(2 * np.pi, 17)
    omegas = np.geomspace(0.3, 3.0, 32)
    assert grid.n_k == 16
    z_err, f_err, n = 0.0, 0.0, 0
    for model in (me_n1_model(), dm1_model()):
        z, f, c = _oracle_agreement(model, grid, omegas)
        z_err, f_err, n = max(z_err, z), max(f_err, f), n + c
    elapsed = time.perf_counter() - start
    ok = z_err <= 1e-10 and f_err <= 1e-9 and elapsed <= 60
    assert report(5, "eigenproblem oracle", ok, z_err, 1e-10, f"; fields {f_err:.1e} (tolerance 1e-9) over {n} modes in {elapsed:.1f} s")


def test_normalization_identity(report):
    worst = 0.0
    count = 0
    for hbar in (1.0, 0.5):
        for model, grid in ((dm1_model(), SpectralGrid.line(2 * np.pi, 5)), (me_n1_model(), SpectralGrid.line(2 * np.pi, 5)), (stack_model(), SpectralGrid.line(60.0, 48))):
            for w in (0.6, 1.0, 1.4):
                fam = M.solve_modes(model, grid, w, hbar=hbar)
                for m in fam.modes:
                    target = M.normalization_target(m.z, hbar)
                    worst = max(worst, abs(m.quad_form - target) / target)
                    count += 1
    # the classical-correspondence value Z = i pi never arises at real frequency
    # with a Hermitian pencil; the target formula is checked there directly
    special = abs(M.normalization_target(1j * np.pi, 0.5) - 0.5)
    ok = worst <= 1e-10 and special <= 1e-15
    assert report(6, "normalization identity", ok, worst, 1e-10, f" over {count} modes; Z = i pi target gap {special:.0e}")


def test_transversality_and_curl(report):
    trans, curl = 0.0, 0.0
    cases = [
        (dm1_model(), SpectralGrid.line(2 * np.pi, 5)),
        (me_n1_model(), SpectralGrid.line(2 * np.pi, 5)),
        (zeeman_model(), SpectralGrid((2 * np.pi, 2 * np.pi, 1.0), (3, 3, 1))),
        (stack_model(), SpectralGrid.line(60.0, 64)),
    ]
    for model, grid in cases:
        for w in (0.7, 1.0, 1.3):
            fam = M.solve_modes(model, grid, w)
            for m in fam.modes:
                trans = max(trans, M.transversality(m))
                curl = max(curl, M.curl_consistency(m, fam.pair))
    ok = trans <= 1e-12 and curl <= 1e-10
    assert report(7, "transversality", ok, trans, 1e-12, f"; curl consistency {curl:.1e} (tolerance 1e-10)")


def test_commutator_sum_rule(report):
    start = time.perf_counter()
    base = pv.DEFAULT_POINTS
    res = []
    for refine in (1, 2, 4):
        omega = np.geomspace(*pv.DEFAULT_SPAN, (base - 1) * refine + 1)
        res.append(F.sum_rule(dm1_model(), [1.0, 0.0, 0.0], (1, 2), omega=omega).relative())
    elapsed = time.perf_counter() - start
    ok = res[0] <= 0.02 and res[0] > res[1] > res[2] and elapsed <= 300
    trail = ", ".join(f"{r:.1e}" for r in res)
    assert report(8, "commutator sum rule", ok, res[0], 0.02, f"; refined x1/x2/x4: {trail} in {elapsed:.1f} s")


def test_energy_balance(report):
    start = time.perf_counter()
    r = F.simulate_transient(stack_model(), 60.0, 600, (22.0, 38.0), 14.0, duration=60.0, dt=0.02)
    elapsed = time.perf_counter() - start
    ok = r.balance_error <= 0.02 and elapsed <= 300
    assert report(9, "energy balance", ok, r.balance_error, 0.02, f"; flux {r.flux_in:.4f}, dissipated {r.dissipated_spectral:.4f} in {elapsed:.1f} s")


def test_gauge_invariance(report):
    grid = SpectralGrid.line(2 * np.pi, 3)
    w_probe = np.array([0.5, 1.0, 1.7])
    omegas = (0.8, 1.2)
    ref_model = me_n1_model()
    ref_gamma = ref_model.regions[0].response(w_probe)
    ref = [M.solve_modes(ref_model, grid, w) for w in omegas]
    rng = np.random.default_rng(7)
    g_err = z_err = x_err = 0.0
    for _ in range(100):
        model = me_n1_model(random_unitary(rng))
        g_err = max(g_err, np.abs(model.regions[0].response(w_probe) - ref_gamma).max() / np.abs(ref_gamma).max())
        for w, r in zip(omegas, ref):
            fam = M.solve_modes(model, grid, w)
            assert len(fam.modes) == len(r.modes)
            z_err = max(z_err, float(np.max(np.abs(fam.z - r.z) / np.maximum(1.0, np.abs(r.z)))))
            for a, b in zip(fam.modes, r.modes):
                x_err = max(x_err, np.abs(a.fields() - b.fields()).max() / np.abs(b.fields()).max())
    worst = max(g_err, z_err, x_err)
    ok = worst <= 1e-13
    assert report(10, "gauge invariance", ok, worst, 1e-13, f"; gamma {g_err:.1e}, Z {z_err:.1e}, fields {x_err:.1e}")
