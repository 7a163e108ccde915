import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given
from hypothesis import strategies as st

from magneto_qed import pv
from magneto_qed.causality import (
    causality_residual,
    cross_bound_report,
    dissipated_energy,
    hilbert_A_to_H,
    hilbert_H_to_A,
    kernel_causality,
    kk_residual,
    onsager_residual,
    passivity_report,
    time_reversal_residual,
)
from magneto_qed.errors import InconsistentSpectraError
from magneto_qed.media import (
    BandRegion,
    ClosedFormRegion,
    LorentzTerm,
    MediumModel,
    OscillatorBand,
    lorentz_closed_form,
    time_kernel,
)

from .conftest import dm1_model, me_n1_model, zeeman_model


def test_kk_closure_closed_form_and_bands():
    for model in (dm1_model(), me_n1_model()):
        rep = kk_residual(model)
        assert rep.passed
        assert rep.max_residual < 1e-4
        assert rep.omega.size == rep.trace.size > 100


def test_kk_detects_a_broken_hermitian_part():
    class Shifted(ClosedFormRegion):
        def response(self, w):
            out = super().response(w)
            out[..., 0, 0] += 0.3  # constant offset has no dissipative partner
            return out

    region = Shifted("bad", (LorentzTerm("ee", 0.5, 1.0, 0.1),))
    assert not kk_residual(MediumModel((region,))).passed


@pytest.mark.parametrize("w", [0.5, 2.0])
def test_hilbert_pair_is_inverse(w):
    grid = pv.log_grid()
    chi = lorentz_closed_form(0.5, 1.0, 0.1, grid)
    h = hilbert_A_to_H(grid, 1j * chi.imag, [w, -w])
    a = hilbert_H_to_A(grid, chi.real + 0j, [w])
    exact = lorentz_closed_form(0.5, 1.0, 0.1, w)
    assert h[0].real == pytest.approx(exact.real, abs=1e-5)
    assert h[1] == pytest.approx(np.conj(h[0]))
    assert a[0].imag == pytest.approx(exact.imag, abs=1e-5)


def test_onsager_symmetric_and_gyrotropic():
    assert onsager_residual(dm1_model()).max_residual <= 1e-12
    assert onsager_residual(me_n1_model()).max_residual <= 1e-12
    z = zeeman_model()
    assert onsager_residual(z).max_residual <= 1e-12
    # forgetting to flip the bias breaks the relation
    assert onsager_residual(z, flips=()).max_residual > 0.1


def test_onsager_negative_control():
    class Corrupted(BandRegion):
        def response(self, w):
            out = super().response(w)
            out[..., 3:, :3] = out[..., :3, 3:]  # me := em breaks the antisymmetry
            return out

    band = OscillatorBand(0, electric=(0.5, 1.0, 0.1), magnetic=(0.2, 1.0, 0.1))
    rep = onsager_residual(MediumModel((Corrupted("c", (band,)),)))
    assert rep.max_residual >= 0.1 and not rep.passed


def test_time_reversal_splits():
    rep = time_reversal_residual(zeeman_model())
    assert rep.passed
    assert set(rep.details) == {"dissipative_max", "hermitian_max"}


def test_causality_of_models():
    for model in (dm1_model(), zeeman_model()):
        assert causality_residual(model).max_residual < 1e-4


def test_causality_detects_an_acausal_response():
    class Advanced(ClosedFormRegion):
        def response(self, w):
            # conjugate response: poles in the upper half plane
            return np.conj(super().response(w))

    rep = causality_residual(MediumModel((Advanced("adv", (LorentzTerm("ee", 0.5, 1.0, 0.1),)),)))
    assert rep.max_residual > 0.1


def test_time_kernel_is_causal_by_construction():
    model = dm1_model()
    t = np.arange(-50, 400, 0.05)
    kern = time_kernel(model, "dm1", t)
    assert kernel_causality(kern) == 0.0


def test_passivity_and_cross_bound_reports():
    assert passivity_report(me_n1_model()).passed
    rep = cross_bound_report(me_n1_model())
    assert rep.passed
    assert abs(rep.details["min_slack"]) <= 1e-12
    assert cross_bound_report(dm1_model()).details["min_slack"] is None


def test_report_serialization():
    rep = kk_residual(dm1_model())
    d = rep.to_dict()
    assert d["passed"] and d["check"] == "kk_closure"
    lines = rep.to_csv().splitlines()
    assert lines[0] == "omega,residual" and len(lines) == rep.omega.size + 1


@given(st.floats(0.2, 3.0), st.floats(0.05, 0.5))
def test_dissipated_energy_of_a_lorentz_line(w0, g):
    # |D(w)|^2 = 1 on [a, b]: energy 2 int dw/2pi w Im chi(w)
    w = np.linspace(0.1, 4.0, 2001)
    chi = lorentz_closed_form(0.5, w0, g, w)
    ga = np.zeros((w.size, 1, 6, 6), complex)
    ga[:, 0, :3, :3] = (1j * chi.imag)[:, None, None] * np.eye(3)
    d = np.zeros((w.size, 1, 3), complex)
    d[:, 0, 0] = 1.0
    e = dissipated_energy(w, d, np.zeros_like(d), ga)
    expect = 2 * quad(lambda x: x * lorentz_closed_form(0.5, w0, g, x).imag, 0.1, 4.0, points=[w0], limit=200)[0] / (2 * np.pi)
    assert e == pytest.approx(expect, rel=1e-3)
    assert e > 0


def test_dissipated_energy_rejects_non_hermitian_forms():
    w = np.linspace(0.1, 2.0, 11)
    ga = np.zeros((w.size, 1, 6, 6), complex)
    ga[:, 0, 0, 0] = 1.0  # real diagonal: not a dissipative part
    d = np.ones((w.size, 1, 3), complex)
    with pytest.raises(InconsistentSpectraError):
        dissipated_energy(w, d, np.zeros_like(d), ga)
