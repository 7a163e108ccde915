"""Structural checks on response functions: KK closure, Onsager symmetry,
causality of kernels and the dissipated-energy functional."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import pv
from .errors import InconsistentSpectraError, InvalidInputError
from .media import BandRegion, MediumModel
from .tensors import dissipative_part, hermitian_part

KK_TOL = 1e-3
ONSAGER_TOL = 1e-10
CAUSALITY_TOL = 1e-4


@dataclass
class ValidationReport:
    check: str
    tolerance: float
    max_residual: float
    omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "passed": self.passed,
            "omega": [float(x) for x in self.omega],
            "residual": [float(x) for x in self.trace],
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega", "residual"])
        for x, r in zip(self.omega, self.trace):
            w.writerow([repr(float(x)), repr(float(r))])
        return buf.getvalue()


def _merge(check, tol, parts, details=None) -> ValidationReport:
    """Combine per-region (omega, residual) traces into one report."""
    if not parts:
        return ValidationReport(check, tol, 0.0, details=details or {})
    if len({p[0].size for p in parts}) > 1:
        omega, trace = max(parts, key=lambda p: np.max(p[1]))
    else:
        omega = parts[0][0]
        trace = np.max(np.stack([p[1] for p in parts]), axis=0)
    return ValidationReport(check, tol, float(np.max(trace)), omega, trace, details or {})


# --------------------------------------------------------------------------
# Hilbert transforms


def _hilbert(grid, samples, targets, exact_at=None, tail_budget=pv.TAIL_BUDGET):
    samples = np.asarray(samples, dtype=complex)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if np.any(targets == 0):
        raise InvalidInputError("target frequency must be non-zero")
    ra = ia = None
    if exact_at is not None:
        exact_at = np.asarray(exact_at, dtype=complex)
        ra, ia = exact_at.real, exact_at.imag
    res = pv.pv_transform(grid, samples.real, samples.imag, np.abs(targets), ra, ia, tail_budget=tail_budget)
    out = res.value
    out[targets < 0] = np.conj(out[targets < 0])
    return out


def hilbert_A_to_H(grid, gamma_a, targets, exact_at=None, tail_budget=pv.TAIL_BUDGET):
    """``Gamma_H(w) = 2i PV int dw'/2pi Gamma_A(w') / (w - w')``.

    ``gamma_a`` holds samples ``(n, ...)`` on the positive ``grid``; negative
    frequencies enter through the reality condition.
    """
    return _hilbert(grid, gamma_a, targets, exact_at, tail_budget)


def hilbert_H_to_A(grid, gamma_h, targets, exact_at=None, tail_budget=pv.TAIL_BUDGET):
    """Inverse direction; the kernel is identical."""
    return _hilbert(grid, gamma_h, targets, exact_at, tail_budget)


def _centres(region):
    if isinstance(region, BandRegion):
        return [c for b in region.bands for c in b.centres()] or [1.0]
    return [t.w0 for t in region.terms] or [1.0]


def _model_grid(region, n=pv.DEFAULT_POINTS):
    """Default 2048-point log grid spanning three decades around the resonances."""
    centres = _centres(region)
    return np.geomspace(pv.DEFAULT_SPAN[0] * min(centres), pv.DEFAULT_SPAN[1] * max(centres), n)


def kk_residual(model: MediumModel, grid=None, window=(1e-2, 1e2), tol=KK_TOL) -> ValidationReport:
    """Max over the grid of ``|H[Gamma_A] - Gamma_H| / |Gamma|`` per region.

    Residuals are reported on grid nodes inside ``window`` (in units of the
    region's resonance span); the outermost decades only feed the quadrature.
    """
    parts = []
    for region in model.regions:
        if region.is_vacuum:
            continue
        g = _model_grid(region) if grid is None else np.asarray(grid, dtype=float)
        full = region.response(g)
        ga, gh = dissipative_part(full), hermitian_part(full)
        lo, hi = g[0] / pv.DEFAULT_SPAN[0], g[-1] / pv.DEFAULT_SPAN[1]
        sel = (g >= window[0] * lo) & (g <= window[1] * hi)
        t = g[sel]
        h_kk = hilbert_A_to_H(g, ga, t, exact_at=ga[sel], tail_budget=None)
        num = np.linalg.norm((h_kk - gh[sel]).reshape(t.size, -1), axis=1)
        den = np.linalg.norm(full[sel].reshape(t.size, -1), axis=1)
        parts.append((t, num / np.maximum(den, 1e-300)))
    return _merge("kk_closure", tol, parts)


# --------------------------------------------------------------------------
# time-reversal symmetry


def _onsager_trace(fwd, rev):
    """Per-frequency symmetry residual, relative to the forward norm."""
    t = lambda m: np.swapaxes(m, -1, -2)
    ee, em, me, mm = fwd[..., :3, :3], fwd[..., :3, 3:], fwd[..., 3:, :3], fwd[..., 3:, 3:]
    r_ee, r_em, r_me, r_mm = rev[..., :3, :3], rev[..., :3, 3:], rev[..., 3:, :3], rev[..., 3:, 3:]
    terms = [r_ee - t(ee), r_mm - t(mm), r_em + t(me), r_me + t(em)]
    num = np.sqrt(sum(np.sum(np.abs(x) ** 2, axis=(-1, -2)) for x in terms))
    den = np.linalg.norm(fwd.reshape(fwd.shape[0], -1), axis=1)
    return num / np.maximum(den, 1e-300)


def _symmetry_grid(region, n=64):
    g = _model_grid(region)
    return np.geomspace(g[0] * 10, g[-1] / 10, n)


def onsager_residual(model: MediumModel, flips=None, grid=None, tol=ONSAGER_TOL) -> ValidationReport:
    """Residual of ``{G^ss}_rev = (G^ss)^T`` and ``{G^sn}_rev = -(G^ns)^T``."""
    rev_model = model.reversed(flips)
    parts = []
    for region, rev in zip(model.regions, rev_model.regions):
        if region.is_vacuum:
            continue
        w = _symmetry_grid(region) if grid is None else np.asarray(grid, dtype=float)
        parts.append((w, _onsager_trace(region.response(w), rev.response(w))))
    return _merge("onsager", tol, parts)


def time_reversal_residual(model: MediumModel, flips=None, grid=None, tol=ONSAGER_TOL) -> ValidationReport:
    """The same symmetry applied separately to the dissipative and Hermitian parts."""
    rev_model = model.reversed(flips)
    parts_a, parts_h = [], []
    for region, rev in zip(model.regions, rev_model.regions):
        if region.is_vacuum:
            continue
        w = _symmetry_grid(region) if grid is None else np.asarray(grid, dtype=float)
        f, r = region.response(w), rev.response(w)
        parts_a.append((w, _onsager_trace(dissipative_part(f), dissipative_part(r))))
        parts_h.append((w, _onsager_trace(hermitian_part(f), hermitian_part(r))))
    a = _merge("time_reversal_A", tol, parts_a)
    h = _merge("time_reversal_H", tol, parts_h)
    report = _merge("time_reversal", tol, [(a.omega, np.maximum(a.trace, h.trace))] if parts_a else [])
    report.details = {"dissipative_max": a.max_residual, "hermitian_max": h.max_residual}
    return report


# --------------------------------------------------------------------------
# causality


def _reference_basis(w, g):
    """``(i / (w + i g))^n`` for n = 1..3; each is the transform of a causal kernel."""
    base = 1j / (w + 1j * g)
    return np.stack([base, base**2, base**3], axis=-1)


def _reference_kernel(t, coefs, g):
    """``theta(t) sum_n a_n t^(n-1)/(n-1)! exp(-g t)``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + coefs.shape[1:])
    pos = t >= 0
    tp = t[pos]
    powers = np.stack([np.ones_like(tp), tp, tp**2 / 2], axis=-1) * np.exp(-g * tp)[:, None]
    out[pos] = np.tensordot(powers, coefs, axes=(1, 0))
    return out


def causality_residual(model: MediumModel, n: int = 8192, w_max: float | None = None, tol=CAUSALITY_TOL) -> ValidationReport:
    """Acausal weight of the inverse transform of the frequency-domain response.

    ``Gamma(w)`` (as the model evaluates it, PV quadrature included for band
    regions) is sampled on a uniform grid and transformed to the time domain.
    The slowly decaying high-frequency asymptote is removed first by fitting
    three causal reference terms whose kernels are known in closed form.  The
    report holds ``max_{t<0} |Gamma(t)| / max_t |Gamma(t)|`` per region.
    """
    parts = []
    for region in model.regions:
        if region.is_vacuum:
            continue
        g_min = min(region.widths())
        centres = _centres(region)
        g_r = 3.0 * max(centres)  # reference decay, well above the resonances
        dw = g_min / 10.0
        wm = w_max if w_max is not None else max(40.0 * max(centres), n * dw / 2)
        m = int(2 ** np.ceil(np.log2(max(n, 2 * wm / dw))))
        dw = 2 * wm / m
        wk = dw * np.arange(1, m // 2)
        resp = region.response(wk)

        # least-squares fit of the asymptote on the top octaves
        fit_idx = np.unique(np.round(np.geomspace(wk.size // 2, wk.size - 1, 12)).astype(int))
        basis = _reference_basis(wk[fit_idx], g_r)  # (f, 3)
        lhs = np.concatenate([basis.real, basis.imag])
        rhs = np.concatenate([resp[fit_idx].real, resp[fit_idx].imag]).reshape(2 * fit_idx.size, -1)
        coefs = np.linalg.lstsq(lhs, rhs, rcond=None)[0].reshape(3, 6, 6)

        diff = resp - np.tensordot(_reference_basis(wk, g_r), coefs, axes=(1, 0))
        spec = np.zeros((m, 6, 6), dtype=complex)
        spec[0] = diff[0].real  # static limit, error O(dw^2)
        spec[1:m // 2] = diff
        spec[m // 2 + 1:] = np.conj(diff[::-1])
        # Gamma(t) = int dw/2pi exp(-i w t) Gamma(w), sampled at t_j = 2 pi j / (m dw)
        kern = (dw / (2 * np.pi)) * np.fft.fft(spec, axis=0).real
        t = 2 * np.pi * np.fft.fftfreq(m, d=dw)
        kern = kern + _reference_kernel(t, coefs, g_r)
        norms = np.linalg.norm(kern.reshape(m, -1), axis=1)
        neg = (t < 0) & (t > -0.5 * t.max())
        order = np.argsort(t[neg])
        parts.append((t[neg][order], norms[neg][order] / np.max(norms)))
    if not parts:
        return ValidationReport("causality", tol, 0.0)
    worst = max(parts, key=lambda p: np.max(p[1]))
    return ValidationReport("causality", tol, float(np.max(worst[1])), worst[0], worst[1])


def kernel_causality(kernel) -> float:
    """``max_{t<0} |K(t)| / max_t |K(t)|`` of a sampled ``TimeKernel``."""
    norms = np.linalg.norm(kernel.samples.reshape(kernel.t.size, -1), axis=1)
    peak = norms.max()
    if peak == 0:
        return 0.0
    neg = kernel.t < 0
    return float(norms[neg].max() / peak) if np.any(neg) else 0.0


# --------------------------------------------------------------------------
# dissipation


def dissipated_energy(omega, d, b, gamma_a, dv=1.0, weights=None, tol=1e-8) -> float:
    """``2 int_0^inf dw/2pi (-i w) int dV [D*, B*] Gamma_A [D; B]``.

    ``d`` and ``b`` are spectra of shape ``(n_w, n_cells, 3)`` on positive
    ``omega``; ``gamma_a`` has shape ``(n_w, n_cells, 6, 6)`` (or broadcastable).
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise InvalidInputError("spectra must be given on non-negative frequencies")
    x = np.concatenate([np.asarray(d, dtype=complex), np.asarray(b, dtype=complex)], axis=-1)
    if x.ndim == 2:
        x = x[:, None, :]
    ga = np.asarray(gamma_a, dtype=complex)
    form = np.einsum("wci,wcij,wcj->w", x.conj(), np.broadcast_to(ga, x.shape[:2] + (6, 6)), x)
    if weights is None:
        weights = pv.trapezoid_weights(omega) if omega.size > 1 else np.ones(1)
    total = 2 * np.sum(weights * (-1j * omega) * form) * dv / (2 * np.pi)
    scale = 2 * np.sum(weights * omega * np.abs(form)) * dv / (2 * np.pi)
    if abs(total.imag) > tol * max(scale, 1e-300):
        raise InconsistentSpectraError(
            f"dissipated energy has imaginary part {total.imag:.3e} (real part {total.real:.3e})"
        )
    return float(total.real)


# --------------------------------------------------------------------------
# pointwise sweeps over a model


def passivity_report(model: MediumModel, grid=None, tol=1e-10) -> ValidationReport:
    """Worst negative eigenvalue of ``-2i Gamma_A`` relative to its largest one."""
    from .tensors import loss_form

    parts = []
    for region in model.regions:
        if region.is_vacuum:
            continue
        w = _model_grid(region) if grid is None else np.asarray(grid, dtype=float)
        h = loss_form(region.gamma_A(w))
        s = np.linalg.eigvalsh(0.5 * (h + np.conj(np.swapaxes(h, -1, -2))))
        scale = np.maximum(np.abs(s).max(axis=1), 1e-300)
        parts.append((w, np.clip(-s[:, 0], 0.0, None) / scale))
    return _merge("passivity", tol, parts)


def cross_bound_report(model: MediumModel, grid=None, tol=1e-10) -> ValidationReport:
    """``|A^em_ij|^2 - |A^ee_ii||A^mm_jj|`` excess, relative, per frequency.

    ``details["min_slack"]`` is the smallest relative gap below the bound over
    all components with a non-zero cross term; zero means some component
    sits on the equality boundary.
    """
    from .tensors import BlockResponse, cross_bound_check

    parts, slack = [], []
    for region in model.regions:
        if region.is_vacuum:
            continue
        w = _model_grid(region, n=256) if grid is None else np.asarray(grid, dtype=float)
        trace = np.zeros(w.size)
        for i, m in enumerate(region.gamma_A(w)):
            rep = cross_bound_check(BlockResponse.from_matrix(m, frequency=w[i]), tol)
            rel = rep.excess / np.maximum(rep.bound, 1e-300)
            trace[i] = max(float(np.max(rel)), 0.0)
            active = np.abs(BlockResponse.from_matrix(m).em) > 1e-12 * max(np.abs(m).max(), 1e-300)
            if np.any(active):
                slack.append(float(np.min(-rel[active])))
        parts.append((w, trace))
    report = _merge("cross_bound", tol, parts)
    report.details = {"min_slack": min(slack) if slack else None}
    return report
