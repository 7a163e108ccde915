"""Mode-expansion artifacts: noise spectra, commutator sum rule, synthesis, energy."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import pv
from .causality import dissipated_energy
from .errors import InvalidInputError, PreconditionError
from .grid import SpectralGrid
from .media import ClosedFormRegion, LorentzTerm, MediumModel
from .modes import ModeSet, derived_EH, solve_modes
from .tensors import loss_form

TP_ONLY = "TP-only: longitudinal-polariton contributions omitted"
COVERAGE_MIN = 0.99


# --------------------------------------------------------------------------
# noise spectra


@dataclass
class NoiseSpectra:
    omega: float
    z: np.ndarray  # (n_modes,)
    p_noise: np.ndarray  # (n_modes, n_cells, 3)
    m_noise: np.ndarray  # (n_modes, n_cells, 3)
    flags: tuple = (TP_ONLY,)


def noise_spectra_TP(modes: ModeSet) -> NoiseSpectra:
    """``(Z/i pi - 1) [Gamma_A^ee D + Gamma_A^em B]`` and its magnetic analogue per mode."""
    if any(not m.normalized for m in modes.modes):
        raise PreconditionError("noise spectra need normalized modes")
    ga = modes.pair.gamma_a if modes.pair is not None else None
    p, m_ = [], []
    for m in modes.modes:
        x = m.fields()
        src = np.einsum("cij,cj->ci", ga, x)
        factor = m.z / (1j * np.pi) - 1
        p.append(factor * src[:, :3])
        m_.append(factor * src[:, 3:])
    n_cells = modes.pair.grid.n_cells if modes.pair is not None else 0
    shape = (0, n_cells, 3)
    return NoiseSpectra(
        modes.omega,
        modes.z,
        np.array(p) if p else np.zeros(shape, complex),
        np.array(m_) if m_ else np.zeros(shape, complex),
    )


# --------------------------------------------------------------------------
# commutator sum rule


_LEVI = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI[_a, _b, _c], _LEVI[_a, _c, _b] = 1.0, -1.0


def sumrule_grid(k, omega=None) -> SpectralGrid:
    """Smallest periodic box whose FFT wavevectors contain ``k`` and ``-k``."""
    k = np.asarray(k, dtype=float)
    if k.shape != (3,) or not np.any(k):
        raise InvalidInputError("k must be a non-zero three-vector")
    box = tuple(2 * np.pi / abs(ki) if ki else 1.0 for ki in k)
    pts = tuple(3 if ki else 1 for ki in k)
    return SpectralGrid(box, pts, pv.log_grid() if omega is None else omega)


def _k_index(grid: SpectralGrid, k) -> int:
    hit = np.nonzero(np.all(np.isclose(grid.wavevectors, k, rtol=1e-12, atol=1e-12), axis=1))[0]
    if hit.size != 1:
        raise InvalidInputError(f"wavevector {k} is not on the grid")
    return int(hit[0])


def dissipative_coverage(model: MediumModel, omega) -> float:
    """Fraction of ``int tr(-2i Gamma_A) dw`` carried by the span of ``omega``."""
    omega = np.asarray(omega, dtype=float)
    wide = np.geomspace(omega[0] * 1e-4, omega[-1] * 1e4, 8192)
    total, inside = 0.0, 0.0
    for region in model.regions:
        if region.is_vacuum:
            continue
        tr = lambda w: np.real(np.trace(loss_form(region.gamma_A(w)), axis1=-2, axis2=-1))
        total += float(np.sum(pv.trapezoid_weights(wide) * tr(wide)))
        inside += float(np.sum(pv.trapezoid_weights(omega) * tr(omega)))
    return min(inside / total, 1.0) if total > 0 else 1.0


@dataclass
class SumRuleResult:
    k: np.ndarray
    components: tuple
    value: complex
    target: complex
    coverage: float
    n_frequencies: int
    warning: str | None = None

    @property
    def residual(self) -> complex:
        return self.value - self.target

    def relative(self, hbar: float = 1.0, c: float = 1.0) -> float:
        return abs(self.residual) / (hbar * c * np.linalg.norm(self.k))

    def to_dict(self) -> dict:
        return {
            "k": [float(x) for x in self.k],
            "components": list(self.components),
            "value": [float(self.value.real), float(self.value.imag)],
            "target": [float(self.target.real), float(self.target.imag)],
            "residual": [float(self.residual.real), float(self.residual.imag)],
            "coverage": self.coverage,
            "n_frequencies": self.n_frequencies,
            "warning": self.warning,
        }


def solve_family(model: MediumModel, grid: SpectralGrid, hbar: float = 1.0, c: float = 1.0, workers: int = 1) -> list:
    """Normalized mode sets over ``grid.omega``, ordered by frequency."""
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda w: solve_modes(model, grid, w, c, hbar), grid.omega))
    return [solve_modes(model, grid, w, c, hbar) for w in grid.omega]


def commutator_sum_rule(families, k, components=(1, 2), weights=None, hbar: float = 1.0, c: float = 1.0, coverage: float = 1.0) -> SumRuleResult:
    """Equal-time ``[D_i, B_j]`` kernel at wavevector ``k`` rebuilt from the modes.

    ``S_ij(k) = V sum_n int dw/2pi [D_i(k) B_j(k)^* - D_i(-k)^* B_j(-k)]``
    compared with ``-hbar c eps_ikj k_k``.
    """
    i, j = components
    k = np.asarray(k, dtype=float)
    target = complex(-hbar * c * np.einsum("l,l->", _LEVI[i, :, j], k))
    if not families:
        return SumRuleResult(k, (i, j), 0j, target, coverage, 0, "empty mode family")
    omega = np.array([f.omega for f in families])
    if weights is None:
        weights = pv.quadrature_weights(omega) if omega.size > 2 else pv.trapezoid_weights(omega)
    total = 0j
    for w, fam in zip(weights, families):
        if not fam.modes:
            continue
        grid = fam.modes[0].grid
        kp, km = _k_index(grid, k), _k_index(grid, -k)
        for m in fam.modes:
            sp = m.spectral()
            total += w * (sp[kp, i] * np.conj(sp[kp, 3 + j]) - np.conj(sp[km, i]) * sp[km, 3 + j])
        volume = grid.volume
    value = total * volume / (2 * np.pi) if total else 0j
    warning = None
    if coverage < COVERAGE_MIN:
        warning = f"frequency grid covers {coverage:.3%} of the dissipative weight"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return SumRuleResult(k, (i, j), complex(value), target, coverage, omega.size, warning)


def sum_rule(model: MediumModel, k, components=(1, 2), omega=None, hbar: float = 1.0, c: float = 1.0, workers: int = 1) -> SumRuleResult:
    """Solve on the minimal box for ``k`` and evaluate the sum rule."""
    if not model.is_homogeneous:
        raise PreconditionError("the per-k sum rule needs a homogeneous medium")
    grid = sumrule_grid(k, omega)
    fams = solve_family(model, grid, hbar, c, workers)
    cov = dissipative_coverage(model, grid.omega)
    return commutator_sum_rule(fams, k, components, hbar=hbar, c=c, coverage=cov)


# --------------------------------------------------------------------------
# classical synthesis


@dataclass
class FieldState:
    t: np.ndarray
    d: np.ndarray  # (nt, n_cells, 3)
    b: np.ndarray
    e: np.ndarray
    h: np.ndarray
    p_noise: np.ndarray | None = None  # TP noise polarization carried by the modes
    m_noise: np.ndarray | None = None
    flags: tuple = (TP_ONLY,)

    @property
    def p(self) -> np.ndarray:
        return self.d - self.e

    @property
    def m(self) -> np.ndarray:
        return self.b - self.h


def synthesize_classical(families, amplitudes, t, bin_widths=None) -> FieldState:
    """Real fields ``sum (dw/2pi) [alpha x e^{-iwt} + c.c.]`` over (bin, mode).

    The state's polarization ``D - E^T`` is the causal medium response to
    the synthesized ``D, B`` plus the TP noise part, which is returned
    separately.  ``amplitudes`` maps ``(bin index, mode label)`` to a complex amplitude, or
    is a list of per-bin arrays indexed by mode label.  Bins are rectangular
    and centred on the family frequencies.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not families:
        raise InvalidInputError("no mode families to synthesize from")
    omega = np.array([f.omega for f in families])
    if bin_widths is None:
        bin_widths = pv.trapezoid_weights(omega) if omega.size > 1 else np.ones(1)
    if not isinstance(amplitudes, dict):
        amplitudes = {(bi, n): a for bi, row in enumerate(amplitudes) for n, a in enumerate(np.atleast_1d(row))}
    grid = next(m.grid for f in families for m in f.modes) if any(f.modes for f in families) else None
    if grid is None:
        raise InvalidInputError("mode families are empty")
    acc = np.zeros((t.size, grid.n_cells, 18))
    for (bi, n), alpha in amplitudes.items():
        if alpha == 0:
            continue
        fam = families[bi]
        mode = next((m for m in fam.modes if m.n == n), None)
        if mode is None:
            raise InvalidInputError(f"no mode n={n} in frequency bin {bi}")
        xf = mode.fields()
        noise = (mode.z / (1j * np.pi) - 1) * np.einsum("cij,cj->ci", fam.pair.gamma_a, xf)
        x = np.concatenate([xf, derived_EH(mode, fam.pair), noise], axis=1)
        phase = np.exp(-1j * fam.omega * t)
        acc += 2 * np.real((bin_widths[bi] / (2 * np.pi)) * alpha * phase[:, None, None] * x[None])
    return FieldState(t, acc[..., 0:3], acc[..., 3:6], acc[..., 6:9], acc[..., 9:12], acc[..., 12:15], acc[..., 15:18])


def energy_and_flux(state: FieldState, cell_volume: float = 1.0, c: float = 1.0):
    """Field energy ``(1/2) int (D.D + B.B) dV`` per time and Poynting ``c E x H``."""
    u = 0.5 * np.sum(state.d**2 + state.b**2, axis=(-2, -1)) * cell_volume
    s = c * np.cross(state.e, state.h)
    return u, s


# --------------------------------------------------------------------------
# classical transient in a one-dimensional Lorentz stack


@dataclass
class TransientResult:
    """Energy bookkeeping of a pulse crossing an accounting interval."""

    x: np.ndarray
    t: np.ndarray
    window: tuple
    flux_in: float  # time-integrated net Poynting flux into the window
    energy_change: float
    dissipated_spectral: float
    dissipated_direct: float
    energy: np.ndarray = field(repr=False)

    @property
    def balance_error(self) -> float:
        return abs(self.flux_in - self.energy_change - self.dissipated_spectral) / abs(self.flux_in)


def _lorentz_params(region):
    """Isotropic Lorentz terms per block as ``[(f, w0, gamma), ...]``."""
    out = {"ee": [], "mm": []}
    if not isinstance(region, ClosedFormRegion):
        raise InvalidInputError("the transient solver handles closed-form Lorentz regions only")
    for term in region.terms:
        if not isinstance(term, LorentzTerm) or term.block not in out or not np.allclose(term.tensor, np.eye(3)):
            raise InvalidInputError("the transient solver needs isotropic ee/mm Lorentz terms")
        out[term.block].append((term.f, term.w0, term.gamma))
    return out


def simulate_transient(
    model: MediumModel,
    length: float,
    n: int,
    window: tuple,
    centre: float,
    width: float = 1.5,
    carrier: float = 1.0,
    duration: float = 60.0,
    dt: float = 0.02,
    c: float = 1.0,
) -> TransientResult:
    """Right-moving pulse ``D_y = B_z`` on a periodic line, integrated by RK4.

    Media follow ``P'' + gamma P' + w0^2 P = f w0^2 D`` (and the same for
    ``M`` driven by ``B``).  The interval ``window`` must contain every lossy
    cell and start in vacuum.  The dissipated energy is evaluated from the
    recorded spectra of the lossy cells through the model's ``Gamma_A``.
    """
    grid = SpectralGrid.line(length, n)
    x = np.arange(n) * (length / n)
    dx = length / n
    regions = model.region_map(grid).ravel()
    params = [_lorentz_params(r) for r in model.regions]
    ee = [(regions == ri, p) for ri, pr in enumerate(params) for p in pr["ee"]]
    mm = [(regions == ri, p) for ri, pr in enumerate(params) for p in pr["mm"]]
    lossy = np.zeros(n, bool)
    for sel, _ in ee + mm:
        lossy |= sel
    lo, hi = (int(round(v / dx)) for v in window)
    if np.any(lossy[: lo + 1]) or np.any(lossy[hi:]):
        raise InvalidInputError("accounting window must enclose all media with vacuum margins")
    kx = 2 * np.pi * np.fft.fftfreq(n, dx)

    def ddx(f):
        return np.real(np.fft.ifft(1j * kx * np.fft.fft(f)))

    n_e, n_m = len(ee), len(mm)

    def rhs(state):
        d, b = state[0], state[1]
        pe, ve = state[2 : 2 + n_e], state[2 + n_e : 2 + 2 * n_e]
        pm = state[2 + 2 * n_e : 2 + 2 * n_e + n_m]
        vm = state[2 + 2 * n_e + n_m :]
        e_f = d - pe.sum(axis=0)
        h_f = b - pm.sum(axis=0)
        out = np.empty_like(state)
        out[0] = -c * ddx(h_f)
        out[1] = -c * ddx(e_f)
        for j, (sel, (f, w0, g)) in enumerate(ee):
            out[2 + j] = ve[j]
            out[2 + n_e + j] = np.where(sel, f * w0**2 * d - w0**2 * pe[j] - g * ve[j], 0.0)
        for j, (sel, (f, w0, g)) in enumerate(mm):
            out[2 + 2 * n_e + j] = vm[j]
            out[2 + 2 * n_e + n_m + j] = np.where(sel, f * w0**2 * b - w0**2 * pm[j] - g * vm[j], 0.0)
        return out

    pulse = np.exp(-((x - centre) ** 2) / (2 * width**2)) * np.cos(carrier * (x - centre))
    state = np.zeros((2 + 2 * n_e + 2 * n_m, n))
    state[0] = pulse
    state[1] = pulse
    steps = int(round(duration / dt))
    t = np.arange(steps + 1) * dt
    flux = np.zeros(steps + 1)
    energy = np.zeros(steps + 1)
    rec_d = np.zeros((steps + 1, int(lossy.sum())))
    rec_b = np.zeros_like(rec_d)
    cells = slice(lo, hi)

    def record(i, s):
        d, b = s[0], s[1]
        e_f = d - s[2 : 2 + n_e].sum(axis=0)
        h_f = b - s[2 + 2 * n_e : 2 + 2 * n_e + n_m].sum(axis=0)
        sx = c * e_f * h_f
        flux[i] = sx[lo] - sx[hi]
        # trapezoid over [lo, hi] so the energy matches the flux planes
        dens = 0.5 * (d**2 + b**2)
        energy[i] = dx * (dens[cells].sum() - 0.5 * dens[lo] + 0.5 * dens[hi])
        rec_d[i], rec_b[i] = d[lossy], b[lossy]

    record(0, state)
    for i in range(1, steps + 1):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        record(i, state)
    tw = pv.trapezoid_weights(t)
    flux_in = float(np.sum(tw * flux))

    # spectra of the lossy cells, X(w) = int x(t) e^{iwt} dt on w >= 0
    nfft = 2 * (steps + 1)
    omega = 2 * np.pi * np.fft.rfftfreq(nfft, dt)
    spec_d = dt * np.conj(np.fft.rfft(rec_d * tw[:, None] / dt, nfft, axis=0))
    spec_b = dt * np.conj(np.fft.rfft(rec_b * tw[:, None] / dt, nfft, axis=0))
    lossy_regions = regions[lossy]
    ga = np.zeros((omega.size, lossy_regions.size, 6, 6), complex)
    for ri in np.unique(lossy_regions):
        ga[1:, lossy_regions == ri] = model.regions[ri].gamma_A(omega[1:])[:, None]
    dw = np.full(omega.size, omega[1] - omega[0])
    dw[0] *= 0.5
    vec = lambda a: np.stack([np.zeros_like(a), a, np.zeros_like(a)], axis=-1)
    diss = dissipated_energy(omega, vec(spec_d), np.stack([np.zeros_like(spec_b), np.zeros_like(spec_b), spec_b], -1), ga, dv=dx, weights=dw)

    # direct time-domain dissipation int int (P'.D + M'.B) as a cross-check
    direct = dx * _direct_dissipation(ee, mm, rec_d, rec_b, lossy, dt, tw)
    return TransientResult(x, t, tuple(window), flux_in, float(energy[-1] - energy[0]), diss, direct, energy)


def _direct_dissipation(ee, mm, rec_d, rec_b, lossy, dt, tw) -> float:
    """Time-domain ``int dt int dV (P'.D + M'.B)`` from re-integrated oscillators."""
    from scipy.signal import lsim

    total = 0.0
    t = np.arange(rec_d.shape[0]) * dt
    for terms, rec in ((ee, rec_d), (mm, rec_b)):
        for sel, (f, w0, g) in terms:
            cols = sel[lossy]
            if not np.any(cols):
                continue
            sys = ([f * w0**2, 0.0], [1.0, g, w0**2])  # P' as output
            for col in np.nonzero(cols)[0]:
                _, pdot, _ = lsim(sys, rec[:, col], t)
                total += float(np.sum(tw * pdot * rec[:, col]))
    return total
