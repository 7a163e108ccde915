"""Causal magneto-electric media.

Two kinds of region are supported:

* ``ClosedFormRegion`` -- sums of Lorentz resonances (optionally
  Zeeman-split by a bias field) placed in any of the four blocks.  The full
  response, its dissipative part and its time kernel are all analytic.
* ``BandRegion`` -- a set of oscillator bands given through their coupling
  profiles ``L^e(w)``, ``L^m(w)``.  The dissipative part is the pointwise
  product ``(i/2) sum L L^dagger``; the non-dissipative part is the
  principal-value integral of the same products.

All frequency integrals carry the measure ``dw / (2 pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from . import pv
from .errors import (
    CoverageError,
    GridError,
    InvalidInputError,
    NonDissipativeModelError,
    WindowError,
)
from .tensors import BLOCKS, BlockResponse, dissipative_part, hermitian_part

EYE3 = np.eye(3)
RESPONSE_FLOOR = 1e-8
_BLOCK_SLICES = {
    "ee": (slice(0, 3), slice(0, 3)),
    "em": (slice(0, 3), slice(3, 6)),
    "me": (slice(3, 6), slice(0, 3)),
    "mm": (slice(3, 6), slice(3, 6)),
}


def _check_lorentz(f, w0, gamma):
    if gamma <= 0:
        raise NonDissipativeModelError(f"Lorentz width must be positive, got gamma={gamma}")
    if f < 0:
        raise InvalidInputError(f"Lorentz strength must be non-negative, got f={f}")
    if w0 <= 0:
        raise InvalidInputError(f"Lorentz centre must be positive, got w0={w0}")


def lorentz_closed_form(f, w0, gamma, w):
    """``f w0^2 / (w0^2 - w^2 - i gamma w)``; accepts complex ``w``."""
    _check_lorentz(f, w0, gamma)
    w = np.asarray(w)
    out = f * w0**2 / (w0**2 - w**2 - 1j * gamma * w)
    return out if out.ndim else complex(out)


def decay_width(w0, gamma, shift=0.0):
    """Twice the slowest pole decay rate of ``w0^2 - w^2 - (i gamma + shift) w``.

    Equals ``gamma`` for an underdamped oscillator and drops towards
    ``2 w0^2 / gamma`` in the overdamped regime.
    """
    b = 1j * gamma + shift
    root = np.sqrt(b * b + 4 * w0**2)
    return float(-2 * max(((-b + root) / 2).imag, ((-b - root) / 2).imag))


def _two_pole_kernel(amp, p1, p2, t):
    """Inverse transform of ``amp / (-(w - p1)(w - p2))`` for ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    if abs(p1 - p2) < 1e-12 * max(abs(p1), 1.0):  # critically damped
        return amp * t * np.exp(-1j * p1 * t)
    return 1j * amp * (np.exp(-1j * p1 * t) - np.exp(-1j * p2 * t)) / (p1 - p2)


# --------------------------------------------------------------------------
# closed-form regions


@dataclass(frozen=True)
class LorentzTerm:
    """``lorentz(f, w0, gamma; w) * tensor`` added to one block."""

    block: str
    f: float
    w0: float
    gamma: float
    tensor: np.ndarray = field(default_factory=lambda: EYE3.copy())

    def __post_init__(self):
        if self.block not in BLOCKS:
            raise InvalidInputError(f"unknown block {self.block!r}")
        _check_lorentz(self.f, self.w0, self.gamma)
        t = np.asarray(self.tensor, dtype=float)
        if t.shape != (3, 3):
            raise InvalidInputError("Lorentz tensor must be a real 3x3 matrix")
        object.__setattr__(self, "tensor", t)

    def response(self, w):
        return self._embed(lorentz_closed_form(self.f, self.w0, self.gamma, np.asarray(w))[..., None, None] * self.tensor, w)

    def _embed(self, blk, w):
        out = np.zeros(np.shape(w) + (6, 6), dtype=blk.dtype)
        out[(...,) + _BLOCK_SLICES[self.block]] = blk
        return out

    def kernel(self, t):
        disc = np.sqrt(complex(self.w0**2 - self.gamma**2 / 4))
        p1, p2 = -0.5j * self.gamma + disc, -0.5j * self.gamma - disc
        k = _two_pole_kernel(self.f * self.w0**2, p1, p2, t).real
        return self._embed(k[..., None, None] * self.tensor, t)

    def widths(self):
        return [decay_width(self.w0, self.gamma)]


def _cross(b):
    return np.array([[0, -b[2], b[1]], [b[2], 0, -b[0]], [-b[1], b[0], 0]], dtype=float)


@dataclass(frozen=True)
class ZeemanTerm:
    """Electric oscillator in a static bias: gyrotropic ``ee`` response.

    Solves ``P'' + gamma P' + w0^2 P + kappa B0 x P' = f w0^2 D``.  The bias
    ``B0`` is odd under time reversal.
    """

    f: float
    w0: float
    gamma: float
    bias: tuple = (0.0, 0.0, 0.0)
    kappa: float = 1.0
    block = "ee"

    def __post_init__(self):
        _check_lorentz(self.f, self.w0, self.gamma)
        object.__setattr__(self, "bias", tuple(float(x) for x in self.bias))

    def _projectors(self):
        b = np.asarray(self.bias)
        nb = np.linalg.norm(b)
        if nb == 0:
            return 0.0, [(EYE3, 0.0)]
        u = b / nb
        par = np.outer(u, u)
        perp = EYE3 - par
        ux = _cross(u)
        wc = self.kappa * nb
        # u x e_(+/-) = -/+ i e_(+/-); projectors onto the circular states
        p_plus = 0.5 * (perp - 1j * ux)
        p_minus = 0.5 * (perp + 1j * ux)
        return wc, [(p_plus, +1.0), (p_minus, -1.0), (par, 0.0)]

    def response(self, w):
        w = np.asarray(w)
        wc, parts = self._projectors()
        blk = np.zeros(w.shape + (3, 3), dtype=complex)
        for proj, s in parts:
            chi = self.f * self.w0**2 / (self.w0**2 - w**2 - 1j * self.gamma * w - s * wc * w)
            blk = blk + chi[..., None, None] * proj
        out = np.zeros(w.shape + (6, 6), dtype=complex)
        out[..., :3, :3] = blk
        return out

    def kernel(self, t):
        t = np.asarray(t, dtype=float)
        wc, parts = self._projectors()
        blk = np.zeros(t.shape + (3, 3), dtype=complex)
        for proj, s in parts:
            # w0^2 - w^2 - (i gamma + s wc) w = -(w - p1)(w - p2)
            bcoef = 1j * self.gamma + s * wc
            root = np.sqrt(bcoef**2 + 4 * self.w0**2)
            p1, p2 = (-bcoef + root) / 2, (-bcoef - root) / 2
            blk = blk + _two_pole_kernel(self.f * self.w0**2, p1, p2, t)[..., None, None] * proj
        out = np.zeros(t.shape + (6, 6))
        out[..., :3, :3] = blk.real
        return out

    def widths(self):
        wc, parts = self._projectors()
        return [min(decay_width(self.w0, self.gamma, s * wc) for _, s in parts)]

    def reversed(self):
        return replace(self, bias=tuple(-x for x in self.bias))


@dataclass(frozen=True)
class ClosedFormRegion:
    name: str
    terms: tuple = ()
    flips: tuple = ()  # parameter names reversed under time reversal

    kind = "closed_form"

    def response(self, w) -> np.ndarray:
        w = np.asarray(w)
        out = np.zeros(w.shape + (6, 6), dtype=complex)
        for term in self.terms:
            out = out + term.response(w)
        return out

    def gamma_A(self, w):
        return dissipative_part(self.response(w))

    def gamma_H(self, w):
        return hermitian_part(self.response(w))

    def kernel(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (6, 6))
        pos = t >= 0
        for term in self.terms:
            out[pos] += term.kernel(t[pos])
        return out

    def response_time(self) -> float:
        widths = [g for term in self.terms for g in term.widths()]
        return 2 * np.log(1 / RESPONSE_FLOOR) / min(widths) if widths else 0.0

    def widths(self):
        return [g for term in self.terms for g in term.widths()]

    @property
    def is_vacuum(self) -> bool:
        return not self.terms

    def reversed(self, flips=None):
        flips = self.flips if flips is None else flips
        if "bias" not in flips:
            return self
        terms = tuple(t.reversed() if isinstance(t, ZeemanTerm) else t for t in self.terms)
        return replace(self, terms=terms)


# --------------------------------------------------------------------------
# coupling-generated regions


def _lorentz_loss_root(params, w):
    """``sqrt(2 Im lorentz(w))`` on ``w > 0``."""
    f, w0, g = params
    return np.sqrt(2.0 * np.maximum(np.imag(lorentz_closed_form(f, w0, g, w)), 0.0))


@dataclass(frozen=True)
class OscillatorBand:
    """One oscillator channel with Lorentz-shaped loss spectra.

    ``L^e(w) = sqrt(2 Im chi_e(w)) O_e U^dagger`` and
    ``L^m(w) = sign * i sqrt(2 Im chi_m(w)) O_m U^dagger``; either half may
    be absent.  Custom profiles (callables ``w -> (n, 3, 3)``) override the
    Lorentz shapes.
    """

    channel: int = 0
    electric: tuple | None = None  # (f, w0, gamma)
    magnetic: tuple | None = None
    sign: int = 1
    orientation_e: np.ndarray = field(default_factory=lambda: EYE3.copy())
    orientation_m: np.ndarray = field(default_factory=lambda: EYE3.copy())
    gauge: np.ndarray = field(default_factory=lambda: EYE3.astype(complex))
    electric_profile: Callable | None = None
    magnetic_profile: Callable | None = None

    def __post_init__(self):
        for p in (self.electric, self.magnetic):
            if p is not None:
                _check_lorentz(*p)
        if self.sign not in (1, -1):
            raise InvalidInputError("band sign must be +1 or -1")
        u = np.asarray(self.gauge, dtype=complex)
        if not np.allclose(u @ u.conj().T, EYE3, atol=1e-12):
            raise InvalidInputError("gauge matrix must be unitary")
        object.__setattr__(self, "gauge", u)
        object.__setattr__(self, "orientation_e", np.asarray(self.orientation_e, dtype=float))
        object.__setattr__(self, "orientation_m", np.asarray(self.orientation_m, dtype=float))

    def profiles(self, w):
        """Coupling tensors ``(L^e, L^m)`` of shape ``(n, 3, 3)`` at ``w > 0``."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        udag = self.gauge.conj().T
        if self.electric_profile is not None:
            le = np.asarray(self.electric_profile(w), dtype=complex)
        elif self.electric is not None:
            le = _lorentz_loss_root(self.electric, w)[:, None, None] * self.orientation_e
        else:
            le = np.zeros((w.size, 3, 3), dtype=complex)
        if self.magnetic_profile is not None:
            lm = np.asarray(self.magnetic_profile(w), dtype=complex)
        elif self.magnetic is not None:
            lm = self.sign * 1j * _lorentz_loss_root(self.magnetic, w)[:, None, None] * self.orientation_m
        else:
            lm = np.zeros((w.size, 3, 3), dtype=complex)
        return le @ udag, lm @ udag

    def stacked(self, w):
        le, lm = self.profiles(w)
        return np.concatenate([le, lm], axis=1)  # (n, 6, 3)

    def widths(self):
        return [decay_width(p[1], p[2]) for p in (self.electric, self.magnetic) if p is not None]

    def centres(self):
        return [p[1] for p in (self.electric, self.magnetic) if p is not None]


def coupling_products(bands: Sequence[OscillatorBand], w) -> np.ndarray:
    """``sum_lambda K K^dagger`` with ``K = [L^e; L^m]`` at ``w > 0``."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    out = np.zeros((w.size, 6, 6), dtype=complex)
    for band in bands:
        k = band.stacked(w)
        out += k @ np.conj(np.swapaxes(k, -1, -2))
    return out


def gamma_A_from_couplings(bands: Sequence[OscillatorBand], w) -> np.ndarray:
    """Dissipative part ``(i/2) sum L^s (L^n)^dagger`` at signed frequencies.

    Negative frequencies are filled from the reality condition
    ``Gamma_A(-w) = Gamma_A(w)*``.
    """
    w = np.asarray(w, dtype=float)
    flat = np.atleast_1d(w)
    if np.any(flat == 0):
        raise InvalidInputError("dissipative part is undefined at w = 0")
    out = 0.5j * coupling_products(bands, np.abs(flat))
    out[flat < 0] = np.conj(out[flat < 0])
    return out.reshape(w.shape + (6, 6))


def gamma_H_from_couplings(bands: Sequence[OscillatorBand], w, grid=None, tail_budget=pv.TAIL_BUDGET) -> np.ndarray:
    """Non-dissipative part by principal-value quadrature over ``grid``."""
    w = np.asarray(w, dtype=float)
    flat = np.atleast_1d(w)
    if np.any(flat == 0):
        raise InvalidInputError("use a positive frequency grid for the quadrature")
    if grid is None:
        grid = default_grid(bands)
    if not bands:
        return np.zeros(w.shape + (6, 6), dtype=complex)
    src = gamma_A_from_couplings(bands, grid)
    at = gamma_A_from_couplings(bands, np.abs(flat))
    res = pv.pv_transform(grid, src.real, src.imag, np.abs(flat), at.real, at.imag, tail_budget=tail_budget)
    out = res.value
    out[flat < 0] = np.conj(out[flat < 0])
    return out.reshape(w.shape + (6, 6))


def default_grid(bands, n=pv.QUADRATURE_POINTS):
    centres = [c for b in bands for c in b.centres()] or [1.0]
    lo, hi = min(centres), max(centres)
    return np.geomspace(pv.QUADRATURE_SPAN[0] * lo, pv.QUADRATURE_SPAN[1] * hi, n)


@dataclass(frozen=True)
class BandRegion:
    name: str
    bands: tuple = ()
    grid: np.ndarray | None = None
    flips: tuple = ()

    kind = "bands"

    def __post_init__(self):
        if self.grid is None:
            object.__setattr__(self, "grid", default_grid(self.bands))

    def gamma_A(self, w):
        w = np.asarray(w, dtype=float)
        if not self.bands:
            return np.zeros(w.shape + (6, 6), dtype=complex)
        return gamma_A_from_couplings(self.bands, w)

    def gamma_H(self, w):
        return gamma_H_from_couplings(self.bands, w, self.grid)

    def response(self, w):
        w = np.asarray(w, dtype=float)
        if not self.bands:
            return np.zeros(w.shape + (6, 6), dtype=complex)
        return self.gamma_H(w) + self.gamma_A(w)

    def response_time(self) -> float:
        widths = self.widths()
        # cross-products of distinct resonances decay at the slower rate
        return 2 * np.log(1 / RESPONSE_FLOOR) / min(widths) if widths else 0.0

    def widths(self):
        return [g for b in self.bands for g in b.widths()]

    @property
    def is_vacuum(self) -> bool:
        return not self.bands

    def kernel(self, t, tol=1e-6):
        return band_kernel(self.bands, t, self.response_time(), tol=tol)

    def reversed(self, flips=None):
        return self


def band_kernel(bands, t, response_time, tol=1e-6, width=None):
    """Real kernel ``theta(t) int dw/2pi [2 Re(LL+) sin wt - 2 Im(LL+) cos wt]``.

    Evaluated as ``(dw / pi) Im sum_k conj(M_k) exp(i w_k t)`` with a uniform
    frequency grid matched to the time step, so a single FFT covers every
    non-negative time sample.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (6, 6))
    if not bands:
        return out
    pos = t >= 0
    tp = t[pos]
    if tp.size < 2:
        raise GridError("kernel needs at least two non-negative time samples")
    dt = tp[1] - tp[0]
    steps = np.round(tp / dt)
    if np.max(np.abs(tp - steps * dt)) > 1e-9 * max(dt, 1.0):
        raise GridError("time grid must be uniform and contain t = 0")
    widths = [g for b in bands for g in b.widths()] or [1.0]
    width = min(widths) if width is None else width
    span = max(tp[-1], response_time)
    n = 1 << int(np.ceil(np.log2(max(4 * tp.size, 2 * span / dt, 20 * 2 * np.pi / (width * dt)))))
    dw = 2 * np.pi / (n * dt)
    wk = dw * np.arange(n)
    m = np.zeros((n, 6, 6), dtype=complex)
    m[1:] = coupling_products(bands, wk[1:])
    series = n * np.fft.ifft(np.conj(m), axis=0)
    vals = (dw / np.pi) * series.imag
    alias = np.max(np.abs(vals[n // 2 - 8:n // 2 + 8]))
    peak = np.max(np.abs(vals))
    if peak > 0 and alias > tol * peak:
        raise GridError(f"kernel aliasing estimate {alias / peak:.2e} exceeds {tol:g}; refine the time step")
    out[pos] = vals[steps.astype(int)]
    return out


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Placement:
    """Assign a region to the cells of a slab ``lo <= x_axis/L < hi``."""

    region: str
    axis: int | None = None  # None fills the whole box
    lo: float = 0.0
    hi: float = 1.0


@dataclass(frozen=True)
class MediumModel:
    regions: tuple
    layout: tuple = ()
    response_time: float | None = None

    def __post_init__(self):
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise InvalidInputError("region names must be unique")
        for p in self.layout:
            if p.region not in names:
                raise InvalidInputError(f"layout refers to unknown region {p.region!r}")
        if self.response_time is None:
            taus = [r.response_time() for r in self.regions]
            object.__setattr__(self, "response_time", max(taus) if taus else 0.0)

    def region(self, key) -> ClosedFormRegion | BandRegion:
        if isinstance(key, (int, np.integer)):
            return self.regions[int(key)]
        for r in self.regions:
            if r.name == key:
                return r
        raise CoverageError(f"no region named {key!r}")

    def region_map(self, grid) -> np.ndarray:
        """Region index per grid cell, shape ``grid.points``."""
        idx = np.full(grid.points, -1, dtype=int)
        names = [r.name for r in self.regions]
        layout = self.layout or (Placement(self.regions[0].name),)
        frac = [(np.arange(n) + 0.5) / n for n in grid.points]
        for p in layout:
            ri = names.index(p.region)
            if p.axis is None:
                idx[...] = ri
            else:
                sel = (frac[p.axis] >= p.lo) & (frac[p.axis] < p.hi)
                shape = [1, 1, 1]
                shape[p.axis] = -1
                mask = np.broadcast_to(sel.reshape(shape), grid.points)
                idx[mask] = ri
        if np.any(idx < 0):
            raise CoverageError("some grid cells are not covered by any region")
        return idx

    def reversed(self, flips=None) -> "MediumModel":
        """Time-reversed parameter set (``{.}_{-B0}``)."""
        return replace(self, regions=tuple(r.reversed(flips) for r in self.regions))

    @property
    def is_homogeneous(self) -> bool:
        return len({p.region for p in self.layout}) <= 1


def gamma_full(model: MediumModel, r, w: float) -> BlockResponse:
    """Full response of the region at ``r`` (name or index)."""
    region = model.region(r)
    m = region.response(np.array([w]))[0]
    return BlockResponse.from_matrix(m, frequency=w, position_id=region.name)


# --------------------------------------------------------------------------
# time domain


@dataclass(frozen=True)
class TimeKernel:
    t: np.ndarray
    samples: np.ndarray  # (nt, 6, 6) real
    region: str
    response_time: float

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


def time_kernel(model: MediumModel, r, t_grid, tol: float = 1e-6) -> TimeKernel:
    region = model.region(r)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 3 or np.any(np.diff(t) <= 0):
        raise GridError("time grid must be one-dimensional and increasing")
    if np.ptp(np.diff(t)) > 1e-9 * np.diff(t).mean():
        raise GridError("time grid must be uniform")
    if isinstance(region, BandRegion):
        samples = region.kernel(t, tol=tol)
    else:
        samples = region.kernel(t)
    return TimeKernel(t, samples, region.name, region.response_time())


def apply_constitutive(kernel: TimeKernel, d, b):
    """Discrete causal convolution of the kernel with ``(D, B)`` histories.

    ``d`` and ``b`` have shape ``(nt, 3)`` sampled with the kernel's step.
    Returns ``(P, M, valid_from)``; samples before ``valid_from`` lack a full
    response-time of history.
    """
    d = np.asarray(d, dtype=float)
    b = np.asarray(b, dtype=float)
    if d.shape != b.shape or d.ndim != 2 or d.shape[1] != 3:
        raise InvalidInputError("field histories must have shape (nt, 3)")
    dt = kernel.dt
    pos = kernel.t >= -0.5 * dt
    ks = kernel.samples[pos].copy()
    if ks.shape[0] * dt < kernel.response_time:
        raise WindowError("kernel does not span the response time")
    history = int(np.ceil(kernel.response_time / dt))
    if d.shape[0] <= history:
        raise WindowError(
            f"field history of {d.shape[0]} samples is shorter than the response time ({history} samples)"
        )
    ks = ks[: history + 1]
    ks[0] *= 0.5  # trapezoid end-point at tau = 0
    x = np.concatenate([d, b], axis=1)  # (nt, 6)
    y = np.zeros_like(x)
    for i in range(6):
        for j in range(6):
            if np.any(ks[:, i, j]):
                y[:, i] += fftconvolve(ks[:, i, j], x[:, j])[: x.shape[0]]
    y *= dt
    return y[:, :3], y[:, 3:], history
