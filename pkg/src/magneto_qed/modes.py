"""Transverse-polariton mode problem on a periodic spectral grid.

For each real frequency ``w`` the mode fields ``x = [D; B]`` and the complex
scalar ``Z`` solve

    curl6 { i (1 - Gamma_H) x } + (w/c) x = (Z/pi) curl6 { Gamma_A x }

with ``curl6 = [[0, -curl], [curl, 0]]``.  The 6x6 blocks placed in the
brackets are exactly the Hermitian and anti-Hermitian parts of the full
response matrix.  Everything is assembled in the transverse plane-wave
basis, where the curl is exact and the medium acts by convolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .couplings import factorize_gamma_A
from .errors import (
    CoverageError,
    DegenerateModeError,
    InvalidInputError,
    NumericalError,
    PoleCollisionError,
)
from .grid import SpectralGrid, _cross_matrix
from .media import BandRegion, MediumModel
from .tensors import dissipative_part, hermitian_part

BETA_TOL = 1e-12
CLUSTER_TOL = 1e-8
RESIDUAL_TOL = 1e-8
WEAK_COUPLING = 1e-6


# --------------------------------------------------------------------------
# assembly


def cell_responses(model: MediumModel, grid: SpectralGrid, omega) -> np.ndarray:
    """Full 6x6 response per cell, shape ``(n_cells, 6, 6)``."""
    regions = model.region_map(grid).ravel()
    out = np.zeros((grid.n_cells, 6, 6), dtype=complex)
    w = np.asarray([omega])
    for idx in np.unique(regions):
        region = model.regions[idx]
        if region.is_vacuum:
            continue
        out[regions == idx] = region.response(w)[0]
    return out


def _convolution_blocks(grid: SpectralGrid, cells: np.ndarray) -> np.ndarray:
    """``M_hat(k - k')`` blocks ``(n_k, n_k, 6, 6)`` from per-cell matrices."""
    shaped = cells.reshape(tuple(grid.points) + (6, 6))
    spec = np.fft.fftn(shaped, axes=(0, 1, 2)).reshape(grid.n_cells, 6, 6) / grid.n_cells
    return spec[grid.difference_index]


def _medium_operator(grid: SpectralGrid, cells: np.ndarray) -> np.ndarray:
    """``T^dagger curl6 M T`` as a dense ``(dim, dim)`` matrix."""
    g = np.einsum("kia,kij->kaj", grid.embedding, grid.curl6)  # T^T curl6 (T real)
    blocks = _convolution_blocks(grid, cells)
    op = np.einsum("kaj,klji,lib->kalb", g, blocks, grid.embedding)
    return op.reshape(grid.dim, grid.dim)


def _curl_operator(grid: SpectralGrid) -> np.ndarray:
    g = np.einsum("kia,kij,kjb->kab", grid.embedding, grid.curl6, grid.embedding)
    return scipy.linalg.block_diag(*g) if grid.n_k else np.zeros((0, 0))


def _loss_gram(grid: SpectralGrid, gamma_a_cells: np.ndarray) -> np.ndarray:
    """Hermitian form ``-i int x^dagger Gamma_A x dV`` in coefficient space."""
    blocks = _convolution_blocks(grid, gamma_a_cells)
    w = -1j * grid.volume * np.einsum("kia,klij,ljb->kalb", grid.embedding, blocks, grid.embedding)
    w = w.reshape(grid.dim, grid.dim)
    return 0.5 * (w + w.conj().T)


@dataclass
class OperatorPair:
    a: np.ndarray
    b: np.ndarray
    omega: float
    grid: SpectralGrid
    gamma_h: np.ndarray  # per cell
    gamma_a: np.ndarray  # per cell
    loss_gram: np.ndarray
    c: float = 1.0


def assemble(model: MediumModel, grid: SpectralGrid, omega: float, c: float = 1.0) -> OperatorPair:
    if omega <= 0:
        raise InvalidInputError("mode frequency must be positive")
    full = cell_responses(model, grid, omega)
    gh, ga = hermitian_part(full), dissipative_part(full)
    eye = np.broadcast_to(np.eye(6), gh.shape)
    a = 1j * _medium_operator(grid, eye - gh) + (omega / c) * np.eye(grid.dim)
    b = _medium_operator(grid, ga) / np.pi
    return OperatorPair(a, b, float(omega), grid, gh, ga, _loss_gram(grid, ga), c)


# --------------------------------------------------------------------------
# modes


@dataclass
class ModeSolution:
    omega: float
    z: complex
    n: int
    coeffs: np.ndarray  # transverse coefficients (d1, d2, b1, b2) per active k
    grid: SpectralGrid
    eigen_residual: float = 0.0
    quad_form: float = 0.0  # -i int x^dagger Gamma_A x dV
    normalized: bool = False
    scale: float = 1.0
    cluster: int = 0
    flags: tuple = ()

    def fields(self) -> np.ndarray:
        """Real-space ``[D, B]`` per cell, shape ``(n_cells, 6)``."""
        return self.grid.coefficients_to_fields(self.coeffs)

    @property
    def d(self) -> np.ndarray:
        return self.fields()[:, :3]

    @property
    def b(self) -> np.ndarray:
        return self.fields()[:, 3:]

    def spectral(self) -> np.ndarray:
        """Six-vector spectra per FFT wavevector, shape ``(n_cells, 6)``."""
        return self.grid.to_spectral6(self.coeffs)


@dataclass
class ModeSet:
    omega: float
    modes: list
    n_infinite: int
    n_total: int
    pair: OperatorPair | None = field(default=None, repr=False)

    @property
    def z(self) -> np.ndarray:
        return np.array([m.z for m in self.modes])


def _phase_fix(v: np.ndarray, n_k: int) -> np.ndarray:
    """Largest-magnitude D coefficient made real and positive."""
    d = v.reshape(n_k, 4)[:, :2].ravel()
    mag = np.abs(d)
    if mag.max() == 0:
        mag = np.abs(v)
        d = v
    # earliest index within rounding of the maximum keeps ties deterministic
    i = int(np.nonzero(mag >= mag.max() * (1 - 1e-8))[0][0])
    return v * (np.conj(d[i]) / abs(d[i]))


def _clusters(z: np.ndarray, tol: float):
    """Group eigenvalues closer than ``tol * max(1, |Z|)`` (single linkage on sorted order)."""
    order = np.lexsort((z.imag, z.real))
    groups, current = [], [order[0]] if z.size else []
    for i in order[1:]:
        ref = z[current[-1]]
        if abs(z[i] - ref) <= tol * max(1.0, abs(ref)):
            current.append(i)
        else:
            groups.append(current)
            current = [i]
    if current:
        groups.append(current)
    return groups


def solve(pair: OperatorPair, beta_tol: float = BETA_TOL, cluster_tol: float = CLUSTER_TOL) -> ModeSet:
    """Finite-Z solutions of the pencil by QZ.

    Pairs with ``|beta| <= beta_tol ||B||`` are infinite (loss-decoupled)
    and are counted but dropped.  Degenerate clusters are given a basis that
    is orthonormal in the loss form and diagonalizes the basis-index
    operator, which makes the labels ``n`` reproducible.
    """
    dim = pair.a.shape[0]
    n_k = pair.grid.n_k
    b_norm = np.linalg.norm(pair.b)
    if dim == 0 or b_norm == 0:
        return ModeSet(pair.omega, [], dim, dim, pair)
    try:
        (alpha, beta), vr = scipy.linalg.eig(pair.a, pair.b, right=True, homogeneous_eigvals=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"QZ failed at w={pair.omega:g}: cond(A)={np.linalg.cond(pair.a):.3e}, |B|={b_norm:.3e}"
        ) from exc
    finite = np.abs(beta) > beta_tol * b_norm
    z = alpha[finite] / beta[finite]
    vecs = vr[:, finite]
    modes = []
    if z.size:
        w = pair.loss_gram
        a_norm, bn = np.linalg.norm(pair.a, 2), np.linalg.norm(pair.b, 2)
        index_op = np.arange(dim, dtype=float)
        for ci, group in enumerate(_clusters(z, cluster_tol)):
            y = vecs[:, group]
            gram = y.conj().T @ w @ y
            gram = 0.5 * (gram + gram.conj().T)
            try:
                chol = np.linalg.cholesky(gram)
                y = scipy.linalg.solve_triangular(chol, y.conj().T, lower=True).conj().T
            except np.linalg.LinAlgError:
                y = y / np.linalg.norm(y, axis=0)
            f = y.conj().T @ (index_op[:, None] * y)
            _, rot = np.linalg.eigh(0.5 * (f + f.conj().T))
            y = y @ rot
            zs = z[group]
            for j in range(y.shape[1]):
                v = _phase_fix(y[:, j], n_k)
                zj = zs.mean() if len(group) > 1 else zs[0]
                ax, bx = pair.a @ v, pair.b @ v
                res = np.linalg.norm(ax - zj * bx) / ((a_norm + abs(zj) * bn) * np.linalg.norm(v))
                q = float(np.real(v.conj() @ w @ v))
                modes.append(ModeSolution(pair.omega, complex(zj), 0, v, pair.grid, float(res), q, cluster=ci))
    for n, m in enumerate(modes):
        m.n = n
    return ModeSet(pair.omega, modes, int(np.count_nonzero(~finite)), dim, pair)


def normalization_target(z: complex, hbar: float = 1.0) -> float:
    return 2 * hbar / (abs(z) ** 2 / np.pi**2 + 1)


def normalize(mode: ModeSolution, pair: OperatorPair, hbar: float = 1.0) -> ModeSolution:
    """Scale so ``-i (w/2)(|Z|^2/pi^2 + 1) int x^dagger Gamma_A x dV = hbar w``."""
    v = mode.coeffs
    q = float(np.real(v.conj() @ pair.loss_gram @ v))
    norm2 = float(np.real(v.conj() @ v))
    scale_w = np.linalg.norm(pair.loss_gram, 2) if pair.loss_gram.size else 0.0
    if q <= 1e-14 * norm2 * max(scale_w, 1e-300):
        raise DegenerateModeError(f"mode {mode.n} at w={mode.omega:g} does not couple to the loss (form {q:.3e})")
    s = np.sqrt(normalization_target(mode.z, hbar) / q)
    flags = mode.flags
    # loss per unit volume and squared amplitude; tiny values mean the
    # normalized amplitude is controlled by a vanishing dissipation
    if q < WEAK_COUPLING * norm2 * pair.grid.volume and "weakly-coupled" not in flags:
        flags = flags + ("weakly-coupled",)
    return replace(mode, coeffs=v * s, quad_form=q * s * s, normalized=True, scale=mode.scale * s, flags=flags)


def normalize_all(modes: ModeSet, hbar: float = 1.0) -> ModeSet:
    out = []
    for m in modes.modes:
        try:
            out.append(normalize(m, modes.pair, hbar))
        except DegenerateModeError:
            continue
    return replace(modes, modes=out)


def solve_modes(model: MediumModel, grid: SpectralGrid, omega: float, c: float = 1.0, hbar: float = 1.0) -> ModeSet:
    """Assemble, solve and normalize at one frequency."""
    return normalize_all(solve(assemble(model, grid, omega, c)), hbar)


# --------------------------------------------------------------------------
# derived fields and checks


def derived_EH(mode: ModeSolution, pair: OperatorPair) -> np.ndarray:
    """``[E^T; H^T] = (1 - Gamma_H - (Z/i pi) Gamma_A) [D; B]`` per cell."""
    x = mode.fields()
    resp = np.eye(6) - pair.gamma_h - (mode.z / (1j * np.pi)) * pair.gamma_a
    return np.einsum("cij,cj->ci", resp, x)


def curl_consistency(mode: ModeSolution, pair: OperatorPair) -> float:
    """Relative residual of ``-iwD = c curl H^T`` and ``-iwB = -c curl E^T``."""
    grid = mode.grid
    eh = grid.to_fourier(derived_EH(mode, pair))
    x = mode.spectral()
    ikx = 1j * _cross_matrix(grid.wavevectors)
    w, c = mode.omega, pair.c
    r_d = -1j * w * x[:, :3] - c * np.einsum("kij,kj->ki", ikx, eh[:, 3:])
    r_b = -1j * w * x[:, 3:] + c * np.einsum("kij,kj->ki", ikx, eh[:, :3])
    scale = w * np.linalg.norm(x)
    return float(max(np.linalg.norm(r_d), np.linalg.norm(r_b)) / scale)


def transversality(mode: ModeSolution) -> float:
    """``max |k . D(k)|, |k . B(k)|`` over wavevectors, relative to the field norm."""
    grid = mode.grid
    spec = grid.to_fourier(mode.fields())
    k = grid.wavevectors
    kn = np.linalg.norm(k, axis=1)
    kn = np.where(kn > 0, kn, 1.0)
    dd = np.abs(np.einsum("ki,ki->k", k, spec[:, :3])) / kn
    bb = np.abs(np.einsum("ki,ki->k", k, spec[:, 3:])) / kn
    scale = np.max(np.abs(spec))
    return float(max(dd.max(), bb.max()) / scale) if scale > 0 else 0.0


def classical_maxwell_residual(coeffs, omega, grid: SpectralGrid, model: MediumModel | None = None, cells=None, c: float = 1.0) -> float:
    """Residual of the source-free curl equations with a given response.

    Uses the full ``Gamma(omega)`` of ``model`` (which may be evaluated at a
    complex frequency for closed-form regions) unless per-cell ``cells``
    responses are supplied.
    """
    if cells is None:
        if model is None:
            raise InvalidInputError("need a model or per-cell responses")
        regions = model.region_map(grid).ravel()
        cells = np.zeros((grid.n_cells, 6, 6), dtype=complex)
        for idx in np.unique(regions):
            region = model.regions[idx]
            if region.is_vacuum:
                continue
            if isinstance(region, BandRegion) and np.iscomplexobj(omega) and np.imag(omega) != 0:
                raise InvalidInputError("coupling-generated regions are only defined at real frequency")
            cells[regions == idx] = region.response(np.asarray([omega]))[0]
    x = np.asarray(coeffs, dtype=complex)
    eye = np.broadcast_to(np.eye(6), cells.shape)
    op = 1j * _medium_operator(grid, eye - cells)
    r = op @ x + (omega / c) * x
    return float(np.linalg.norm(r) / (abs(omega / c) * np.linalg.norm(x)))


def augmented_response(mode: ModeSolution, pair: OperatorPair) -> np.ndarray:
    """Per-cell ``Gamma_H + (Z/i pi) Gamma_A``; equals the full response at ``Z = i pi``."""
    return pair.gamma_h + (mode.z / (1j * np.pi)) * pair.gamma_a


# --------------------------------------------------------------------------
# plane-wave oracle


def transverse_basis(k) -> np.ndarray:
    """``(6, 4)`` embedding for one wavevector, same convention as the grid."""
    k = np.asarray(k, dtype=float)
    khat = k / np.linalg.norm(k)
    ref = np.array([0.0, 0.0, 1.0]) if abs(khat[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, khat)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    t = np.zeros((6, 4))
    t[:3, 0], t[:3, 1], t[3:, 2], t[3:, 3] = e1, e2, e1, e2
    return t


@dataclass
class OracleMode:
    z: complex
    amplitude: np.ndarray  # six-vector [D; B] at this k
    coeffs: np.ndarray  # (d1, d2, b1, b2)


def homogeneous_oracle(response: np.ndarray, k, omega: float, c: float = 1.0, beta_tol: float = BETA_TOL):
    """Dense 4x4 reduction of the mode problem for one plane wave ``exp(i k.r)``.

    ``response`` is the homogeneous 6x6 response at ``omega``.  Returns the
    finite-Z solutions, and the matrices for inspection.
    """
    g = np.asarray(response, dtype=complex)
    gh, ga = hermitian_part(g), dissipative_part(g)
    k = np.asarray(k, dtype=float)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    curl = np.zeros((6, 6), dtype=complex)
    curl[:3, 3:] = -1j * kx
    curl[3:, :3] = 1j * kx
    t = transverse_basis(k)
    a4 = t.T @ (1j * curl @ (np.eye(6) - gh)) @ t + (omega / c) * np.eye(4)
    b4 = t.T @ (curl @ ga) @ t / np.pi
    out = []
    b_norm = np.linalg.norm(b4)
    if b_norm == 0:
        return out, a4, b4
    (alpha, beta), vr = scipy.linalg.eig(a4, b4, right=True, homogeneous_eigvals=True)
    for j in np.nonzero(np.abs(beta) > beta_tol * b_norm)[0]:
        v = vr[:, j] / np.linalg.norm(vr[:, j])
        out.append(OracleMode(complex(alpha[j] / beta[j]), t @ v, v))
    out.sort(key=lambda m: (m.z.real, m.z.imag))
    return out, a4, b4


# --------------------------------------------------------------------------
# internal medium amplitudes


def region_couplings(region, w) -> np.ndarray:
    """Coupling stacks ``K = [L^e; L^m]`` of shape ``(n_w, n_channels, 6, 3)``."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if region.is_vacuum:
        return np.zeros((w.size, 0, 6, 3), dtype=complex)
    if isinstance(region, BandRegion):
        return np.stack([b.stacked(w) for b in region.bands], axis=1)
    ga = region.gamma_A(w)
    sets = [factorize_gamma_A(m) for m in ga]
    n_ch = max(s.n_channels for s in sets)
    out = np.zeros((w.size, n_ch, 6, 3), dtype=complex)
    for i, s in enumerate(sets):
        out[i, : s.n_channels] = s.stacked
    return out


@dataclass
class InternalAmplitudes:
    """Medium amplitudes of one mode per (w', cell, channel).

    ``a = [PV 1/(w'-w) + Z delta(w'-w)] s(w') / sqrt(hbar)`` is stored as its
    principal-value part and the delta coefficient ``Z s(w)/sqrt(hbar)``;
    ``b = t(w') / (sqrt(hbar) (w' + w))``.  Here ``s = L^dagger x`` and
    ``t = L^T x``.
    """

    omega_prime: np.ndarray
    pv_part: np.ndarray  # (n_w', n_cells, n_ch, 3)
    delta_coefficient: np.ndarray  # (n_cells, n_ch, 3)
    b_field: np.ndarray  # (n_w', n_cells, n_ch, 3)
    couplings: np.ndarray  # (n_w', n_cells, n_ch, 6, 3)
    couplings_at_omega: np.ndarray  # (n_cells, n_ch, 6, 3)


def internal_amplitudes(mode: ModeSolution, model: MediumModel, omega_prime, hbar: float = 1.0) -> InternalAmplitudes:
    wp = np.asarray(omega_prime, dtype=float)
    if np.any(np.abs(wp - mode.omega) <= 1e-12 * mode.omega):
        raise PoleCollisionError(f"w' grid contains the mode frequency {mode.omega:g}; shift the grid")
    if np.any(wp <= 0):
        raise InvalidInputError("w' grid must be positive")
    grid = mode.grid
    regions = model.region_map(grid).ravel()
    x = mode.fields()  # (cells, 6)
    per_region = {int(i): (region_couplings(model.regions[i], wp), region_couplings(model.regions[i], [mode.omega])[0]) for i in np.unique(regions)}
    n_ch = max((v[0].shape[1] for v in per_region.values()), default=0)
    kw = np.zeros((wp.size, grid.n_cells, n_ch, 6, 3), dtype=complex)
    k0 = np.zeros((grid.n_cells, n_ch, 6, 3), dtype=complex)
    for i, (kk, k_at) in per_region.items():
        sel = regions == i
        kw[:, sel, : kk.shape[1]] = kk[:, None]
        k0[sel, : k_at.shape[0]] = k_at[None]
    s = np.einsum("wclia,ci->wcla", kw.conj(), x)  # L^dagger x
    t = np.einsum("wclia,ci->wcla", kw, x)  # L^T x
    s0 = np.einsum("clia,ci->cla", k0.conj(), x)
    root = np.sqrt(hbar)
    pv_part = s / (root * (wp - mode.omega)[:, None, None, None])
    b_field = t / (root * (wp + mode.omega)[:, None, None, None])
    return InternalAmplitudes(wp, pv_part, mode.z * s0 / root, b_field, kw, k0)
