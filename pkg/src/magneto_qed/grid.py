"""Periodic spectral grid with a transverse plane-wave basis."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import pv
from .errors import GridError


def _cross_matrix(v):
    """Stacked ``[v]_x`` so that ``[v]_x @ u = v x u``."""
    v = np.asarray(v)
    z = np.zeros(v.shape[:-1])
    return np.stack(
        [
            np.stack([z, -v[..., 2], v[..., 1]], -1),
            np.stack([v[..., 2], z, -v[..., 0]], -1),
            np.stack([-v[..., 1], v[..., 0], z], -1),
        ],
        -2,
    )


@dataclass(frozen=True)
class SpectralGrid:
    """Periodic box with ``points`` cells per axis and a positive frequency grid.

    Fields are expanded as ``F(r) = sum_k F(k) exp(i k.r)`` over the FFT
    wavevectors; ``k = 0`` carries no transverse dynamics and is dropped.
    Each remaining ``k`` gets two transverse unit vectors ``e1, e2`` with
    ``e1 x e2 = k/|k|``.
    """

    box: tuple = (1.0, 1.0, 1.0)
    points: tuple = (1, 1, 1)
    omega: np.ndarray = field(default_factory=lambda: pv.log_grid())

    def __post_init__(self):
        box = tuple(float(x) for x in self.box)
        pts = tuple(int(x) for x in self.points)
        if len(box) != 3 or len(pts) != 3:
            raise GridError("box and points need three entries")
        if min(box) <= 0 or min(pts) < 1:
            raise GridError("box lengths and point counts must be positive")
        om = np.asarray(self.omega, dtype=float)
        if om.ndim != 1 or np.any(om <= 0) or np.any(np.diff(om) <= 0):
            raise GridError("frequency grid must be positive and increasing")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "omega", om)

    @classmethod
    def line(cls, length: float, n: int, omega=None) -> "SpectralGrid":
        """One-dimensional grid along x."""
        return cls((length, 1.0, 1.0), (n, 1, 1), pv.log_grid() if omega is None else omega)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.points))

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    @property
    def cell_volume(self) -> float:
        return self.volume / self.n_cells

    @cached_property
    def index_vectors(self) -> np.ndarray:
        """Integer FFT index per flattened ``fftn`` entry, shape ``(n_cells, 3)``."""
        axes = [np.fft.fftfreq(n, 1.0 / n).round().astype(int) for n in self.points]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def wavevectors(self) -> np.ndarray:
        return self.index_vectors * (2 * np.pi / np.asarray(self.box))

    @cached_property
    def active(self) -> np.ndarray:
        """Flat FFT indices of the non-zero wavevectors."""
        return np.nonzero(np.any(self.index_vectors != 0, axis=1))[0]

    @property
    def n_k(self) -> int:
        return self.active.size

    @property
    def dim(self) -> int:
        """Transverse basis size: two polarizations for each of D and B."""
        return 4 * self.n_k

    @cached_property
    def polarizations(self) -> np.ndarray:
        """``(n_k, 3, 2)`` columns ``e1, e2`` for each active wavevector."""
        k = self.wavevectors[self.active]
        khat = k / np.linalg.norm(k, axis=1, keepdims=True)
        ref = np.where(np.abs(khat[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
        e1 = np.cross(ref, khat)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(khat, e1)
        return np.stack([e1, e2], axis=-1)

    @cached_property
    def embedding(self) -> np.ndarray:
        """``T_k`` of shape ``(n_k, 6, 4)`` mapping ``(d1, d2, b1, b2)`` to ``[D; B]``."""
        e = self.polarizations
        t = np.zeros((self.n_k, 6, 4))
        t[:, :3, :2] = e
        t[:, 3:, 2:] = e
        return t

    @cached_property
    def curl6(self) -> np.ndarray:
        """Six-vector curl ``[[0, -ik x], [ik x, 0]]`` per active wavevector."""
        ikx = 1j * _cross_matrix(self.wavevectors[self.active])
        out = np.zeros((self.n_k, 6, 6), dtype=complex)
        out[:, :3, 3:] = -ikx
        out[:, 3:, :3] = ikx
        return out

    @cached_property
    def difference_index(self) -> np.ndarray:
        """Flat FFT index of ``k - k'`` for every active pair, shape ``(n_k, n_k)``."""
        m = self.index_vectors[self.active]
        diff = (m[:, None, :] - m[None, :, :]) % np.asarray(self.points)
        return np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), self.points)

    def cell_positions(self) -> np.ndarray:
        axes = [np.arange(n) * (L / n) for n, L in zip(self.points, self.box)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    # ------------------------------------------------------------------
    # coefficient <-> real-space maps

    def to_spectral6(self, coeffs) -> np.ndarray:
        """Transverse coefficients ``(..., dim)`` to six-vector spectra ``(..., n_cells, 6)``."""
        c = np.asarray(coeffs).reshape(np.shape(coeffs)[:-1] + (self.n_k, 4))
        full = np.zeros(c.shape[:-2] + (self.n_cells, 6), dtype=complex)
        full[..., self.active, :] = np.einsum("kia,...ka->...ki", self.embedding, c)
        return full

    def to_real(self, spectra6) -> np.ndarray:
        """``F(r_j) = sum_k F(k) exp(i k.r_j)`` for spectra ``(..., n_cells, 6)``."""
        s = np.asarray(spectra6)
        lead = s.shape[:-2]
        grid = s.reshape(lead + tuple(self.points) + (6,))
        axes = tuple(range(len(lead), len(lead) + 3))
        out = np.fft.ifftn(grid, axes=axes) * self.n_cells
        return out.reshape(lead + (self.n_cells, 6))

    def to_fourier(self, fields6) -> np.ndarray:
        """Inverse of :meth:`to_real`."""
        f = np.asarray(fields6)
        lead = f.shape[:-2]
        grid = f.reshape(lead + tuple(self.points) + (6,))
        axes = tuple(range(len(lead), len(lead) + 3))
        out = np.fft.fftn(grid, axes=axes) / self.n_cells
        return out.reshape(lead + (self.n_cells, 6))

    def coefficients_to_fields(self, coeffs) -> np.ndarray:
        return self.to_real(self.to_spectral6(coeffs))

    def curl_real(self, fields3) -> np.ndarray:
        """Spectral curl of a real-space three-vector field ``(n_cells, 3)``."""
        f = np.asarray(fields3)
        grid = f.reshape(tuple(self.points) + (3,))
        spec = np.fft.fftn(grid, axes=(0, 1, 2)).reshape(self.n_cells, 3)
        out = 1j * np.cross(self.wavevectors, spec)
        return np.fft.ifftn(out.reshape(tuple(self.points) + (3,)), axes=(0, 1, 2)).reshape(self.n_cells, 3)
