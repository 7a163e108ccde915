"""Block-tensor algebra for the 6x6 magneto-electric response.

The response at one (position, frequency) is held as four 3x3 complex
blocks ``ee, em, me, mm``.  Stacked as a 6x6 matrix ``[[ee, em], [me, mm]]``
the block-transpose-conjugate ``(G^{nu sigma})^T*`` placed in slot
``(sigma, nu)`` is exactly the 6x6 conjugate transpose, so the
non-dissipative / dissipative split is the Hermitian / anti-Hermitian split
of the 6x6 matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentSplitError, InvalidInputError

DEFAULT_TOL = 1e-10
BLOCKS = ("ee", "em", "me", "mm")
_SLICES = {
    "ee": (slice(0, 3), slice(0, 3)),
    "em": (slice(0, 3), slice(3, 6)),
    "me": (slice(3, 6), slice(0, 3)),
    "mm": (slice(3, 6), slice(3, 6)),
}


def _as3(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.shape != (3, 3):
        raise InvalidInputError(f"expected a 3x3 tensor, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class BlockResponse:
    """Complex 6x6 response at one (position, frequency)."""

    ee: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), complex))
    em: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), complex))
    me: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), complex))
    mm: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), complex))
    frequency: float = 0.0
    position_id: str | int | None = None

    def __post_init__(self):
        for name in BLOCKS:
            object.__setattr__(self, name, _as3(getattr(self, name)))

    @classmethod
    def from_matrix(cls, m, frequency=0.0, position_id=None) -> "BlockResponse":
        m = np.asarray(m, dtype=complex)
        if m.shape != (6, 6):
            raise InvalidInputError(f"expected a 6x6 matrix, got shape {m.shape}")
        return cls(
            *(m[_SLICES[b]].copy() for b in BLOCKS),
            frequency=frequency,
            position_id=position_id,
        )

    @classmethod
    def zeros(cls, frequency=0.0, position_id=None) -> "BlockResponse":
        return cls(frequency=frequency, position_id=position_id)

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.ee, self.em], [self.me, self.mm]])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.matrix)))

    def __add__(self, other: "BlockResponse") -> "BlockResponse":
        return BlockResponse.from_matrix(
            self.matrix + other.matrix, self.frequency, self.position_id
        )

    def __sub__(self, other: "BlockResponse") -> "BlockResponse":
        return BlockResponse.from_matrix(
            self.matrix - other.matrix, self.frequency, self.position_id
        )

    def conj(self) -> "BlockResponse":
        return BlockResponse.from_matrix(
            self.matrix.conj(), -self.frequency, self.position_id
        )


@dataclass(frozen=True)
class SplitResponse:
    hermitian_part: BlockResponse
    dissipative_part: BlockResponse


def hermitian_part(m: np.ndarray) -> np.ndarray:
    """Non-dissipative part of stacked ``(..., 6, 6)`` responses."""
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def dissipative_part(m: np.ndarray) -> np.ndarray:
    """Dissipative part of stacked ``(..., 6, 6)`` responses."""
    return 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))


def split_block(m: BlockResponse) -> SplitResponse:
    if not m.is_finite():
        raise InvalidInputError("response contains non-finite entries")
    full = m.matrix
    h = BlockResponse.from_matrix(hermitian_part(full), m.frequency, m.position_id)
    a = BlockResponse.from_matrix(dissipative_part(full), m.frequency, m.position_id)
    return SplitResponse(h, a)


def loss_form(m_a: np.ndarray) -> np.ndarray:
    """Hermitian loss matrix ``-2i * M_A`` (stackable)."""
    return -2j * np.asarray(m_a)


def _check_hermitian(h: np.ndarray, tol: float) -> None:
    scale = max(np.linalg.norm(h), 1.0)
    err = np.linalg.norm(h - h.conj().T)
    if err > tol * scale:
        raise InconsistentSplitError(
            f"-2i*M_A is not Hermitian (deviation {err:.3e}, tolerance {tol * scale:.3e})"
        )


def passivity_margin(m_a: BlockResponse, tol: float = DEFAULT_TOL) -> float:
    """Smallest eigenvalue of ``-2i M_A``; negative values flag gain."""
    h = loss_form(m_a.matrix)
    _check_hermitian(h, tol)
    return float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0])


@dataclass(frozen=True)
class CrossBoundReport:
    excess: np.ndarray  # |A^em_ij|^2 - |A^ee_ii||A^mm_jj|
    bound: np.ndarray  # |A^ee_ii||A^mm_jj|
    passed: np.ndarray
    tolerance: float

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def max_relative_excess(self) -> float:
        return float(np.max(self.excess / np.maximum(self.bound, 1.0)))


def cross_bound_check(m_a: BlockResponse, tol: float = DEFAULT_TOL) -> CrossBoundReport:
    """Per-component check of ``|A^em_ij|^2 <= |A^ee_ii| |A^mm_jj|``."""
    ee = np.abs(np.diag(m_a.ee))
    mm = np.abs(np.diag(m_a.mm))
    bound = np.outer(ee, mm)
    excess = np.abs(m_a.em) ** 2 - bound
    passed = excess <= tol * np.maximum(bound, 1.0)
    return CrossBoundReport(excess, bound, passed, tol)
