"""Factorization of dissipative responses into coupling tensors.

The dissipative part is ``M_A = (i/2) sum_lambda K_lambda K_lambda^dagger``
with ``K_lambda = [L^e_lambda; L^m_lambda]`` a 6x3 block, so the Hermitian
loss form ``-2i M_A = K K^dagger`` is positive semidefinite and any of its
square-root factorizations gives a valid coupling set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePartitionError, InvalidInputError, NotPassiveError
from .tensors import BlockResponse, loss_form

RANK_TOL = 1e-10


@dataclass(frozen=True)
class CouplingSet:
    """Coupling channels at one frequency: ``electric[l]``, ``magnetic[l]`` are 3x3."""

    electric: np.ndarray  # (n_channels, 3, 3)
    magnetic: np.ndarray  # (n_channels, 3, 3)
    rank: int = 0
    frequency: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.electric, dtype=complex).reshape(-1, 3, 3)
        m = np.asarray(self.magnetic, dtype=complex).reshape(-1, 3, 3)
        if e.shape != m.shape:
            raise InvalidInputError("electric and magnetic channel stacks must match")
        object.__setattr__(self, "electric", e)
        object.__setattr__(self, "magnetic", m)

    @property
    def n_channels(self) -> int:
        return self.electric.shape[0]

    @property
    def stacked(self) -> np.ndarray:
        """``K_lambda`` blocks of shape ``(n_channels, 6, 3)``."""
        return np.concatenate([self.electric, self.magnetic], axis=1)

    def gamma_A(self) -> np.ndarray:
        """``(i/2) sum K K^dagger`` as a 6x6 matrix."""
        k = self.stacked
        return 0.5j * np.einsum("lia,lja->ij", k, k.conj())

    def block_response(self) -> BlockResponse:
        return BlockResponse.from_matrix(self.gamma_A(), frequency=self.frequency)

    def to_dict(self) -> dict:
        pair = lambda a: [[[float(z.real), float(z.imag)] for z in row] for row in a]
        return {
            "frequency": self.frequency,
            "rank": self.rank,
            "channels": [
                {"electric": pair(e), "magnetic": pair(m)} for e, m in zip(self.electric, self.magnetic)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CouplingSet":
        unpair = lambda a: np.array([[complex(*z) for z in row] for row in a])
        ch = data["channels"]
        e = np.array([unpair(c["electric"]) for c in ch]) if ch else np.zeros((0, 3, 3))
        m = np.array([unpair(c["magnetic"]) for c in ch]) if ch else np.zeros((0, 3, 3))
        return cls(e, m, data.get("rank", 0), data.get("frequency", 0.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_matrix(m_a) -> np.ndarray:
    if isinstance(m_a, BlockResponse):
        return m_a.matrix
    m = np.asarray(m_a, dtype=complex)
    if m.shape != (6, 6):
        raise InvalidInputError(f"expected a 6x6 dissipative part, got {m.shape}")
    return m


def _fix_phase(cols: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude entry real and positive."""
    if cols.size == 0:
        return cols
    idx = np.argmax(np.abs(cols), axis=0)
    lead = cols[idx, np.arange(cols.shape[1])]
    phase = np.where(np.abs(lead) > 0, np.conj(lead) / np.maximum(np.abs(lead), 1e-300), 1.0)
    return cols * phase


def _columns_to_set(cols: np.ndarray, rank: int, frequency: float) -> CouplingSet:
    n_ch = -(-cols.shape[1] // 3)
    padded = np.zeros((6, 3 * n_ch), dtype=complex)
    padded[:, : cols.shape[1]] = cols
    blocks = padded.reshape(6, n_ch, 3).transpose(1, 0, 2)  # (n_ch, 6, 3)
    return CouplingSet(blocks[:, :3], blocks[:, 3:], rank, frequency)


def factorize_gamma_A(m_a, rank_tol: float = RANK_TOL, frequency: float | None = None) -> CouplingSet:
    """Coupling channels reproducing ``m_a``.

    Eigenvalues of ``-2i M_A`` below ``rank_tol * max eigenvalue`` are
    dropped; negative ones beyond that threshold mean the medium has gain.
    """
    m = _as_matrix(m_a)
    if frequency is None:
        frequency = m_a.frequency if isinstance(m_a, BlockResponse) else 0.0
    h = loss_form(m)
    h = 0.5 * (h + h.conj().T)
    s, v = np.linalg.eigh(h)
    top = max(np.max(np.abs(s)), 0.0)
    cut = rank_tol * top
    if s[0] < -cut:
        raise NotPassiveError(
            f"loss form has negative eigenvalue {s[0]:.3e} (threshold {-cut:.3e}); medium has gain"
        )
    keep = s > cut
    order = np.argsort(-s[keep], kind="stable")
    cols = v[:, keep][:, order] * np.sqrt(s[keep][order])
    cols = _fix_phase(cols)
    return _columns_to_set(cols, int(np.count_nonzero(keep)), frequency)


def roundtrip_residual(k: CouplingSet, m_a) -> float:
    m = _as_matrix(m_a)
    diff = np.linalg.norm(k.gamma_A() - m)
    scale = np.linalg.norm(m)
    return float(diff / scale) if scale > 0 else float(diff)


def isotropic_n1(im_ee: float, im_mm: float, sign: int = 1, frequency: float = 0.0) -> CouplingSet:
    """Single channel ``L^e = sqrt(2 Im ee) I``, ``L^m = sign i sqrt(2 Im mm) I``."""
    if im_ee < 0 or im_mm < 0:
        raise NotPassiveError("isotropic losses must be non-negative")
    if sign not in (1, -1):
        raise InvalidInputError("sign must be +1 or -1")
    eye = np.eye(3)
    le = np.sqrt(2 * im_ee) * eye
    lm = sign * 1j * np.sqrt(2 * im_mm) * eye
    rank = 3 if (im_ee > 0 or im_mm > 0) else 0
    return CouplingSet(le[None], lm[None], rank, frequency)


def predicted_cross_n1(k: CouplingSet):
    """Cross blocks ``(Gamma_A^em, Gamma_A^me)`` implied by a single isotropic channel."""
    if k.n_channels != 1:
        raise InvalidInputError("expected a single isotropic channel")
    le, lm = k.electric[0], k.magnetic[0]
    a = np.real(le[0, 0]) ** 2 / 2
    b = np.abs(lm[0, 0]) ** 2 / 2
    sign = 1.0 if np.imag(lm[0, 0]) >= 0 else -1.0
    em = sign * np.sqrt(a * b) * np.eye(3)
    return em.astype(complex), (-em).astype(complex)


def _psd_root(h: np.ndarray, tol: float, what: str) -> np.ndarray:
    """Square-root factor ``C`` with ``C C^dagger = h`` (3x3)."""
    h = 0.5 * (h + h.conj().T)
    s, v = np.linalg.eigh(h)
    scale = max(np.max(np.abs(s)), 1.0)
    if s[0] < -tol * scale:
        raise InfeasiblePartitionError(f"{what} block is not positive semidefinite (eigenvalue {s[0]:.3e})")
    s = np.clip(s, 0.0, None)
    return _fix_phase(v * np.sqrt(s))


def _hermitian_root(g: np.ndarray) -> np.ndarray:
    s, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    return (v * np.sqrt(np.clip(s, 0.0, None))) @ v.conj().T


def partition_n3(m_a, electric_share=None, tol: float = RANK_TOL, frequency: float = 0.0) -> CouplingSet:
    """Three-channel structure: pure electric, pure magnetic, and a shared channel.

    The shared channel carries the whole cross block
    ``Gamma_A^em = (i/2) L^e_3 (L^m_3)^dagger``.  ``electric_share`` fixes the
    part of ``Im Gamma_A^ee`` assigned to it (a scalar multiple of the
    identity or a Hermitian 3x3 matrix).  Without it the cross block is split
    by its polar decomposition, weighted by the relative size of the electric
    and magnetic losses.  Channels 1 and 2 take whatever ee and mm loss is
    left, which must stay positive semidefinite.
    """
    m = _as_matrix(m_a)
    ee, em, mm = m[:3, :3], m[:3, 3:], m[3:, 3:]
    h_ee = -2j * ee
    h_mm = -2j * mm
    c = -2j * em  # = L^e_3 (L^m_3)^dagger
    if np.linalg.norm(c) <= tol * max(np.linalg.norm(m), 1e-300):
        le3 = np.zeros((3, 3), complex)
        lm3 = np.zeros((3, 3), complex)
    elif electric_share is None:
        u, sv, vh = np.linalg.svd(c)
        te, tm = np.trace(h_ee).real, np.trace(h_mm).real
        if te <= 0 or tm <= 0:
            raise InfeasiblePartitionError("cross coupling without electric and magnetic loss")
        alpha = (te / tm) ** 0.25
        root = np.sqrt(sv)
        le3 = alpha * (u * root) @ u.conj().T
        lm3 = ((u * root) @ vh).conj().T / alpha
    else:
        share = np.asarray(electric_share, dtype=complex)
        share = share * np.eye(3) if share.ndim == 0 else share
        le3 = _hermitian_root(2.0 * share)
        lm3 = (np.linalg.pinv(le3) @ c).conj().T
        if np.linalg.norm(le3 @ lm3.conj().T - c) > 1e-10 * np.linalg.norm(c):
            raise InfeasiblePartitionError("cross block is not reachable from the assigned electric share")
    le1 = _psd_root(h_ee - le3 @ le3.conj().T, 1e-10, "residual electric")
    lm2 = _psd_root(h_mm - lm3 @ lm3.conj().T, 1e-10, "residual magnetic")
    z = np.zeros((3, 3), complex)
    h = loss_form(m)
    s = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
    rank = int(np.count_nonzero(s > RANK_TOL * max(np.abs(s).max(), 1e-300)))
    return CouplingSet(np.stack([le1, z, le3]), np.stack([z, lm2, lm3]), rank, frequency)


def apply_gauge(k: CouplingSet, unitaries) -> CouplingSet:
    """``L^s_lambda -> L^s_lambda U_lambda^dagger``; leaves ``Gamma_A`` unchanged."""
    u = np.asarray(unitaries, dtype=complex).reshape(-1, 3, 3)
    if u.shape[0] == 1 and k.n_channels > 1:
        u = np.broadcast_to(u, (k.n_channels, 3, 3))
    if u.shape[0] != k.n_channels:
        raise InvalidInputError("need one unitary per channel")
    eye = np.eye(3)
    for ul in u:
        if not np.allclose(ul @ ul.conj().T, eye, atol=1e-12):
            raise InvalidInputError("gauge matrices must be unitary")
    udag = np.conj(np.swapaxes(u, -1, -2))
    return CouplingSet(k.electric @ udag, k.magnetic @ udag, k.rank, k.frequency)


def random_unitary(rng: np.random.Generator, n: int = 3) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_passive(rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random dissipative part ``(i/2) K K^dagger`` with the given rank."""
    rank = int(rng.integers(0, 7)) if rank is None else rank
    k = rng.standard_normal((6, rank)) + 1j * rng.standard_normal((6, rank))
    return 0.5j * k @ k.conj().T
