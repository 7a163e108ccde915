import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magneto_qed.couplings import (
    CouplingSet,
    apply_gauge,
    factorize_gamma_A,
    isotropic_n1,
    partition_n3,
    predicted_cross_n1,
    random_passive,
    random_unitary,
    roundtrip_residual,
)
from magneto_qed.errors import InfeasiblePartitionError, InvalidInputError, NotPassiveError
from magneto_qed.tensors import BlockResponse, cross_bound_check

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(0, 6))
def test_factorization_round_trip(seed, rank):
    m = random_passive(np.random.default_rng(seed), rank)
    k = factorize_gamma_A(m)
    assert roundtrip_residual(k, m) <= 1e-12
    assert k.rank == rank
    assert k.n_channels == -(-rank // 3)


@given(seeds)
def test_gauge_leaves_gamma_unchanged(seed):
    rng = np.random.default_rng(seed)
    k = factorize_gamma_A(random_passive(rng, 6))
    u = [random_unitary(rng) for _ in range(k.n_channels)]
    assert np.allclose(apply_gauge(k, u).gamma_A(), k.gamma_A(), atol=1e-13)


@given(seeds)
def test_random_unitary_is_unitary(seed):
    u = random_unitary(np.random.default_rng(seed))
    assert np.allclose(u @ u.conj().T, np.eye(3), atol=1e-13)


def test_gain_is_rejected():
    with pytest.raises(NotPassiveError):
        factorize_gamma_A(-0.5j * np.eye(6))


def test_zero_loss_has_no_channels():
    k = factorize_gamma_A(np.zeros((6, 6)))
    assert k.rank == 0 and k.n_channels == 0
    assert np.allclose(k.gamma_A(), 0)


def test_scalar_dielectric_factor():
    # Gamma_A = i Im(chi) on ee only: one channel with L^e = sqrt(2 Im chi) I
    m = np.zeros((6, 6), complex)
    m[:3, :3] = 5.0j * np.eye(3)
    k = factorize_gamma_A(m, frequency=1.0)
    assert k.rank == 3 and k.n_channels == 1
    assert np.allclose(k.electric[0] @ k.electric[0].conj().T, 10.0 * np.eye(3))
    assert np.allclose(k.magnetic, 0)


def test_isotropic_n1_sits_on_the_cross_bound():
    k = isotropic_n1(0.2, 0.05, sign=-1)
    rep = cross_bound_check(k.block_response())
    assert rep.ok
    assert np.max(np.abs(np.diag(rep.excess))) <= 1e-12
    em, me = predicted_cross_n1(k)
    assert np.allclose(k.block_response().em, em)
    assert np.allclose(k.block_response().me, me)


def test_isotropic_n1_validation():
    with pytest.raises(NotPassiveError):
        isotropic_n1(-0.1, 0.1)
    with pytest.raises(InvalidInputError):
        isotropic_n1(0.1, 0.1, sign=2)


@given(seeds)
def test_factorized_media_obey_cross_bound(seed):
    m = random_passive(np.random.default_rng(seed))
    assert cross_bound_check(BlockResponse.from_matrix(m), tol=1e-10).ok


def _three_channel(ee, mm, em):
    m = np.zeros((6, 6), complex)
    m[:3, :3] = 1j * ee * np.eye(3)
    m[3:, 3:] = 1j * mm * np.eye(3)
    m[:3, 3:] = em * np.eye(3)
    m[3:, :3] = -em * np.eye(3)
    return m


def test_partition_n3_structure():
    m = _three_channel(5.0, 2.0, np.sqrt(5.0))
    k = partition_n3(m)
    assert roundtrip_residual(k, m) <= 1e-12
    assert k.n_channels == 3
    assert np.allclose(k.magnetic[0], 0) and np.allclose(k.electric[1], 0)
    # the shared channel carries the whole cross block
    assert np.allclose(0.5j * k.electric[2] @ k.magnetic[2].conj().T, m[:3, 3:])


def test_partition_n3_with_electric_share():
    m = _three_channel(5.0, 2.0, np.sqrt(10.0) / 2)
    k = partition_n3(m, electric_share=2.5)
    assert roundtrip_residual(k, m) <= 1e-12
    assert np.allclose(k.electric[2] @ k.electric[2].conj().T, 5.0 * np.eye(3))


def test_partition_n3_infeasible():
    m = _three_channel(5.0, 2.0, 1.0)
    with pytest.raises(InfeasiblePartitionError):
        partition_n3(m, electric_share=0.01)


def test_json_round_trip():
    k = factorize_gamma_A(random_passive(np.random.default_rng(1), 4), frequency=1.5)
    back = CouplingSet.from_dict(json.loads(k.to_json()))
    assert np.array_equal(back.electric, k.electric)
    assert np.array_equal(back.magnetic, k.magnetic)
    assert back.frequency == 1.5 and back.rank == 4


def test_gauge_requires_unitary():
    k = isotropic_n1(0.2, 0.1)
    with pytest.raises(InvalidInputError):
        apply_gauge(k, [2 * np.eye(3)])
