import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from remtomo.qcore import (PAULI_Z, bloch_vector, bures_distance, check_density_matrix, eigendecompose, fidelity,
                           fidelity_batch, from_bloch, haar_random_pure, haar_random_unitary,
                           hilbert_schmidt_random_mixed, infidelity, is_density_matrix, kron_all, pure_to_density,
                           reduced_state)
from remtomo.qcore import _fidelity_general, _fidelity_qubit

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
RHO0 = pure_to_density(KET0)
RHO1 = pure_to_density(KET1)
MIXED = np.eye(2) / 2

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_haar_pure_is_normalized():
    v = haar_random_pure(1, np.random.default_rng(0))
    assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_haar_pure_mean_bloch_vector_near_origin():
    rng = np.random.default_rng(1)
    mean = np.mean([bloch_vector(pure_to_density(haar_random_pure(1, rng))) for _ in range(10_000)], axis=0)
    assert np.linalg.norm(mean) < 0.05


def test_haar_pure_two_qubit_zz_mean():
    rng = np.random.default_rng(2)
    zz = np.kron(PAULI_Z, PAULI_Z)
    vals = [np.real(np.vdot(v, zz @ v)) for v in (haar_random_pure(2, rng) for _ in range(10_000))]
    assert abs(np.mean(vals)) < 0.05


def test_haar_pure_overlap_is_uniform():
    rng = np.random.default_rng(3)
    x = np.array([abs(haar_random_pure(1, rng)[0]) ** 2 for _ in range(100_000)])
    assert stats.kstest(x, "uniform").statistic < 0.01


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_random_states_reject_bad_qubit_count(bad):
    with pytest.raises(ValueError):
        haar_random_pure(bad, np.random.default_rng(0))
    with pytest.raises(ValueError):
        hilbert_schmidt_random_mixed(bad, np.random.default_rng(0))


def test_hs_mixed_is_valid():
    rng = np.random.default_rng(4)
    assert is_density_matrix(hilbert_schmidt_random_mixed(1, rng))
    rho = hilbert_schmidt_random_mixed(2, rng)
    ev = np.linalg.eigvalsh(rho)
    assert ev.min() >= 0 and abs(ev.sum() - 1) < 1e-12


def test_hs_mean_purity_qubit():
    # HS measure at d=2 is uniform in the Bloch ball: E[r^2] = 3/5, purity (1 + r^2)/2 = 0.8.
    # The Ginibre construction used here has mean purity 2d/(d^2 + 1) = 0.8 as well; the
    # Monte-Carlo value below is the independent check.
    rng = np.random.default_rng(5)
    g = rng.normal(size=(100_000, 2, 2)) + 1j * rng.normal(size=(100_000, 2, 2))
    rho = g @ np.conj(np.swapaxes(g, 1, 2))
    rho /= np.einsum("nii->n", rho).real[:, None, None]
    mc = np.mean(np.einsum("nij,nji->n", rho, rho).real)
    ours = np.mean([np.trace(r @ r).real for r in (hilbert_schmidt_random_mixed(1, rng) for _ in range(100_000))])
    assert abs(ours - mc) < 0.01


def test_fidelity_examples():
    rng = np.random.default_rng(6)
    rho = hilbert_schmidt_random_mixed(1, rng)
    assert abs(fidelity(rho, rho) - 1) < 1e-9
    assert abs(fidelity(RHO0, MIXED) - 0.5) < 1e-12
    assert fidelity(RHO0, RHO1) == 0


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        fidelity(RHO0, np.eye(4) / 4)


def test_infidelity_examples():
    assert infidelity(RHO0, RHO0) < 1e-12
    assert abs(infidelity(RHO0, MIXED) - 0.5) < 1e-12
    p = 0.2
    assert abs(infidelity(RHO0, (1 - p) * RHO0 + p * MIXED) - 0.1) < 1e-12


def test_bures_examples():
    assert bures_distance(MIXED, MIXED) < 1e-7
    assert abs(bures_distance(RHO0, RHO1) - 2) < 1e-12
    assert abs(bures_distance(RHO0, MIXED) - 0.5857864376269049) < 1e-12


def test_eigendecompose_examples():
    vals, _ = eigendecompose(MIXED)
    assert np.allclose(vals, [0.5, 0.5])
    vals, vecs = eigendecompose(RHO0)
    assert np.allclose(vals, [1, 0])
    assert abs(abs(vecs[0][0]) - 1) < 1e-12
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    vals, _ = eigendecompose(0.7 * pure_to_density(plus) + 0.3 * pure_to_density(minus))
    assert np.allclose(vals, [0.7, 0.3])


def test_eigendecompose_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eigendecompose(np.array([[1, 1], [0, 0]]))


def test_check_density_matrix_errors():
    for bad in (np.eye(2), np.array([[1, 1], [0, 0]]), np.diag([1.5, -0.5]), np.ones(3)):
        with pytest.raises(ValueError):
            check_density_matrix(bad)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_fidelity_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    for n in (1, 2):
        a, b = hilbert_schmidt_random_mixed(n, rng), hilbert_schmidt_random_mixed(n, rng)
        f = fidelity(a, b)
        assert 0 <= f <= 1
        assert abs(f - fidelity(b, a)) < 1e-9


def test_fidelity_formulas_agree_on_qubits():
    rng = np.random.default_rng(7)
    for i in range(1000):
        a = hilbert_schmidt_random_mixed(1, rng)
        b = pure_to_density(haar_random_pure(1, rng)) if i % 2 else hilbert_schmidt_random_mixed(1, rng)
        general = _fidelity_general(a, b)
        # sqrtm of a rank-deficient product turns eps roundoff into ~sqrt(eps)
        assert abs(general - _fidelity_qubit(a, b)) < 1e-7
        if i % 2:
            assert abs(general - np.trace(a @ b).real) < 1e-7


def test_fidelity_batch_matches_scalar():
    rng = np.random.default_rng(8)
    for n in (1, 2):
        rhos = np.array([hilbert_schmidt_random_mixed(n, rng) for _ in range(10)] +
                        [pure_to_density(haar_random_pure(n, rng))])
        for sigma in (hilbert_schmidt_random_mixed(n, rng), pure_to_density(haar_random_pure(n, rng))):
            expect = [fidelity(r, sigma) for r in rhos]
            assert np.allclose(fidelity_batch(rhos, sigma), expect, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_eigendecompose_reconstructs(seed):
    rho = hilbert_schmidt_random_mixed(2, np.random.default_rng(seed))
    vals, vecs = eigendecompose(rho)
    assert np.all(np.diff(vals) <= 0)
    rebuilt = sum(l * np.outer(v, v.conj()) for l, v in zip(vals, vecs))
    assert np.max(np.abs(rebuilt - rho)) < 1e-9


def test_haar_unitary_is_unitary():
    u = haar_random_unitary(4, np.random.default_rng(9))
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-10)


def test_reduced_state_of_product():
    rng = np.random.default_rng(10)
    a, b = hilbert_schmidt_random_mixed(1, rng), hilbert_schmidt_random_mixed(1, rng)
    ab = kron_all(a, b)
    assert np.allclose(reduced_state(ab, 0, 2), a)
    assert np.allclose(reduced_state(ab, 1, 2), b)


def test_bloch_round_trip():
    r = np.array([0.1, -0.4, 0.3])
    assert np.allclose(bloch_vector(from_bloch(r)), r)
