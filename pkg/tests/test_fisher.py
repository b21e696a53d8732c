import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import poisson_loglik_hessian
from remtomo.fisher import (FisherSpectrum, embed_operator, fisher_matrix, nearly_pure, noisy_amplification_audit,
                            orthogonal_completion_operators, physical_dimension, predicted_infidelity,
                            projective_pair, purify_embed, rank_deficiency)
from remtomo.measurement import MeasurementSetting, apply_depolarizing, pauli6
from remtomo.qcore import eigendecompose, haar_random_pure, haar_random_unitary, hilbert_schmidt_random_batch, \
    pure_to_density

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _settings_povms(n):
    # Pauli-6 split into its 3^n two-outcome-per-qubit settings
    el = pauli6(n).elements
    k = 2**n
    return [list(el[i:i + k]) for i in range(0, len(el), k)]


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_embedding_reproduces_born_rule(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 2
    rho = hilbert_schmidt_random_batch(1, n, rng)[0]
    povm = apply_depolarizing(pauli6(n), float(rng.uniform()))
    emb = purify_embed(rho, povm)
    expect = np.einsum("ij,kji->k", rho, povm.elements).real
    assert np.allclose(emb.probabilities(), expect, atol=1e-12)
    assert abs(emb.v @ emb.v - 1) < 1e-12


def test_embedded_operator_is_symmetric():
    m = pauli6(1).elements[2]
    o = embed_operator(m)
    assert np.allclose(o, o.T)


@pytest.mark.parametrize("n", [1, 2])
def test_fisher_matches_loglik_hessian(n):
    rng = np.random.default_rng(10 + n)
    rho = hilbert_schmidt_random_batch(1, n, rng)[0]
    groups = _settings_povms(n)
    N = 1000.0
    spec = fisher_matrix(rho, [pauli6(n)], N=N)
    # Pauli-6 elements already carry the 3^-n factor, so each group enters with unit weight
    hess = poisson_loglik_hessian(rho, groups, np.ones(len(groups)), N)
    rel = np.linalg.norm(spec.matrix - hess) / np.linalg.norm(hess)
    assert rel < 1e-5


def test_normalization_direction_has_largest_value():
    rng = np.random.default_rng(3)
    rho = hilbert_schmidt_random_batch(1, 1, rng)[0]
    N = 50.0
    spec = fisher_matrix(rho, [pauli6(1)], N=N)
    v = purify_embed(rho, pauli6(1)).v
    assert np.allclose(spec.matrix @ v, 4 * N * v)
    assert abs(spec.singular_values[0] - 4 * N) < 1e-9


def test_fisher_weights_validated():
    with pytest.raises(ValueError):
        fisher_matrix(np.eye(2) / 2, [pauli6(1)], weights=[0.5])


def test_predicted_infidelity_example():
    N = 100.0
    spec = FisherSpectrum(np.zeros((8, 8)), np.array([4 * N, N, N, N, 0, 0, 0, 0]), N)
    total, vanishing = predicted_infidelity(spec)
    assert abs(total - 3 / N) < 1e-15
    assert vanishing == 0


def test_predicted_infidelity_rejects_large_nu():
    spec = FisherSpectrum(np.zeros((2, 2)), np.array([1.0, 1.0]), 1.0)
    with pytest.raises(ValueError):
        predicted_infidelity(spec, nu=2)


def test_rank_deficiency_values():
    assert rank_deficiency(1, 1) == 1
    assert rank_deficiency(2, 1) == 9
    assert rank_deficiency(1, 2) == 0
    assert physical_dimension(2) == 15
    with pytest.raises(ValueError):
        rank_deficiency(1, 3)


@pytest.mark.parametrize("n,expect", [(1, 1), (2, 9)])
def test_vanishing_count_for_pure_targets(n, expect):
    rho = pure_to_density(haar_random_pure(n, np.random.default_rng(n)))
    spec = fisher_matrix(rho, [pauli6(n)], N=1.0)
    assert predicted_infidelity(spec)[1] == expect == rank_deficiency(n, 1)


def test_completion_restores_full_rank():
    rng = np.random.default_rng(4)
    rho = nearly_pure(pure_to_density(haar_random_pure(2, rng)), 1e-10)
    _, vecs = eigendecompose(rho)
    extra = orthogonal_completion_operators(vecs, 1)
    assert len(extra) == 9
    povms = [pauli6(2)] + [projective_pair(op) for op in extra]
    spec = fisher_matrix(rho, povms, N=1.0)
    assert predicted_infidelity(spec)[1] == 0


def test_completion_projectors_live_on_complement():
    rng = np.random.default_rng(5)
    u = haar_random_unitary(4, rng)
    vecs = u.T
    ops = orthogonal_completion_operators(vecs, 2)
    assert len(ops) == 4
    for op in ops:
        assert np.allclose(op @ vecs[0], 0) and np.allclose(op @ vecs[1], 0)
        assert abs(np.trace(op) - 1) < 1e-12


def test_nearly_pure_lifts_small_eigenvalues():
    rho = nearly_pure(pure_to_density(np.array([1, 0], dtype=complex)), 1e-6)
    vals = np.linalg.eigvalsh(rho)
    assert vals.min() > 0
    assert abs(np.trace(rho) - 1) < 1e-15


def test_audit_finds_no_violations():
    rng = np.random.default_rng(6)

    def draw_setting(r):
        return MeasurementSetting((haar_random_unitary(2, r),))

    def draw_state(r):
        return pure_to_density(haar_random_pure(1, r))

    report = noisy_amplification_audit(draw_state, draw_setting, 0.15, 1000, rng, keep_rows=True)
    assert report.violations == 0
    assert report.n_checked == 2000
    assert report.max_amplification <= report.bound_amplification + 1e-9
    assert abs(report.bound_amplification - 2 / 0.15) < 1e-9
    assert len(report.lines()) == 2000
    free = noisy_amplification_audit(draw_state, draw_setting, 0.0, 10, rng)
    assert free.unbounded


def test_full_depolarizing_sits_on_the_bound():
    rng = np.random.default_rng(7)
    report = noisy_amplification_audit(lambda r: pure_to_density(haar_random_pure(1, r)),
                                       lambda r: MeasurementSetting((haar_random_unitary(2, r),)), 1.0, 50, rng,
                                       keep_rows=True)
    assert report.violations == 0
    assert all(abs(row[2] - row[3]) < 1e-12 for row in report.rows)
