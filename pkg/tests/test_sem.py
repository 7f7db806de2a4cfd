import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagpost.asymptotics import population_covariance
from dagpost.dags import DagStructure, enumerate_dags
from dagpost.errors import InvalidInputError
from dagpost.rng import make_rng
from dagpost.sem import (MIN_WEIGHT, Dataset, GramAccumulator, WeightedSem, assemble,
                         draw_samples, kl_divergence, neumann_inverse, random_weights,
                         reference_truths, sample_dataset, structure_of)

A1, A2 = reference_truths()
S1 = DagStructure.from_string("011000010")
S2 = DagStructure.from_string("000000100")


def test_reference_truths():
    np.testing.assert_array_equal(A1.matrix, [[0, 1.77, -0.35], [0, 0, 0], [0, 0.26, 0]])
    np.testing.assert_array_equal(A2.matrix, [[0, 0, 0], [0, 0, 0], [1.25, 0, 0]])
    assert A1.structure == S1 and A2.structure == S2


def test_assemble():
    np.testing.assert_array_equal(assemble(S2, {(0, 2): 1.25}), A2.matrix)
    assert not assemble(DagStructure.empty(3), {}).any()
    A = assemble(S1, {(1, 0): 1.77, (2, 0): -0.35, (1, 2): 0.26})
    np.testing.assert_array_equal(A, A1.matrix)


@pytest.mark.parametrize("w", [{}, {(0, 2): 1.0, (1, 2): 1.0}, {(0, 2): 0.0}])
def test_assemble_rejects_bad_weights(w):
    with pytest.raises(InvalidInputError):
        assemble(S2, w)


def test_minimality_guard():
    with pytest.raises(InvalidInputError, match="minimality"):
        WeightedSem(S2, {(0, 2): 1e-9})


def test_structure_of():
    assert structure_of(A1.matrix) == S1
    assert structure_of(A2.matrix) == S2
    assert structure_of(np.zeros((3, 3))) == DagStructure.empty(3)
    with pytest.raises(InvalidInputError):
        structure_of(np.array([[0, 0.5], [0.3, 0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 24), st.integers(0, 2 ** 32 - 1))
def test_structure_of_assemble_roundtrip(k, seed):
    s = enumerate_dags(3)[k]
    w = random_weights(s, make_rng(seed))
    assert structure_of(assemble(s, w)) == s


def test_neumann_inverse_exact():
    for sem in (A1, A2):
        np.testing.assert_allclose(neumann_inverse(sem.matrix),
                                   np.linalg.inv(np.eye(3) - sem.matrix), atol=1e-14)


def test_population_determinant():
    for sigma in (0.5, 1.0, 2.0):
        for sem in (A1, A2):
            s = WeightedSem(sem.structure, sem.weights, sigma)
            det = np.linalg.det(population_covariance(s))
            assert abs(det / sigma ** 6 - 1) < 1e-9


def test_sample_covariance_empty_graph():
    data = sample_dataset(WeightedSem.binary(DagStructure.empty(3)), 10_000, make_rng(0))
    assert np.linalg.norm(data.gram / data.n - np.eye(3)) < 0.1


def test_sample_variance_a2():
    data = sample_dataset(A2, 100_000, make_rng(1))
    assert abs(data.gram[2, 2] / data.n / 2.5625 - 1) < 0.03


def test_sample_covariance_a1():
    data = sample_dataset(A1, 100_000, make_rng(2))
    assert np.abs(data.gram / data.n - population_covariance(A1)).max() < 0.05


def test_gram_cache_matches_recomputation():
    data = sample_dataset(A1, 500, make_rng(3))
    g = data.recomputed_gram()
    assert np.linalg.norm(g - data.gram) <= 1e-12 * np.linalg.norm(g)
    np.testing.assert_allclose(data.gram, data.gram.T)
    assert np.linalg.eigvalsh(data.gram).min() > -1e-9


def test_gram_accumulator_matches_batch():
    X = draw_samples(A1, 1000, make_rng(4))[0]
    acc = GramAccumulator(3)
    for chunk in np.array_split(X, 7):
        acc.update(chunk)
    snap = acc.snapshot()
    assert snap.n == 1000 and snap.samples is None
    np.testing.assert_allclose(snap.gram, X.T @ X, rtol=1e-12)
    with pytest.raises(InvalidInputError):
        acc.update(np.zeros((2, 4)))


def test_dataset_requires_data():
    with pytest.raises(InvalidInputError):
        Dataset(None)
    with pytest.raises(InvalidInputError):
        sample_dataset(A1, 0, make_rng(0))


def test_kl_examples():
    assert kl_divergence(A1, A1) == 0.0
    assert kl_divergence(A2.matrix, np.zeros((3, 3))) == pytest.approx(0.78125, abs=1e-14)
    with pytest.raises(InvalidInputError):
        kl_divergence(np.zeros((2, 2)), np.zeros((3, 3)))


def test_binary_kl_minimum_is_half():
    models = enumerate_dags(3)
    for g in models:
        vals = [kl_divergence(g.adj.astype(float), s.adj.astype(float)) for s in models if s != g]
        assert min(vals) == pytest.approx(0.5, abs=1e-12)
        assert min(vals) > 0


def test_binary_kl_zero_iff_equal():
    models = enumerate_dags(3)
    for g in models:
        for s in models:
            kl = kl_divergence(g.adj.astype(float), s.adj.astype(float))
            assert kl >= 0
            assert (kl == 0) == (g == s)


def _log_density(X, A, sigma=1.0):
    R = X - X @ A.T
    return -0.5 * np.sum(R * R, axis=1) / sigma ** 2


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_kl_monte_carlo_oracle(seed):
    rng = make_rng(seed)
    s, t = enumerate_dags(3)[rng.integers(25)], enumerate_dags(3)[rng.integers(25)]
    P = WeightedSem(s, random_weights(s, rng))
    Q = WeightedSem(t, random_weights(t, rng))
    X = draw_samples(P, 100_000, rng)[0]
    # det(I - A) = 1, so the density ratio has no normalizer term.
    llr = _log_density(X, P.matrix) - _log_density(X, Q.matrix)
    se = llr.std() / np.sqrt(len(llr))
    assert abs(llr.mean() - kl_divergence(P, Q)) < 3 * se + 1e-12


def test_random_weights():
    assert random_weights(DagStructure.empty(3), make_rng(0)) == {}
    rng = make_rng(5)
    ws = np.array([list(random_weights(S1, rng).values()) for _ in range(10_000)])
    assert np.all(np.abs(ws.mean(axis=0)) < 0.05)
    assert np.all((ws.var(axis=0) > 0.9) & (ws.var(axis=0) < 1.1))
    assert np.all(np.abs(ws) >= MIN_WEIGHT)


def test_random_weights_resamples_small_draws():
    w = [random_weights(S1, make_rng(k), min_abs=0.8) for k in range(200)]
    assert all(abs(v) >= 0.8 for d in w for v in d.values())


def test_draw_samples_recovers_noise():
    X, eps = draw_samples(A1, 50, make_rng(6))
    np.testing.assert_allclose(X - X @ A1.matrix.T, eps, atol=1e-12)
