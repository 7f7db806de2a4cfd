import numpy as np
import pytest

from dagpost import mcmc
from dagpost.dags import DagStructure, enumerate_dags, is_acyclic, neighbors
from dagpost.errors import InvalidInputError, NumericalError
from dagpost.mcmc import ChainConfig, mh_step, propose, run_chain
from dagpost.posterior import PriorConfig, absence_matrix, log_unnorm_posterior, posterior_table
from dagpost.rng import make_rng
from dagpost.sem import Dataset, WeightedSem, reference_truths, sample_dataset

A1, A2 = reference_truths()
UNIT = PriorConfig()
S1 = A1.structure


@pytest.fixture(scope="module")
def small_data():
    return sample_dataset(A1, 10, make_rng(21))


def test_config_defaults_and_validation():
    cfg = ChainConfig(1000)
    assert cfg.burn_in == 100 and cfg.thin == 1 and cfg.init == "empty"
    for bad in (dict(iterations=10, burn_in=10), dict(iterations=0), dict(iterations=10, thin=0),
                dict(iterations=10, init="full")):
        with pytest.raises(InvalidInputError):
            ChainConfig(**bad)


def test_propose_uniform_from_empty():
    rng = make_rng(0)
    empty = DagStructure.empty(3)
    counts = {}
    for _ in range(10_000):
        cand, fwd, rev = propose(empty, rng)
        assert fwd == 6 and rev == len(neighbors(cand))
        counts[cand] = counts.get(cand, 0) + 1
    assert len(counts) == 6
    assert all(abs(c / 10_000 - 1 / 6) < 0.02 for c in counts.values())


def test_propose_from_maximal():
    rng = make_rng(1)
    seen = {propose(S1, rng)[0] for _ in range(200)}
    assert seen == set(neighbors(S1)) and len(seen) == 3


def test_mh_step_rules():
    rng = make_rng(2)
    a, b = DagStructure.empty(2), DagStructure.from_edges(2, [(0, 1)])
    flat = lambda s: 0.0
    assert all(mh_step(a, b, (2, 2), flat, rng)[1] for _ in range(500))
    with pytest.raises(NumericalError):
        mh_step(a, b, (2, 1), lambda s: np.nan, rng)
    with pytest.raises(NumericalError):
        mh_step(a, b, (2, 1), lambda s: -np.inf if s == b else 0.0, rng)


def test_mh_step_acceptance_probability():
    rng = make_rng(3)
    a, b = DagStructure.empty(2), DagStructure.from_edges(2, [(0, 1)])
    target = lambda s: np.log(0.5) if s == b else 0.0
    acc = np.mean([mh_step(a, b, (2, 1), target, rng)[1] for _ in range(20_000)])
    assert abs(acc - 1.0) < 1e-12  # 0.5 * 2 / 1 >= 1
    acc = np.mean([mh_step(a, b, (1, 2), target, rng)[1] for _ in range(20_000)])
    assert abs(acc - 0.25) < 0.015


def test_trace_length(small_data):
    assert len(run_chain(small_data, UNIT, ChainConfig(11, 10))) == 1
    assert len(run_chain(small_data, UNIT, ChainConfig(100, 10, thin=7))) == len(range(0, 90, 7))


def test_determinism(small_data):
    cfg = ChainConfig(5000, seed=42)
    t1, t2 = run_chain(small_data, UNIT, cfg), run_chain(small_data, UNIT, cfg)
    np.testing.assert_array_equal(t1.states, t2.states)
    np.testing.assert_array_equal(t1.log_scores, t2.log_scores)
    assert t1.acceptance_rate == t2.acceptance_rate
    t3 = run_chain(small_data, UNIT, ChainConfig(5000, seed=43))
    assert not np.array_equal(t1.states, t3.states)


def test_trace_structure(small_data):
    tr = run_chain(small_data, UNIT, ChainConfig(3000, 0, seed=5))
    visited = tr.visited
    assert all(is_acyclic(s.adj) for s in visited)
    for prev, cur in zip(visited, visited[1:]):
        assert int(np.abs(prev.adj.astype(int) - cur.adj).sum()) <= 1
    np.testing.assert_allclose(tr.absence_freq, tr.absence_freq.T)
    assert not np.diag(tr.absence_freq).any()
    for s, v in list(zip(visited, tr.log_scores))[::97]:
        assert v == pytest.approx(log_unnorm_posterior(s, small_data, UNIT), abs=1e-9)


def test_engines_agree(small_data):
    cfg = ChainConfig(4000, 100, thin=3, seed=9, init=S1)
    k = run_chain(small_data, UNIT, cfg, engine="kernel")
    p = run_chain(small_data, UNIT, cfg, engine="python")
    np.testing.assert_array_equal(k.states, p.states)
    np.testing.assert_array_equal(k.absence_freq, p.absence_freq)
    assert k.acceptance_rate == p.acceptance_rate


def test_raw_scoring_follows_same_path(small_data):
    cfg = ChainConfig(300, 10, seed=4)
    raw = run_chain(small_data, UNIT, cfg, scoring="raw")
    gram = run_chain(small_data, UNIT, cfg)
    np.testing.assert_array_equal(raw.states, gram.states)
    np.testing.assert_allclose(raw.log_scores, gram.log_scores, atol=1e-9)
    with pytest.raises(InvalidInputError):
        run_chain(small_data, UNIT, cfg, scoring="raw", engine="kernel")


def test_exact_on_enumerable_instance(small_data):
    tab = posterior_table(small_data, UNIT)
    tr = run_chain(small_data, UNIT, ChainConfig(100_000, 10_000, seed=6))
    freq = tr.model_frequencies(tab.models)
    assert abs(freq.sum() - 1) < 1e-12
    assert 0.5 * np.abs(freq - tab.probs).sum() < 0.03
    assert np.abs(tr.absence_freq - absence_matrix(tab)).max() < 0.02


def test_hastings_correction_needed():
    # Flat target: the exact posterior is uniform over the 25 DAGs, while
    # neighbourhood sizes range from 3 to 6.
    flat = Dataset.from_gram(np.zeros((3, 3)), 0)
    models = enumerate_dags(3)
    uniform = np.full(25, 1 / 25)
    cfg = ChainConfig(100_000, 1000, seed=7)
    tv = {}
    for h in (True, False):
        f = run_chain(flat, UNIT, cfg, hastings=h).model_frequencies(models)
        tv[h] = 0.5 * np.abs(f - uniform).sum()
    assert tv[True] < 0.02
    assert tv[False] > 2 * tv[True] and tv[False] > 0.03


def test_large_d_smoke():
    data = sample_dataset(WeightedSem.binary(DagStructure.empty(7)), 10, make_rng(8))
    tr = run_chain(data, UNIT, ChainConfig(100_000, seed=8))
    assert 0.05 < tr.acceptance_rate < 0.95
    assert tr.d == 7 and all(is_acyclic(s.adj) for s in tr.visited[::5000])


def test_python_engine_without_table(monkeypatch):
    data = sample_dataset(WeightedSem.binary(DagStructure.empty(4)), 10, make_rng(9))
    cfg = ChainConfig(2000, seed=3)
    ref = run_chain(data, UNIT, cfg)
    monkeypatch.setattr(mcmc, "TABLE_MAX_D", 2)
    cached = run_chain(data, UNIT, cfg)
    np.testing.assert_array_equal(cached.states, ref.states)


def test_d1_rejected():
    with pytest.raises(InvalidInputError):
        run_chain(Dataset(np.zeros((3, 1))), UNIT, ChainConfig(10))
