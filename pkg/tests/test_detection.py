import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagpost.dags import DagStructure, EdgePair, all_pairs, enumerate_dags, skeleton
from dagpost.detection import (DetectorConfig, SkeletonEstimate, absence_scores,
                               calibrate_threshold, class_priors, correlation_scores,
                               detect_likelihood_ratio, detect_posterior, error_rates,
                               gamma_from_tau, gamma_prime, log_class_likelihoods, roc_curve,
                               tau_from_gamma, threshold_scores)
from dagpost.errors import CapacityError, InvalidInputError, UndefinedRateError
from dagpost.mcmc import ChainConfig, run_chain
from dagpost.posterior import PriorConfig, normalize, posterior_table
from dagpost.rng import make_rng
from dagpost.sem import Dataset, WeightedSem, random_weights, reference_truths, sample_dataset

A1, A2 = reference_truths()
UNIT = PriorConfig()


def random_instance(seed, d=3, n=10):
    rng = make_rng(seed)
    s = enumerate_dags(d)[rng.integers(len(enumerate_dags(d)))]
    return sample_dataset(WeightedSem(s, random_weights(s, rng)), n, rng), s


def random_dataset(seed, d=3, n=10):
    return random_instance(seed, d, n)[0]


def test_threshold_mapping():
    assert tau_from_gamma(1.0) == 0.5
    assert tau_from_gamma(0.0) == 0.0
    assert tau_from_gamma(np.inf) == 1.0
    assert gamma_from_tau(tau_from_gamma(3.0)) == pytest.approx(3.0)
    with pytest.raises(InvalidInputError):
        tau_from_gamma(-1.0)


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.0), dict(threshold=1.5),
                                dict(mode="other")])
def test_config_validation(kw):
    with pytest.raises(InvalidInputError):
        DetectorConfig(**kw)


def test_skeleton_estimate_validation():
    with pytest.raises(InvalidInputError):
        SkeletonEstimate(np.array([[0, 1], [0, 0]]))
    with pytest.raises(InvalidInputError):
        SkeletonEstimate(np.eye(2))
    assert SkeletonEstimate(np.array([[0, 1], [1, 0]])).to_string() == "0110"


def test_class_priors():
    p = class_priors(2, EdgePair(1, 0))
    assert p.pi_C == pytest.approx(1 / 3) and p.pi_Cc == pytest.approx(2 / 3)
    assert p.u_plus == 1.0 and p.u_minus == 1.0
    models = enumerate_dags(3)
    for pair in all_pairs(3):
        count = sum(skeleton(m)[pair.i, pair.j] == 0 for m in models)
        q = class_priors(3, pair)
        assert q.pi_C == pytest.approx(count / 25)
        assert q.u_plus == pytest.approx(1 / 3) and q.u_minus == pytest.approx(1 / 3)
    with pytest.raises(CapacityError):
        class_priors(6, EdgePair(1, 0))


def test_threshold_extremes():
    data = sample_dataset(A1, 30, make_rng(0))
    tab = posterior_table(data, UNIT)
    scores = absence_scores(tab)
    assert np.all((scores > 0) & (scores < 1) | np.eye(3, dtype=bool))
    # tau = 0 declares every pair absent; tau = 1 keeps every pair whose
    # absence probability is below one.
    all_absent = detect_posterior(tab, DetectorConfig.from_gamma(0.0))
    assert not all_absent.chi_hat.any()
    all_present = detect_posterior(tab, DetectorConfig.from_gamma(np.inf))
    np.testing.assert_array_equal(all_present.chi_hat, 1 - np.eye(3, dtype=np.uint8))


def test_tie_declares_absence():
    s = np.array([[0, 0.5], [0.5, 0]])
    assert not threshold_scores(s, 0.5).chi_hat.any()


def test_consistent_detection_under_a2():
    data = sample_dataset(A2, 10_000, make_rng(1))
    est = detect_posterior(posterior_table(data, UNIT), DetectorConfig(threshold=0.5))
    np.testing.assert_array_equal(est.chi_hat, skeleton(A2.structure))


def test_mode_checks():
    data = sample_dataset(A1, 20, make_rng(2))
    tab = posterior_table(data, UNIT)
    trace = run_chain(data, UNIT, ChainConfig(2000, seed=1))
    with pytest.raises(InvalidInputError):
        detect_posterior(tab, DetectorConfig(mode="mcmc"))
    with pytest.raises(InvalidInputError):
        detect_posterior(trace, DetectorConfig())
    est = detect_posterior(trace, DetectorConfig(mode="mcmc"))
    assert np.array_equal(est.chi_hat, est.chi_hat.T)
    tampered = normalize(tab.models, tab.log_unnorm)
    object.__setattr__(tampered, "log_norm", tab.log_unnorm)
    with pytest.raises(InvalidInputError):
        detect_posterior(tampered, DetectorConfig())


@pytest.mark.parametrize("seed", range(20))
def test_likelihood_ratio_matches_posterior_threshold(seed):
    data = random_dataset(seed)
    tab = posterior_table(data, UNIT)
    scores = absence_scores(tab)
    for pair in all_pairs(3):
        pr = class_priors(3, pair)
        for gamma in (0.05, 0.3, 1.0, 2.5, 20.0):
            lr = detect_likelihood_ratio(data, UNIT, gamma, pair, table=tab)
            post = scores[pair.i, pair.j] >= tau_from_gamma(gamma_prime(gamma, pr))
            assert lr == post


def test_two_node_bayes_factor():
    data = random_dataset(3, d=2, n=8)
    tab = posterior_table(data, UNIT)
    log_p, log_q = log_class_likelihoods(tab, EdgePair(1, 0))
    assert log_p == pytest.approx(tab.log_unnorm[tab.index(DagStructure.empty(2))])
    others = [k for k, m in enumerate(tab.models) if m.n_edges]
    assert log_q == pytest.approx(np.logaddexp.reduce(tab.log_unnorm[others]) - np.log(2))


def test_error_rate_examples():
    truths = [A1.structure, A2.structure]
    perfect = [SkeletonEstimate(skeleton(t)) for t in truths]
    assert error_rates(perfect, truths) == (0.0, 0.0)
    ones = [SkeletonEstimate(1 - np.eye(3, dtype=np.uint8))] * 2
    assert error_rates(ones, truths) == (1.0, 0.0)
    zeros = [SkeletonEstimate(np.zeros((3, 3)))] * 2
    assert error_rates(zeros, truths) == (0.0, 1.0)
    with pytest.raises(UndefinedRateError):
        error_rates(ones[:1], [A1.structure])
    with pytest.raises(InvalidInputError):
        error_rates(ones, truths[:1])


def test_error_rates_hand_count():
    truths = [A2.structure]
    est = SkeletonEstimate(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))
    # One false positive among two absent pairs, the single edge missed.
    assert error_rates([est], truths) == (0.5, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_raising_tau_never_turns_present_into_absent(seed, t1, t2):
    lo, hi = sorted((t1, t2))
    s = make_rng(seed).uniform(size=(4, 4))
    s = (s + s.T) / 2
    low_est, high_est = threshold_scores(s, lo).chi_hat, threshold_scores(s, hi).chi_hat
    assert np.all(high_est >= low_est)


def _bench(seed, reps=30):
    mats, truths = [], []
    for r in range(reps):
        data, s = random_instance(seed * 1000 + r)
        mats.append(absence_scores(posterior_table(data, UNIT)))
        truths.append(s)
    return mats, truths


@pytest.mark.parametrize("seed", range(3))
def test_roc_monotone_and_complete(seed):
    mats, truths = _bench(seed)
    roc = roc_curve(mats, truths)
    assert np.all(np.diff(roc.tau) > 0) and np.isinf(roc.tau[-1])
    assert np.all(np.diff(roc.eps_plus) >= 0) and np.all(np.diff(roc.eps_minus) <= 0)
    assert roc.eps_plus[0] == 0.0 and roc.eps_minus[0] == 1.0
    assert roc.eps_plus[-1] == 1.0 and roc.eps_minus[-1] == 0.0
    for k in (0, len(roc.tau) // 2, len(roc.tau) - 1):
        est = [threshold_scores(m, roc.tau[k]) for m in mats]
        assert error_rates(est, truths) == pytest.approx((roc.eps_plus[k], roc.eps_minus[k]))


def test_calibration():
    mats, truths = _bench(4)
    tau, ep, em, roc = calibrate_threshold(mats, truths, 0.1)
    assert ep <= 0.1
    bigger = roc.tau[roc.tau > tau]
    if len(bigger):
        assert roc.eps_plus[np.searchsorted(roc.tau, bigger[0])] > 0.1
    tau1, ep1, _, _ = calibrate_threshold(mats, truths, 1.0)
    assert np.isinf(tau1) and ep1 == 1.0


def test_correlation_scores():
    X = make_rng(5).standard_normal((50, 3))
    X[:, 2] = X[:, 0]
    s = correlation_scores(Dataset(X))
    assert s[2, 0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(s, s.T) and not np.diag(s).any()
    assert np.all((s >= 0) & (s <= 1))
