"""Seeded convergence and detection experiments.

Convergence runs follow one growing sample path per truth: samples are drawn
in segments between checkpoints and folded into a streaming Gram matrix, so
memory stays O(d^2) unless ``keep_samples`` is set.
"""

from dataclasses import dataclass, field

import numpy as np

from .asymptotics import PopulationModel, decay_exponent, predict_rate
from .dags import D_MAX, _check_cap, enumerate_dags, is_maximal, sample_uniform_dag
from .detection import absence_scores, calibrate_threshold, correlation_scores, threshold_scores
from .errors import DomainError, InvalidInputError
from .mcmc import ChainConfig, run_chain
from .posterior import PriorConfig, binary_posterior_table, posterior_table
from .rng import make_rng, spawn
from .sem import Dataset, GramAccumulator, WeightedSem, neumann_inverse, random_weights

METHODS = ("exact_posterior_detector", "mcmc_detector", "naive_correlation")
_CHUNK = 1 << 16


def checkpoint_schedule(n_max, ratio=1.3, extra=()):
    """0, the rounded powers of ``ratio`` up to n_max, n_max itself, and ``extra``."""
    if n_max < 1:
        raise InvalidInputError(f"n_max must be >= 1, got {n_max}")
    pts = {0, int(n_max)}
    v = 1.0
    while v <= n_max:
        pts.add(int(round(v)))
        v *= ratio
    pts.update(int(e) for e in extra if 0 <= e <= n_max)
    return np.array(sorted(pts), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ConvergenceCurve:
    """Posterior mass of the truth along one sample path.

    ``diagnostic`` is the scheme's err_n; ``diff`` is diff_n where defined.
    """

    truth: object
    checkpoints: np.ndarray
    posterior_true: np.ndarray
    log_one_minus: np.ndarray
    diagnostic: np.ndarray
    diff: np.ndarray | None = None
    grams: list | None = field(default=None, repr=False)
    samples: np.ndarray | None = field(default=None, repr=False)

    def slope(self, lo, hi):
        return fitted_slope(self.checkpoints, self.log_one_minus, lo, hi)


def fitted_slope(ns, values, lo, hi):
    """Least-squares slope of values against n over checkpoints with lo <= n <= hi."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (ns >= lo) & (ns <= hi) & np.isfinite(values)
    if sel.sum() < 2:
        raise InvalidInputError(f"fewer than two checkpoints in [{lo}, {hi}]")
    return float(np.polyfit(ns[sel], values[sel], 1)[0])


class _SamplePath:
    """One growing sample path with a streaming Gram matrix."""

    def __init__(self, sem, rng, keep=False):
        self.sem = sem
        self.rng = rng
        self._B = neumann_inverse(sem.matrix).T
        self._acc = GramAccumulator(sem.d)
        self._kept = [] if keep else None
        self.grams = [] if keep else None

    def advance_to(self, n):
        acc = self._acc
        while acc.n < n:
            m = min(_CHUNK, int(n) - acc.n)
            x = (self.rng.standard_normal((m, self.sem.d)) * self.sem.sigma) @ self._B
            acc.update(x)
            if self._kept is not None:
                self._kept.append(x)
        if self.grams is not None:
            self.grams.append(acc.gram.copy())
        return acc.snapshot()

    @property
    def samples(self):
        if not self._kept:
            return None
        return np.concatenate(self._kept)


def _prefix_max(values):
    out = np.full(len(values), np.nan)
    best = -np.inf
    for k, v in enumerate(values):
        if np.isfinite(v):
            best = max(best, v)
        out[k] = best if np.isfinite(best) else np.nan
    return out


def _lil_scale(ns):
    ns = np.asarray(ns, dtype=float)
    out = np.full(len(ns), np.nan)
    ok = ns >= 3
    out[ok] = 1.0 / np.sqrt(ns[ok] * np.log(np.log(ns[ok])))
    return out


def _curve(truth, checkpoints, path, table_fn, diff_fn, err_fn):
    tables = [table_fn(path.advance_to(n)) for n in checkpoints]
    post = np.array([t.prob(truth) for t in tables])
    lom = np.array([t.log_one_minus(truth) for t in tables])
    diff = diff_fn(checkpoints, lom)
    err = err_fn(checkpoints, lom, diff)
    return ConvergenceCurve(truth, checkpoints, post, lom, err, diff, path.grams, path.samples)


def _lil_err(ns, lom, diff):
    # Prefix max over checkpoints with n >= 1; n = 0 carries no data.
    d = np.where(np.asarray(ns) >= 1, diff, np.nan)
    return _prefix_max(d) * _lil_scale(ns)


def run_binary_convergence(d, n_max, seed, sigma=1.0, extra=(), keep=False, cap=D_MAX):
    """One curve per truth S* in G_d under the unit-weight model."""
    _check_cap(d, cap)
    cps = checkpoint_schedule(n_max, extra=extra)
    models = enumerate_dags(d, cap)
    curves = []
    for truth, rng in zip(models, spawn(seed, len(models))):
        sem = WeightedSem.binary(truth, sigma)
        curves.append(_curve(truth, cps, _SamplePath(sem, rng, keep),
                             lambda g: binary_posterior_table(g, sigma),
                             lambda ns, lom: lom + ns / 2.0, _lil_err))
    return curves, predict_rate(None, binary=True)


def run_maximal_convergence(sem, n_max, seed, prior=PriorConfig(), extra=(), keep=False):
    if not is_maximal(sem.structure):
        raise DomainError("the maximal-rate experiment needs a maximal true structure")
    _check_cap(sem.d, D_MAX)
    D = decay_exponent(PopulationModel(sem)).value
    cps = checkpoint_schedule(n_max, extra=extra)
    curve = _curve(sem.structure, cps, _SamplePath(sem, make_rng(seed), keep),
                   lambda g: posterior_table(g, prior), lambda ns, lom: lom + ns * D, _lil_err)
    return curve, predict_rate(sem)


def _nonmax_err(ns, lom, diff):
    ns = np.asarray(ns, dtype=float)
    out = np.full(len(ns), np.nan)
    ok = ns >= 2
    out[ok] = -2.0 / np.log(ns[ok]) * lom[ok]
    return out


def run_nonmaximal_convergence(sem, n_max, seed, prior=PriorConfig(), extra=(), keep=False):
    _check_cap(sem.d, D_MAX)
    cps = checkpoint_schedule(n_max, extra=extra)
    return _curve(sem.structure, cps, _SamplePath(sem, make_rng(seed), keep),
                  lambda g: posterior_table(g, prior), lambda ns, lom: None, _nonmax_err)


@dataclass(frozen=True, eq=False)
class BenchmarkReplicate:
    truth: WeightedSem
    data: Dataset
    scores: dict
    estimates: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class MethodSummary:
    tau: float
    eps_plus: float
    eps_minus: float
    roc: object


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    d: int
    n: int
    alpha: float
    replicates: list
    methods: dict


def run_detection_benchmark(d, n, replicates, methods=METHODS, seed=0, prior=PriorConfig(),
                            iterations=100_000, alpha=0.1):
    """Random truths, small datasets, per-method ROC and calibrated error rates.

    Each replicate draws a uniform DAG, N(0, 1) weights and n samples from its
    own stream; the chain for the MCMC detector is seeded from that stream too.
    """
    methods = tuple(methods)
    bad = set(methods) - set(METHODS)
    if bad:
        raise InvalidInputError(f"unknown methods {sorted(bad)}")
    if "exact_posterior_detector" in methods:
        _check_cap(d, D_MAX)
    reps = []
    for rng in spawn(seed, replicates):
        s = sample_uniform_dag(d, rng)
        sem = WeightedSem(s, random_weights(s, rng), prior.sigma)
        X = (rng.standard_normal((n, d)) * sem.sigma) @ neumann_inverse(sem.matrix).T
        data = Dataset(X)
        chain_seed = int(rng.integers(2 ** 63))
        scores = {}
        for m in methods:
            if m == "exact_posterior_detector":
                scores[m] = absence_scores(posterior_table(data, prior))
            elif m == "mcmc_detector":
                trace = run_chain(data, prior, ChainConfig(iterations, seed=chain_seed))
                scores[m] = trace.absence_freq
            else:
                scores[m] = correlation_scores(data)
        reps.append(BenchmarkReplicate(sem, data, scores))
    summary = {}
    truths = [r.truth.structure for r in reps]
    for m in methods:
        tau, ep, em, roc = calibrate_threshold([r.scores[m] for r in reps], truths, alpha)
        summary[m] = MethodSummary(tau, ep, em, roc)
        for r in reps:
            r.estimates[m] = threshold_scores(r.scores[m], tau)
    return BenchmarkReport(d, n, alpha, reps, summary)
