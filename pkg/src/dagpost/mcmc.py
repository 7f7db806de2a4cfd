"""Metropolis-Hastings over DAG space with single-edge toggle proposals.

The proposal picks one of the |N(S)| valid toggles uniformly, so the
acceptance ratio carries the correction |N(S)| / |N(S')|. Scores come from a
precomputed (d, 2^d) node-score table: a toggle changes one node's parent set
and therefore one table lookup, independent of n.
"""

from dataclasses import dataclass

import numpy as np

from . import _chain
from .dags import DagStructure, neighbors
from .errors import InvalidInputError, NumericalError
from .posterior import local_score, local_score_table, log_unnorm_posterior_raw
from .rng import make_rng

TABLE_MAX_D = 12
_BLOCK = 1 << 16


@dataclass(frozen=True)
class ChainConfig:
    iterations: int
    burn_in: int | None = None
    thin: int = 1
    seed: int = 0
    init: object = "empty"

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError(f"iterations must be >= 1, got {self.iterations}")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in < self.iterations:
            raise InvalidInputError(
                f"need 0 <= burn_in < iterations, got {self.burn_in} and {self.iterations}")
        if self.thin < 1:
            raise InvalidInputError(f"thin must be >= 1, got {self.thin}")
        if not (self.init == "empty" or isinstance(self.init, DagStructure)):
            raise InvalidInputError("init must be 'empty' or a DagStructure")

    @property
    def n_recorded(self):
        return (self.iterations - self.burn_in - 1) // self.thin + 1


@dataclass(frozen=True, eq=False)
class ChainTrace:
    """Post burn-in, thinned states stored as parent bitmasks (one row per state)."""

    states: np.ndarray
    log_scores: np.ndarray
    acceptance_rate: float
    absence_freq: np.ndarray

    @property
    def d(self):
        return self.states.shape[1]

    @property
    def visited(self):
        return [DagStructure.from_masks(row, validate=False) for row in self.states]

    def __len__(self):
        return len(self.states)

    def model_frequencies(self, models):
        """Empirical frequency of each model in ``models`` (same order)."""
        keys = {tuple(m.masks().tolist()): k for k, m in enumerate(models)}
        uniq, counts = np.unique(self.states, axis=0, return_counts=True)
        out = np.zeros(len(models))
        for row, c in zip(uniq, counts):
            k = keys.get(tuple(row.tolist()))
            if k is None:
                raise InvalidInputError("trace visits a model outside the given list")
            out[k] = c
        return out / len(self.states)


def propose(s, rng):
    """Uniform draw from neighbors(s); returns (candidate, |N(s)|, |N(candidate)|)."""
    nb = neighbors(s)
    if not nb:
        raise RuntimeError("model has no neighbors; need d >= 2")
    cand = nb[int(rng.integers(len(nb)))]
    return cand, len(nb), len(neighbors(cand))


def accept_log_ratio(delta, forward_count, reverse_count, hastings=True):
    return delta + (np.log(forward_count) - np.log(reverse_count) if hastings else 0.0)


def _accepts(log_alpha, u):
    return log_alpha >= 0.0 or u < np.exp(log_alpha)


def mh_step(current, candidate, counts, log_target, rng, hastings=True):
    """One accept/reject decision; ``counts`` is (|N(current)|, |N(candidate)|)."""
    a, b = log_target(current), log_target(candidate)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise NumericalError(f"non-finite log target ({a}, {b})")
    if _accepts(accept_log_ratio(b - a, counts[0], counts[1], hastings), rng.random()):
        return candidate, True
    return current, False


def _uniform_blocks(rng, total):
    # Both engines consume the stream in the same blocks so traces agree.
    done = 0
    while done < total:
        m = min(_BLOCK, total - done)
        yield done, rng.random(m), rng.random(m)
        done += m


def _init_masks(cfg, d):
    if cfg.init == "empty":
        return np.zeros(d, dtype=np.int64)
    if cfg.init.d != d:
        raise InvalidInputError(f"init has d={cfg.init.d} but data has d={d}")
    return cfg.init.masks().astype(np.int64)


def _finish(states, scores, accepted, counts, cfg):
    n = len(states)
    freq = counts / n
    freq = freq + freq.T
    return ChainTrace(states, scores, accepted / cfg.iterations, freq)


def _run_kernel(table, cfg, rng, hastings):
    d = table.shape[0]
    par = _init_masks(cfg, d)
    score = _chain.state_score(table, par)
    n_cur = _chain.neighbor_count(par)
    k = cfg.n_recorded
    states = np.zeros((k, d), dtype=np.int64)
    scores = np.zeros(k)
    counts = np.zeros((d, d), dtype=np.int64)
    pos = 0
    accepted = 0
    for t0, u_prop, u_acc in _uniform_blocks(rng, cfg.iterations):
        score, n_cur, acc, pos = _chain.run_segment(
            table, par, score, n_cur, u_prop, u_acc, t0, cfg.burn_in, cfg.thin,
            hastings, states, scores, pos, counts)
        accepted += acc
    return _finish(states, scores, accepted, counts, cfg)


def _run_python(node_score, full_score, d, cfg, rng, hastings):
    """Reference loop; same moves and random consumption as the kernel.

    Exactly one of ``node_score(j, mask)`` / ``full_score(masks)`` drives the
    score: the first updates one node per move, the second rescores the model.
    """
    par = _init_masks(cfg, d)
    if node_score is not None:
        score = sum(node_score(j, int(par[j])) for j in range(d))
    else:
        score = full_score(par)
    n_cur = _chain.neighbor_count(par)
    k = cfg.n_recorded
    states = np.zeros((k, d), dtype=np.int64)
    scores = np.zeros(k)
    counts = np.zeros((d, d), dtype=np.int64)
    pos = 0
    accepted = 0
    low = np.tril_indices(d, -1)
    for t0, u_prop, u_acc in _uniform_blocks(rng, cfg.iterations):
        for step in range(len(u_prop)):
            idx = min(int(u_prop[step] * n_cur), n_cur - 1)
            j, i = _chain.pick_neighbor(par, idx)
            old = par[j]
            new = old ^ (1 << i)
            par[j] = new
            if node_score is not None:
                cand = score + node_score(j, int(new)) - node_score(j, int(old))
            else:
                cand = full_score(par)
            n_cand = _chain.neighbor_count(par)
            log_alpha = cand - score
            if hastings:
                log_alpha += np.log(n_cur) - np.log(n_cand)
            if _accepts(log_alpha, u_acc[step]):
                score = cand
                n_cur = n_cand
                accepted += 1
            else:
                par[j] = old
            t = t0 + step + 1
            if t > cfg.burn_in and (t - cfg.burn_in - 1) % cfg.thin == 0:
                states[pos] = par
                scores[pos] = score
                pos += 1
                adj = (par[:, None] >> np.arange(d)) & 1
                counts[low] += ((adj + adj.T) == 0)[low]
    return _finish(states, scores, accepted, counts, cfg)


def run_chain(data, prior, cfg, scoring="gram", hastings=True, engine="auto"):
    """Run one chain targeting pi(S | X^n) and summarize it.

    scoring: "gram" scores through the Gram matrix (cost per move independent
    of n); "raw" rescores the whole model from the raw samples at every move.
    engine: "kernel" (compiled loop over the score table), "python" (reference
    loop), or "auto" (kernel whenever a table fits).
    """
    d = data.d
    if d < 2:
        raise InvalidInputError("a chain over DAGs needs d >= 2")
    if d > _chain.MAX_KERNEL_D:
        raise InvalidInputError(f"d={d} exceeds the bitmask limit {_chain.MAX_KERNEL_D}")
    rng = make_rng(cfg.seed)
    if scoring == "raw":
        if engine == "kernel":
            raise InvalidInputError("raw scoring runs only in the python engine")

        def full_score(par):
            return log_unnorm_posterior_raw(DagStructure.from_masks(par, validate=False),
                                            data, prior)

        return _run_python(None, full_score, d, cfg, rng, hastings)
    if scoring != "gram":
        raise InvalidInputError(f"unknown scoring {scoring!r}")
    use_table = d <= TABLE_MAX_D
    if engine == "kernel" or (engine == "auto" and use_table):
        if not use_table:
            raise InvalidInputError(f"score table needs d <= {TABLE_MAX_D}")
        return _run_kernel(local_score_table(data, prior), cfg, rng, hastings)
    if engine not in ("python", "auto"):
        raise InvalidInputError(f"unknown engine {engine!r}")
    if use_table:
        table = local_score_table(data, prior)
        return _run_python(lambda j, m: table[j, m], None, d, cfg, rng, hastings)
    cache = {}

    def node_score(j, mask):
        key = (j, mask)
        if key not in cache:
            a = np.zeros((d, d), dtype=np.uint8)
            a[j] = (mask >> np.arange(d)) & 1
            cache[key] = local_score(DagStructure._trusted(a), data, prior, j)
        return cache[key]

    return _run_python(node_score, None, d, cfg, rng, hastings)
