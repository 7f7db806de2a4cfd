"""Exact posterior over DAG structures for the spike-and-slab linear Gaussian model.

Every model score is the log of the marginal likelihood up to a constant that
does not depend on the structure (Gaussian normalizers and the uniform
structure prior are dropped). Per node j with parent set pa:

    Lambda = I / sigma_w^2 + G[pa, pa] / sigma^2      (precision of w given S)
    b      = G[pa, j] / sigma^2
    mu     = Lambda^{-1} b,  T = b^T mu
    score_j = T / 2 + log|Lambda^{-1}| / 2 - s_j log sigma_w

with G the Gram matrix. Nodes without parents contribute 0.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, optimize
from scipy.special import logsumexp

from .dags import D_MAX, _check_cap, _enumerate_cached, _mask_table
from .errors import CapacityError, InvalidInputError, NumericalError

ORACLE_MAX_D = 3
ORACLE_MAX_N = 50


@dataclass(frozen=True)
class PriorConfig:
    sigma: float = 1.0
    sigma_w: float = 1.0

    def __post_init__(self):
        for name in ("sigma", "sigma_w"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True, eq=False)
class NodeBlocks:
    """Posterior of node j's incoming weights given its parent set."""

    parents: np.ndarray
    sigma_w_block: np.ndarray
    b_block: np.ndarray
    mu_block: np.ndarray
    t_value: float
    logdet: float


def _check_dims(s, data):
    if s.d != data.d:
        raise InvalidInputError(f"structure has d={s.d} but data has d={data.d}")


def _factor(precision, node):
    try:
        return linalg.cho_factor(precision, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"weight-posterior factorization failed: {exc}", node=node) from None


def node_blocks(s, data, prior, j):
    _check_dims(s, data)
    if not 0 <= j < s.d:
        raise InvalidInputError(f"node index {j} out of range for d={s.d}")
    pa = s.parents(j)
    k = len(pa)
    if k == 0:
        e = np.zeros(0)
        return NodeBlocks(pa, np.zeros((0, 0)), e, e, 0.0, 0.0)
    G = data.gram
    s2 = prior.sigma ** 2
    precision = np.eye(k) / prior.sigma_w ** 2 + G[np.ix_(pa, pa)] / s2
    b = G[pa, j] / s2
    c = _factor(precision, j)
    mu = linalg.cho_solve(c, b)
    cov = linalg.cho_solve(c, np.eye(k))
    cov = 0.5 * (cov + cov.T)
    logdet = -2.0 * float(np.sum(np.log(np.diag(c[0]))))
    return NodeBlocks(pa, cov, b, mu, float(b @ mu), logdet)


def local_score(s, data, prior, j):
    nb = node_blocks(s, data, prior, j)
    return 0.5 * nb.t_value + 0.5 * nb.logdet - len(nb.parents) * np.log(prior.sigma_w)


def log_unnorm_posterior(s, data, prior):
    """Log posterior mass of s up to a structure-independent constant (Gram path)."""
    return float(sum(local_score(s, data, prior, j) for j in range(s.d)))


def _masks_by_size(d, j):
    others = [i for i in range(d) if i != j]
    out = {}
    for m in range(1 << (d - 1)):
        pa = [others[b] for b in range(d - 1) if (m >> b) & 1]
        out.setdefault(len(pa), []).append(pa)
    return out


def local_score_table(data, prior):
    """(d, 2^d) table of node scores indexed by parent bitmask.

    Masks that contain bit j itself are NaN. Parent sets of equal size are
    factorized together in one batched Cholesky call.
    """
    d = data.d
    if d > 20:
        raise CapacityError("d", d, 20)
    G = data.gram
    bad = np.flatnonzero(~np.isfinite(G).all(axis=1))
    if len(bad):
        raise NumericalError("non-finite Gram entries", node=int(bad[0]))
    s2 = prior.sigma ** 2
    log_sw = np.log(prior.sigma_w)
    table = np.full((d, 1 << d), np.nan)
    weights = 1 << np.arange(d, dtype=np.int64)
    for j in range(d):
        for k, sets in _masks_by_size(d, j).items():
            pa = np.array(sets, dtype=np.int64).reshape(len(sets), k)
            idx = (weights[pa]).sum(axis=1) if k else np.zeros(len(sets), dtype=np.int64)
            if k == 0:
                table[j, idx] = 0.0
                continue
            P = np.eye(k) / prior.sigma_w ** 2 + G[pa[:, :, None], pa[:, None, :]] / s2
            b = G[pa, j] / s2
            try:
                L = np.linalg.cholesky(P)
            except np.linalg.LinAlgError:
                # Locate the offending node for the error message.
                for row in pa:
                    _factor(np.eye(k) / prior.sigma_w ** 2 + G[np.ix_(row, row)] / s2, j)
                raise NumericalError("weight-posterior factorization failed", node=j) from None
            z = np.linalg.solve(L, b[:, :, None])[:, :, 0]
            T = np.sum(z * z, axis=1)
            logdet = -2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
            table[j, idx] = 0.5 * T + 0.5 * logdet - k * log_sw
    return table


def design_tensor(s, samples):
    """Stack of M(S, X_i): M_i[j] holds node j's parent values in its own column block."""
    n, d = samples.shape
    p = s.n_edges
    M = np.zeros((n, d, p))
    col = 0
    for j in range(d):
        for i in s.parents(j):
            M[:, j, col] = samples[:, i]
            col += 1
    return M


def log_unnorm_posterior_raw(s, data, prior):
    """Same quantity as ``log_unnorm_posterior``, built sample by sample.

    Forms the full block design M(S, X_i) for every sample and factorizes the
    joint p x p weight precision, p = number of edges. Cost grows linearly in n;
    kept as the reference path for equivalence and timing checks.
    """
    _check_dims(s, data)
    if data.samples is None:
        raise InvalidInputError("raw scoring needs the raw samples")
    X = data.samples
    p = s.n_edges
    if p == 0:
        return 0.0
    M = design_tensor(s, X)
    s2 = prior.sigma ** 2
    precision = np.eye(p) / prior.sigma_w ** 2 + np.einsum("nji,njk->ik", M, M) / s2
    b = np.einsum("nji,nj->i", M, X) / s2
    c = _factor(precision, None)
    mu = linalg.cho_solve(c, b)
    logdet = -2.0 * float(np.sum(np.log(np.diag(c[0]))))
    return float(0.5 * b @ mu + 0.5 * logdet - p * np.log(prior.sigma_w))


def log_unnorm_posterior_binary(s, data, sigma):
    """-(1/2 sigma^2) sum_i ||X_i - S X_i||^2, evaluated as a trace against the Gram matrix."""
    _check_dims(s, data)
    B = np.eye(s.d) - s.adj
    return float(-np.trace(B.T @ B @ data.gram) / (2.0 * sigma ** 2))


def binary_scores(adj_stack, gram, sigma):
    B = np.eye(gram.shape[0])[None] - adj_stack
    return -np.einsum("mij,mik,kj->m", B, B, gram) / (2.0 * sigma ** 2)


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    models: tuple
    log_unnorm: np.ndarray
    log_norm: np.ndarray

    @property
    def d(self):
        return self.models[0].d

    @property
    def probs(self):
        return np.exp(self.log_norm)

    def index(self, s):
        for k, m in enumerate(self.models):
            if m == s:
                return k
        raise InvalidInputError(f"{s!r} is not in the table")

    def prob(self, s):
        return float(np.exp(self.log_norm[self.index(s)]))

    def log_one_minus(self, s):
        """log(1 - pi(s)) from the other models' masses, accurate when pi(s) ~ 1."""
        k = self.index(s)
        rest = np.delete(self.log_norm, k)
        return float(logsumexp(rest)) if len(rest) else -np.inf

    def argmax(self):
        return self.models[int(np.argmax(self.log_norm))]

    def adjacency(self):
        return np.stack([m.adj for m in self.models])


def normalize(models, log_unnorm):
    models = tuple(models)
    v = np.asarray(log_unnorm, dtype=float)
    if len(models) != len(v) or len(v) == 0:
        raise InvalidInputError(f"need equal, nonzero lengths; got {len(models)} and {len(v)}")
    if not np.all(np.isfinite(v)):
        raise NumericalError("non-finite model score")
    v = v.copy()
    v.setflags(write=False)
    ln = v - logsumexp(v)
    ln.setflags(write=False)
    return PosteriorTable(models, v, ln)


def enumerated_scores(table, d):
    """Sum node scores over every enumerated DAG on d nodes."""
    masks = _mask_table(d)
    return table[np.arange(d)[None, :], masks].sum(axis=1)


def posterior_table(data, prior, cap=D_MAX):
    """Exact normalized posterior over all DAGs on data.d nodes."""
    d = data.d
    _check_cap(d, cap)
    scores = enumerated_scores(local_score_table(data, prior), d)
    return normalize(_enumerate_cached(d), scores)


def binary_posterior_table(data, sigma, cap=D_MAX):
    """Exact posterior when every edge weight is known to be 1."""
    from .dags import _enumerate_adj

    d = data.d
    _check_cap(d, cap)
    scores = binary_scores(_enumerate_adj(d).astype(float), data.gram, sigma)
    return normalize(_enumerate_cached(d), scores)


def absence_mask(adj_stack, i, j):
    return (adj_stack[:, i, j] == 0) & (adj_stack[:, j, i] == 0)


def edge_absence_posterior(table, pair):
    """Posterior probability that nodes pair.i and pair.j are not adjacent."""
    adj = table.adjacency()
    p = table.probs[absence_mask(adj, pair.i, pair.j)].sum()
    return float(min(1.0, p))


def absence_matrix(table):
    """Symmetric d x d matrix of absence probabilities, zero diagonal."""
    adj = table.adjacency()
    probs = table.probs
    present = np.maximum(adj, adj.transpose(0, 2, 1)).astype(float)
    out = np.einsum("m,mij->ij", probs, 1.0 - present)
    np.fill_diagonal(out, 0.0)
    return np.minimum(out, 1.0)


def _log_phi(r, var):
    return -0.5 * r * r / var - 0.5 * np.log(2.0 * np.pi * var)


def _node_log_integrand(y, P, prior):
    s2 = prior.sigma ** 2
    sw2 = prior.sigma_w ** 2

    def f(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        r = y - P @ w
        return float(np.sum(_log_phi(r, s2)) + np.sum(_log_phi(w, sw2)))

    return f


def _quad_split(g, center):
    opts = dict(epsabs=0.0, epsrel=1e-11, limit=200)
    lo = integrate.quad(g, -np.inf, center, **opts)[0]
    hi = integrate.quad(g, center, np.inf, **opts)[0]
    return lo + hi


def _log_integral_1d(f):
    res = optimize.minimize_scalar(lambda w: -f(w))
    w0 = float(res.x)
    top = f(w0)
    return top + np.log(_quad_split(lambda w: np.exp(f(w) - top), w0))


def _log_integral_2d(f):
    res = optimize.minimize(lambda w: -f(w), np.zeros(2), method="Nelder-Mead",
                            options=dict(xatol=1e-10, fatol=1e-12, maxiter=4000))
    top = f(res.x)

    def inner(w1):
        h = lambda w2: f([w1, w2])
        r = optimize.minimize_scalar(lambda w2: -h(w2))
        return _quad_split(lambda w2: np.exp(h(w2) - top), float(r.x))

    return top + np.log(_quad_split(inner, float(res.x[0])))


def oracle_log_marginal(s, data, prior):
    """log of the integral over w of f(X^n | S, w) N(w; 0, sigma_w^2 I), all constants kept.

    Evaluated node by node with adaptive quadrature on the raw samples; no
    use is made of the closed-form blocks above. Limited to d <= 3, n <= 50.
    """
    _check_dims(s, data)
    if data.samples is None:
        raise InvalidInputError("the oracle needs the raw samples")
    if s.d > ORACLE_MAX_D:
        raise CapacityError("d", s.d, ORACLE_MAX_D)
    if data.n > ORACLE_MAX_N:
        raise CapacityError("n", data.n, ORACLE_MAX_N)
    X = data.samples
    total = 0.0
    for j in range(s.d):
        pa = s.parents(j)
        y = X[:, j]
        if len(pa) == 0:
            total += float(np.sum(_log_phi(y, prior.sigma ** 2)))
            continue
        f = _node_log_integrand(y, X[:, pa], prior)
        total += _log_integral_1d(lambda w: f(w)) if len(pa) == 1 else _log_integral_2d(f)
    return float(total)
