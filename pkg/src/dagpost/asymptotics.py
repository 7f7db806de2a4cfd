"""Large-sample limits of the posterior blocks and the resulting decay rates.

All quantities are population versions computed from the true covariance
Sigma_X = sigma^2 (I - A)^{-1} (I - A)^{-T}; nothing here looks at data.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dags import D_MAX, DagStructure, _check_cap, _enumerate_adj, _enumerate_cached, is_maximal
from .errors import DomainError, InvalidInputError, NumericalError
from .sem import WeightedSem, kl_divergence, neumann_inverse


def population_covariance(sem):
    B = neumann_inverse(sem.matrix)
    return sem.sigma ** 2 * (B @ B.T)


@dataclass(frozen=True, eq=False)
class PopulationModel:
    sem: WeightedSem

    def __post_init__(self):
        cov = population_covariance(self.sem)
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self):
        return self.sem.d

    @property
    def sigma(self):
        return self.sem.sigma


def _solve_pd(C, rhs, node):
    try:
        return linalg.solve(C, rhs, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise NumericalError(f"singular population covariance block: {exc}", node=node) from None


def _parents(s, pop, j):
    if s.d != pop.d:
        raise InvalidInputError(f"structure has d={s.d} but the truth has d={pop.d}")
    return s.parents(j)


def mu_infinity(s, pop, j):
    """Population regression coefficients of X(j) on its parents under s."""
    pa = _parents(s, pop, j)
    if len(pa) == 0:
        return np.zeros(0)
    C = pop.cov
    return _solve_pd(C[np.ix_(pa, pa)], C[pa, j], j)


def t_infinity(s, pop, j):
    """Limit of T^(j) / n: explained variance of X(j) by its parents, over sigma^2."""
    pa = _parents(s, pop, j)
    if len(pa) == 0:
        return 0.0
    C = pop.cov
    return float(C[j, pa] @ _solve_pd(C[np.ix_(pa, pa)], C[pa, j], j)) / pop.sigma ** 2


def sigma_infinity(s, pop, j):
    """Limit of n times the weight-posterior covariance of node j."""
    pa = _parents(s, pop, j)
    if len(pa) == 0:
        return np.zeros((0, 0))
    C = pop.cov
    return pop.sigma ** 2 * _solve_pd(C[np.ix_(pa, pa)], np.eye(len(pa)), j)


def projected_matrix(s, pop):
    """Coefficient matrix on support s holding each node's population regression weights."""
    A = np.zeros((pop.d, pop.d))
    for j in range(pop.d):
        pa = s.parents(j)
        if len(pa):
            A[j, pa] = mu_infinity(s, pop, j)
    return A


@dataclass(frozen=True)
class DecayExponent:
    value: float
    argmin: DagStructure


def decay_exponent(pop, cap=D_MAX):
    """min over S != S* of KL(P_{A*} || P_{A(S)}), with the minimizing S.

    Only defined for a maximal truth: otherwise a supergraph reproduces the
    law exactly and the minimum is zero.
    """
    truth = pop.sem.structure
    if not is_maximal(truth):
        raise DomainError("the decay exponent is only defined for a maximal true structure")
    _check_cap(pop.d, cap)
    best = None
    for s in _enumerate_cached(pop.d):
        if s == truth:
            continue
        kl = kl_divergence(pop.sem.matrix, projected_matrix(s, pop))
        if best is None or kl < best.value:
            best = DecayExponent(kl, s)
    return best


def _integer_frobenius(adj_stack, g_adj):
    """||(I - S)(I - G)^{-1}||_F^2 for every S in the stack, in int64."""
    d = g_adj.shape[0]
    G = g_adj.astype(np.int64)
    inv = np.eye(d, dtype=np.int64)
    term = np.eye(d, dtype=np.int64)
    for _ in range(d - 1):
        term = term @ G
        inv = inv + term
    B = np.eye(d, dtype=np.int64)[None] - adj_stack.astype(np.int64)
    M = B @ inv
    return (M * M).sum(axis=(1, 2))


def min_binary_kl(g, cap=D_MAX):
    """Exact integer min over S != G of ||(I - S)(I - G)^{-1}||_F^2, and one minimizer."""
    _check_cap(g.d, cap)
    stack = _enumerate_adj(g.d)
    vals = _integer_frobenius(stack, g.adj)
    same = (stack == g.adj[None]).all(axis=(1, 2))
    vals = np.where(same, np.iinfo(np.int64).max, vals)
    k = int(np.argmin(vals))
    return int(vals[k]), _enumerate_cached(g.d)[k]


def constructive_witness(g):
    """An S != G attaining d + 1.

    For empty G, the single edge 1 -> 0 (any single edge works). Otherwise
    delete an edge s -> t whose tail s has no parents in G.
    """
    d = g.d
    if d < 2:
        raise DomainError("no alternative structure exists for d = 1")
    if g.n_edges == 0:
        return DagStructure.from_edges(d, [(1, 0)])
    a = g.adj.copy()
    roots = np.flatnonzero(a.sum(axis=1) == 0)
    for src in roots:
        children = np.flatnonzero(a[:, src])
        if len(children):
            a[children[0], src] = 0
            return DagStructure(a)
    raise AssertionError("a nonempty DAG always has a root with a child")


def binary_frobenius(s, g):
    return int(_integer_frobenius(s.adj[None], g.adj)[0])


@dataclass(frozen=True)
class RatePrediction:
    """Predicted behaviour of 1 - pi(S* | X^n).

    binary and maximal: log(1 - pi) ~ -exponent * n.
    nonmaximal: no exponent; 1 - pi decays no faster than n^{-polynomial_rate}.
    """

    kind: str
    exponent: float | None = None
    polynomial_rate: float | None = None

    def __post_init__(self):
        if self.kind not in ("binary", "maximal", "nonmaximal"):
            raise InvalidInputError(f"unknown rate kind {self.kind!r}")
        if self.exponent is not None and not self.exponent > 0:
            raise InvalidInputError(f"exponent must be positive, got {self.exponent}")


def predict_rate(sem, binary=False):
    if binary:
        return RatePrediction("binary", exponent=0.5)
    if is_maximal(sem.structure):
        return RatePrediction("maximal", exponent=decay_exponent(PopulationModel(sem)).value)
    return RatePrediction("nonmaximal", polynomial_rate=0.5)


def exponent_report(sem, sigma_w=1.0):
    """JSON-ready record for the exponent of a maximal truth."""
    res = decay_exponent(PopulationModel(sem))
    return {"kind": "maximal", "exponent": res.value, "argmin_model": res.argmin.to_string(),
            "sigma": sem.sigma, "sigma_w": sigma_w}
