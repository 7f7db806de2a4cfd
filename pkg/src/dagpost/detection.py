"""Edge (skeleton) detection: posterior-threshold and likelihood-ratio forms.

A detector declares the pair (i, j) absent, chi_hat[i, j] = 0, when its
absence score reaches the threshold tau. For the optimal detector the score is
the posterior probability pi(chi_ij(S) = 0 | X^n), exact or estimated by a
chain, and tau = gamma' / (1 + gamma'). Larger tau declares fewer absences,
so the false-positive rate is nondecreasing in tau.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dags import D_MAX, EdgePair, _check_cap, _enumerate_adj, all_pairs
from .errors import CalibrationError, InvalidInputError, UndefinedRateError
from .mcmc import ChainTrace
from .posterior import PosteriorTable, absence_mask, absence_matrix, posterior_table

MODES = ("exact_posterior", "mcmc")


def tau_from_gamma(gamma_prime):
    if gamma_prime < 0:
        raise InvalidInputError(f"gamma' must be >= 0, got {gamma_prime}")
    return 1.0 if np.isinf(gamma_prime) else gamma_prime / (1.0 + gamma_prime)


def gamma_from_tau(tau):
    return np.inf if tau >= 1.0 else tau / (1.0 - tau)


@dataclass(frozen=True)
class DetectorConfig:
    alpha: float = 0.1
    threshold: float = 0.5
    mode: str = "exact_posterior"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= self.threshold <= 1:
            raise InvalidInputError(f"tau must lie in [0, 1], got {self.threshold}")
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_gamma(cls, gamma_prime, **kw):
        return cls(threshold=tau_from_gamma(gamma_prime), **kw)


@dataclass(frozen=True, eq=False)
class SkeletonEstimate:
    chi_hat: np.ndarray

    def __post_init__(self):
        c = np.array(self.chi_hat, dtype=np.uint8)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InvalidInputError(f"chi_hat must be square, got {c.shape}")
        if not np.array_equal(c, c.T) or np.any(np.diag(c)) or np.any(c > 1):
            raise InvalidInputError("chi_hat must be symmetric, binary, with zero diagonal")
        c.setflags(write=False)
        object.__setattr__(self, "chi_hat", c)

    @property
    def d(self):
        return self.chi_hat.shape[0]

    def to_string(self):
        return "".join(str(int(v)) for v in self.chi_hat.ravel())


@dataclass(frozen=True)
class ClassPriors:
    pi_C: float
    pi_Cc: float
    u_plus: float
    u_minus: float


def _class_masses(d):
    adj = _enumerate_adj(d)
    return {p: absence_mask(adj, p.i, p.j).mean() for p in all_pairs(d)}


def class_priors(d, pair, cap=D_MAX):
    """Prior masses of C_ij (no edge between i and j) and its complement, plus u weights."""
    _check_cap(d, cap)
    if d < 2:
        raise InvalidInputError("need d >= 2 for a node pair")
    if not pair.i < d:
        raise InvalidInputError(f"pair {pair} out of range for d={d}")
    masses = _class_masses(d)
    pc = float(masses[pair])
    return ClassPriors(pc, 1.0 - pc, pc / sum(masses.values()),
                       (1.0 - pc) / sum(1.0 - m for m in masses.values()))


def gamma_prime(gamma, priors):
    """Posterior-form threshold equivalent to the likelihood-ratio threshold gamma."""
    return gamma * priors.u_minus * priors.pi_C / (priors.u_plus * priors.pi_Cc)


def absence_scores(source):
    """d x d absence probabilities from a PosteriorTable or a ChainTrace."""
    if isinstance(source, PosteriorTable):
        return absence_matrix(source)
    if isinstance(source, ChainTrace):
        return source.absence_freq
    raise InvalidInputError(f"expected a PosteriorTable or ChainTrace, got {type(source).__name__}")


def threshold_scores(scores, tau):
    """chi_hat = 0 where score >= tau (ties declare absence)."""
    scores = np.asarray(scores, dtype=float)
    chi = (scores < tau).astype(np.uint8)
    chi = np.minimum(chi, chi.T)
    np.fill_diagonal(chi, 0)
    return SkeletonEstimate(chi)


def detect_posterior(source, cfg):
    if isinstance(source, PosteriorTable):
        if cfg.mode != "exact_posterior":
            raise InvalidInputError("a posterior table needs mode='exact_posterior'")
        if abs(source.probs.sum() - 1.0) > 1e-9:
            raise InvalidInputError("posterior table is not normalized")
    elif isinstance(source, ChainTrace) and cfg.mode != "mcmc":
        raise InvalidInputError("a chain trace needs mode='mcmc'")
    return threshold_scores(absence_scores(source), cfg.threshold)


def log_class_likelihoods(table, pair):
    """(log p_ij, log q_ij): log mean marginal likelihood over C_ij and over its complement.

    Both carry the same structure-independent constant as the table scores.
    """
    mask = absence_mask(table.adjacency(), pair.i, pair.j)
    lu = table.log_unnorm
    return (float(logsumexp(lu[mask]) - np.log(mask.sum())),
            float(logsumexp(lu[~mask]) - np.log((~mask).sum())))


def detect_likelihood_ratio(data, prior, gamma, pair, table=None, cap=D_MAX):
    """True iff the pair is declared absent: log p - log q >= log(gamma u- / u+)."""
    _check_cap(data.d, cap)
    if table is None:
        table = posterior_table(data, prior, cap=cap)
    pr = class_priors(data.d, pair, cap=cap)
    log_p, log_q = log_class_likelihoods(table, pair)
    if gamma == 0:
        return True
    return log_p - log_q >= np.log(gamma) + np.log(pr.u_minus) - np.log(pr.u_plus)


def _truth_skeleton(t):
    a = t.adj if hasattr(t, "adj") else np.asarray(t)
    return a + a.T


def error_rates(estimates, truths):
    """Pooled (eps_plus, eps_minus) over replicates and pairs i > j."""
    if len(estimates) != len(truths) or not estimates:
        raise InvalidInputError("need equally many estimates and truths, at least one")
    fp = fn = absent = present = 0
    for est, t in zip(estimates, truths):
        chi = _truth_skeleton(t)
        if chi.shape != est.chi_hat.shape:
            raise InvalidInputError("estimate and truth dimensions differ")
        low = np.tril_indices(chi.shape[0], -1)
        c, h = chi[low], est.chi_hat[low]
        fp += int(np.sum((h == 1) & (c == 0)))
        fn += int(np.sum((h == 0) & (c == 1)))
        absent += int(np.sum(c == 0))
        present += int(np.sum(c == 1))
    if absent == 0:
        raise UndefinedRateError("false-positive rate undefined: no truth has an absent pair")
    if present == 0:
        raise UndefinedRateError("false-negative rate undefined: no truth has an edge")
    return fp / absent, fn / present


def correlation_scores(data):
    """Naive absence score 1 - |sample correlation| from the Gram matrix (no centering)."""
    G = data.gram
    sd = np.sqrt(np.diag(G))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = G / np.outer(sd, sd)
    r = np.nan_to_num(r, nan=0.0)
    out = 1.0 - np.clip(np.abs(r), 0.0, 1.0)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Error rates at every knot where some pair's decision changes.

    Knots are the distinct absence scores plus +inf; at knot tau the detector
    declares absent exactly the pairs with score >= tau.
    """

    tau: np.ndarray
    eps_plus: np.ndarray
    eps_minus: np.ndarray

    @property
    def gamma_prime(self):
        return np.array([gamma_from_tau(t) if t <= 1 else np.inf for t in self.tau])


def _pooled(score_mats, truths):
    s, c = [], []
    for m, t in zip(score_mats, truths):
        m = np.asarray(m)
        low = np.tril_indices(m.shape[0], -1)
        s.append(m[low])
        c.append(_truth_skeleton(t)[low])
    return np.concatenate(s), np.concatenate(c)


def roc_curve(score_mats, truths):
    if not score_mats or len(score_mats) != len(truths):
        raise CalibrationError("need a nonempty benchmark set with one truth per replicate")
    s, c = _pooled(score_mats, truths)
    absent = c == 0
    if absent.sum() == 0 or (~absent).sum() == 0:
        raise UndefinedRateError("benchmark set lacks absent or present pairs")
    knots = np.append(np.unique(s), np.inf)
    # Present declared iff score < tau.
    order = np.sort(s[absent])
    order_p = np.sort(s[~absent])
    fp = np.searchsorted(order, knots, side="left") / absent.sum()
    fn = 1.0 - np.searchsorted(order_p, knots, side="left") / (~absent).sum()
    return RocCurve(knots, fp, fn)


def calibrate_threshold(score_mats, truths, alpha):
    """Largest knot tau with eps_plus(tau) <= alpha, and its (eps_plus, eps_minus).

    Returns (tau, eps_plus, eps_minus, roc).
    """
    if not 0 < alpha <= 1:
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    roc = roc_curve(score_mats, truths)
    ok = np.flatnonzero(roc.eps_plus <= alpha)
    if len(ok) == 0:
        raise CalibrationError(f"no threshold reaches eps_plus <= {alpha}")
    k = ok[-1]
    return float(roc.tau[k]), float(roc.eps_plus[k]), float(roc.eps_minus[k]), roc
