"""Linear Gaussian structural equation models X = A X + eps, eps ~ N(0, sigma^2 I)."""

from dataclasses import dataclass, field

import numpy as np

from .dags import DagStructure
from .errors import InvalidInputError

MIN_WEIGHT = 1e-6


def assemble(structure, weights):
    """Coefficient matrix A with A[j, i] = weights[(i, j)] for every edge i -> j."""
    edges = set(structure.edges())
    keys = set(weights)
    if keys != edges:
        missing = sorted(edges - keys)
        extra = sorted(keys - edges)
        raise InvalidInputError(f"weight keys must match edges; missing={missing} extra={extra}")
    A = np.zeros((structure.d, structure.d))
    for (i, j), w in weights.items():
        if w == 0 or not np.isfinite(w):
            raise InvalidInputError(f"weight on edge {i}->{j} must be finite and nonzero, got {w}")
        A[j, i] = w
    return A


def structure_of(A):
    """Binary support of A, validated as a DAG."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {A.shape}")
    return DagStructure((A != 0).astype(np.uint8))


def neumann_inverse(A):
    """(I - A)^{-1} as the finite sum of A^k, k < d; exact for nilpotent A."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    out = np.eye(d)
    term = np.eye(d)
    for _ in range(d - 1):
        term = term @ A
        out = out + term
    return out


@dataclass(frozen=True)
class WeightedSem:
    structure: DagStructure
    weights: dict
    sigma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"sigma must be positive, got {self.sigma}")
        weights = {(int(i), int(j)): float(w) for (i, j), w in self.weights.items()}
        for e, w in weights.items():
            if abs(w) < MIN_WEIGHT:
                raise InvalidInputError(
                    f"|weight| on edge {e[0]}->{e[1]} is below {MIN_WEIGHT} (causal minimality)")
        A = assemble(self.structure, weights)
        A.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_matrix", A)

    @classmethod
    def from_matrix(cls, A, sigma=1.0):
        A = np.asarray(A, dtype=float)
        s = structure_of(A)
        return cls(s, {(i, j): A[j, i] for i, j in s.edges()}, sigma)

    @classmethod
    def binary(cls, structure, sigma=1.0):
        """All edge weights fixed at 1, so A equals the structure matrix."""
        return cls(structure, {e: 1.0 for e in structure.edges()}, sigma)

    @property
    def matrix(self):
        return self._matrix

    @property
    def d(self):
        return self.structure.d

    def __hash__(self):
        return hash((self.structure, tuple(sorted(self.weights.items())), self.sigma))


def _gram(samples):
    return samples.T @ samples


@dataclass(frozen=True, eq=False)
class Dataset:
    """n samples of dimension d plus the cached Gram matrix sum_i X_i X_i^T.

    ``samples`` may be None for datasets built from streamed sufficient
    statistics; every posterior routine only reads ``gram`` and ``n``.
    """

    samples: np.ndarray | None
    gram: np.ndarray = field(default=None)
    n: int = field(default=None)

    def __post_init__(self):
        if self.samples is not None:
            x = np.array(self.samples, dtype=float)
            if x.ndim != 2 or x.shape[1] < 1:
                raise InvalidInputError(f"samples must be an n x d array, got shape {x.shape}")
            x.setflags(write=False)
            object.__setattr__(self, "samples", x)
            if self.gram is None:
                object.__setattr__(self, "gram", _gram(x))
            object.__setattr__(self, "n", x.shape[0])
        elif self.gram is None or self.n is None:
            raise InvalidInputError("a Dataset needs samples or (gram, n)")
        g = np.array(self.gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise InvalidInputError(f"gram must be square, got shape {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    @classmethod
    def from_gram(cls, gram, n):
        return cls(None, gram=gram, n=int(n))

    @property
    def d(self):
        return self.gram.shape[0]

    def recomputed_gram(self):
        if self.samples is None:
            raise InvalidInputError("dataset holds no raw samples")
        return _gram(self.samples)

    def permuted(self, rng):
        if self.samples is None:
            raise InvalidInputError("dataset holds no raw samples")
        return Dataset(self.samples[rng.permutation(self.n)])


class GramAccumulator:
    """Streaming Gram matrix with O(d^2) state."""

    def __init__(self, d):
        self.d = d
        self.n = 0
        self.gram = np.zeros((d, d))

    def update(self, chunk):
        chunk = np.asarray(chunk, dtype=float)
        if chunk.ndim != 2 or chunk.shape[1] != self.d:
            raise InvalidInputError(f"chunk must be (m, {self.d}), got {chunk.shape}")
        self.gram += chunk.T @ chunk
        self.n += chunk.shape[0]

    def snapshot(self):
        return Dataset.from_gram(self.gram.copy(), self.n)


def draw_samples(sem, n, rng):
    """Return (X, eps) with X_i = (I - A)^{-1} eps_i, both n x d."""
    eps = rng.standard_normal((int(n), sem.d)) * sem.sigma
    return eps @ neumann_inverse(sem.matrix).T, eps


def sample_dataset(sem, n, rng):
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    return Dataset(draw_samples(sem, n, rng)[0])


def _matrix_of(model):
    if isinstance(model, WeightedSem):
        return model.matrix
    return np.asarray(model, dtype=float)


def kl_divergence(p_model, q_model):
    """KL(P_{A'} || P_A) = (||(I - A)(I - A')^{-1}||_F^2 - d) / 2 for equal sigma.

    ``p_model`` is A' (the law the expectation is taken under), ``q_model`` is A.
    Either may be a WeightedSem or a plain coefficient matrix.
    """
    Ap = _matrix_of(p_model)
    A = _matrix_of(q_model)
    if Ap.shape != A.shape:
        raise InvalidInputError(f"dimension mismatch: {Ap.shape} vs {A.shape}")
    if isinstance(p_model, WeightedSem) and isinstance(q_model, WeightedSem):
        if p_model.sigma != q_model.sigma:
            raise InvalidInputError("kl_divergence assumes a common noise sigma")
    d = A.shape[0]
    M = (np.eye(d) - A) @ neumann_inverse(Ap)
    kl = 0.5 * (float(np.sum(M * M)) - d)
    return 0.0 if -1e-12 < kl < 0.0 else kl


def random_weights(structure, rng, min_abs=MIN_WEIGHT):
    """Independent N(0, 1) weight per edge, redrawn while |w| < min_abs."""
    out = {}
    for e in structure.edges():
        w = rng.standard_normal()
        while abs(w) < min_abs:
            w = rng.standard_normal()
        out[e] = float(w)
    return out


def reference_truths():
    """The two three-node truths used in the convergence experiments.

    Returns (maximal, non_maximal): A1 has edges 2->1, 3->1, 2->3 (1-indexed),
    A2 has the single edge 1->3 with weight 1.25.
    """
    A1 = np.array([[0.0, 1.77, -0.35],
                   [0.0, 0.0, 0.0],
                   [0.0, 0.26, 0.0]])
    A2 = np.array([[0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0],
                   [1.25, 0.0, 0.0]])
    return WeightedSem.from_matrix(A1), WeightedSem.from_matrix(A2)
