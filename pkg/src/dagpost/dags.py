"""DAG structures over d labeled nodes.

Convention used everywhere in the package: ``adj[j, i] == 1`` means i is a
parent of j (the edge i -> j). Row j therefore lists the parents of node j.
Nodes are 0-indexed.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _chain
from .errors import CapacityError, InvalidInputError

D_MAX = 5


def _as_binary_square(adj):
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise InvalidInputError("adjacency entries must be 0 or 1")
    if np.any(np.diag(a) != 0):
        raise InvalidInputError("adjacency must have a zero diagonal")
    return a.astype(np.uint8)


def is_acyclic(adj):
    """True iff the binary matrix has no directed cycle."""
    a = _as_binary_square(adj).astype(np.int64)
    # Kahn: peel off nodes without remaining parents.
    remaining = np.ones(a.shape[0], dtype=bool)
    indeg = a.sum(axis=1)
    while remaining.any():
        sources = remaining & (indeg == 0)
        if not sources.any():
            return False
        remaining &= ~sources
        indeg = indeg - a[:, sources].sum(axis=1)
    return True


@dataclass(frozen=True, eq=False)
class DagStructure:
    """Binary adjacency matrix of a DAG; immutable and hashable."""

    adj: np.ndarray

    def __post_init__(self):
        a = _as_binary_square(self.adj)
        if not is_acyclic(a):
            raise InvalidInputError("adjacency contains a directed cycle")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "adj", a)

    @classmethod
    def _trusted(cls, adj):
        # Skips validation; only for matrices produced by this package.
        obj = object.__new__(cls)
        a = np.array(adj, dtype=np.uint8)
        a.setflags(write=False)
        object.__setattr__(obj, "adj", a)
        return obj

    @classmethod
    def empty(cls, d):
        return cls(np.zeros((d, d), dtype=np.uint8))

    @classmethod
    def from_edges(cls, d, edges):
        """Build from an iterable of (parent, child) pairs."""
        a = np.zeros((d, d), dtype=np.uint8)
        for i, j in edges:
            a[j, i] = 1
        return cls(a)

    @classmethod
    def from_string(cls, s):
        """Parse the row-major 0/1 string form, e.g. ``"011000010"``."""
        d = int(round(len(s) ** 0.5))
        if d * d != len(s) or set(s) - {"0", "1"}:
            raise InvalidInputError(f"not a square 0/1 adjacency string: {s!r}")
        return cls(np.array([int(c) for c in s], dtype=np.uint8).reshape(d, d))

    @classmethod
    def from_masks(cls, masks, validate=True):
        masks = np.asarray(masks, dtype=np.int64)
        a = ((masks[:, None] >> np.arange(len(masks), dtype=np.int64)) & 1).astype(np.uint8)
        return cls(a) if validate else cls._trusted(a)

    @property
    def d(self):
        return self.adj.shape[0]

    @property
    def n_edges(self):
        return int(self.adj.sum())

    def parents(self, j):
        return np.flatnonzero(self.adj[j])

    def edges(self):
        """Directed edges as (parent, child) pairs in row-major order."""
        js, is_ = np.nonzero(self.adj)
        return [(int(i), int(j)) for j, i in zip(js, is_)]

    def masks(self):
        """Parent bitmask per node (bit i of entry j set iff i -> j)."""
        weights = 1 << np.arange(self.d, dtype=np.int64)
        return (self.adj.astype(np.int64) * weights).sum(axis=1)

    def to_string(self):
        return "".join(str(int(v)) for v in self.adj.ravel())

    def __eq__(self, other):
        if not isinstance(other, DagStructure):
            return NotImplemented
        return self.adj.shape == other.adj.shape and bool(np.array_equal(self.adj, other.adj))

    def __hash__(self):
        return hash((self.d, self.adj.tobytes()))

    def __repr__(self):
        return f"DagStructure({self.to_string()!r})"


@dataclass(frozen=True, order=True)
class EdgePair:
    """Unordered node pair, stored with i > j."""

    i: int
    j: int

    def __post_init__(self):
        if not (0 <= self.j < self.i):
            raise InvalidInputError(f"EdgePair needs 0 <= j < i, got ({self.i}, {self.j})")


def all_pairs(d):
    return [EdgePair(i, j) for i in range(d) for j in range(i)]


def _check_cap(d, cap):
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    if d > cap:
        raise CapacityError("d", d, cap)


@lru_cache(maxsize=None)
def _enumerate_adj(d):
    offdiag = [(r, c) for r in range(d) for c in range(d) if r != c]
    m = len(offdiag)
    rows = [r for r, _ in offdiag]
    cols = [c for _, c in offdiag]
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    kept = []
    chunk = 1 << 16
    for start in range(0, 2 ** m, chunk):
        # Most significant bit = first row-major position, so numeric order of
        # the codes is lexicographic order of the flattened adjacency.
        codes = np.arange(start, min(start + chunk, 2 ** m), dtype=np.int64)
        adj = np.zeros((len(codes), d, d), dtype=np.uint8)
        adj[:, rows, cols] = (codes[:, None] >> shifts) & 1
        power = adj.copy()
        for _ in range(d - 1):
            power = np.minimum(power @ adj, 1).astype(np.uint8)
        kept.append(adj[~power.reshape(len(adj), -1).any(axis=1)])
    out = np.concatenate(kept)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _enumerate_cached(d):
    return tuple(DagStructure._trusted(a) for a in _enumerate_adj(d))


def enumerate_dags(d, cap=D_MAX):
    """All labeled DAGs on d nodes in lexicographic order of the flattened adjacency."""
    _check_cap(d, cap)
    return list(_enumerate_cached(d))


def enumerated_adjacency(d, cap=D_MAX):
    """Stacked (|G_d|, d, d) adjacency array in the same order as ``enumerate_dags``."""
    _check_cap(d, cap)
    return _enumerate_adj(d)


@lru_cache(maxsize=None)
def _mask_table(d):
    adj = _enumerate_adj(d).astype(np.int64)
    out = (adj * (1 << np.arange(d, dtype=np.int64))).sum(axis=2)
    out.setflags(write=False)
    return out


def enumerated_masks(d, cap=D_MAX):
    """(|G_d|, d) parent bitmasks in enumeration order."""
    _check_cap(d, cap)
    return _mask_table(d)


def model_index(d):
    """Map from DagStructure to its position in ``enumerate_dags(d)``."""
    return {s: k for k, s in enumerate(enumerate_dags(d))}


def is_maximal(s):
    """No edge can be added without a cycle; same as having d(d-1)/2 edges."""
    return s.n_edges == s.d * (s.d - 1) // 2


def neighbors(s):
    """DAGs differing from s in exactly one entry, in row-major toggle order."""
    out = []
    for j in range(s.d):
        for i in range(s.d):
            if i == j:
                continue
            a = s.adj.copy()
            a[j, i] ^= 1
            if is_acyclic(a):
                out.append(DagStructure._trusted(a))
    return out


def is_subgraph(s, t):
    if s.d != t.d:
        raise InvalidInputError(f"dimension mismatch: {s.d} vs {t.d}")
    return bool(np.all(s.adj <= t.adj))


def skeleton(s):
    """Undirected support adj + adj^T."""
    return (s.adj + s.adj.T).astype(np.uint8)


def sample_uniform_dag(d, rng, burn_in=None, cap=D_MAX):
    """Draw a DAG uniformly from G_d.

    Exact for d <= cap (indexes the enumeration). Above the cap this runs a
    Metropolis chain with uniform target and toggle proposals for ``burn_in``
    steps (default 50 d^2), so the draw is only approximately uniform.
    """
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    if d <= cap:
        models = _enumerate_cached(d)
        return models[int(rng.integers(len(models)))]
    if d > _chain.MAX_KERNEL_D:
        raise CapacityError("d", d, _chain.MAX_KERNEL_D)
    steps = 50 * d * d if burn_in is None else int(burn_in)
    table = np.zeros((d, 2 ** d))
    par = np.zeros(d, dtype=np.int64)
    u_prop = rng.random(steps)
    u_acc = rng.random(steps)
    dummy_states = np.zeros((1, d), dtype=np.int64)
    dummy_scores = np.zeros(1)
    counts = np.zeros((d, d), dtype=np.int64)
    # burn_in == steps: nothing is recorded, we just read the final state.
    _chain.run_segment(table, par, 0.0, d * (d - 1), u_prop, u_acc, 0, steps, 1,
                       True, dummy_states, dummy_scores, 0, counts)
    return DagStructure.from_masks(par)


def robinson_count(d):
    """Number of labeled DAGs on d nodes by Robinson's recurrence."""
    from math import comb

    a = [1]
    for m in range(1, d + 1):
        a.append(sum((-1) ** (k + 1) * comb(m, k) * 2 ** (k * (m - k)) * a[m - k]
                     for k in range(1, m + 1)))
    return a[d]
