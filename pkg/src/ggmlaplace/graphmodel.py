"""Graph structures over ``p`` vertices and the free-entry index set they induce.

Vertices are 0-based in memory. The text edge-list format (and every JSON
report) is 1-based, one ``i j`` pair per line with ``i < j``.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np

from .errors import TooLarge

ENUMERATION_LIMIT = 30


def n_pairs(p):
    return p * (p - 1) // 2


@dataclass(frozen=True)
class Graph:
    """Undirected graph as a sorted tuple of ``(i, j)`` pairs with ``i < j``."""

    p: int
    edges: tuple = ()

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        clean = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i > j:
                i, j = j, i
            if i == j or i < 0 or j >= self.p:
                raise ValueError(f"invalid edge {e!r} for p={self.p}")
            clean.add((i, j))
        if len(clean) != len(self.edges):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    @classmethod
    def empty(cls, p):
        return cls(p, ())

    @classmethod
    def complete(cls, p):
        return cls(p, tuple(combinations(range(p), 2)))

    @classmethod
    def from_adjacency(cls, adj, tol=0.0):
        a = np.asarray(adj)
        p = a.shape[0]
        iu, ju = np.triu_indices(p, 1)
        keep = np.abs(a[iu, ju]) > tol
        return cls(p, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def edge_set(self):
        return frozenset(self.edges)

    def __contains__(self, edge):
        i, j = edge
        return (min(i, j), max(i, j)) in self.edge_set

    def toggle(self, edge):
        i, j = min(edge), max(edge)
        if (i, j) in self.edge_set:
            return Graph(self.p, tuple(e for e in self.edges if e != (i, j)))
        return Graph(self.p, self.edges + ((i, j),))

    def without(self, edges):
        drop = {(min(e), max(e)) for e in edges}
        return Graph(self.p, tuple(e for e in self.edges if e not in drop))

    def adjacency(self):
        a = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def to_list(self):
        """1-based edge list, as written to reports."""
        return [[i + 1, j + 1] for i, j in self.edges]


def is_submodel(sub, sup):
    if sub.p != sup.p:
        raise ValueError("graphs have different vertex counts")
    return sub.edge_set <= sup.edge_set


def enumerate_all(p, max_edges=None):
    """Yield every graph on ``p`` vertices with at most ``max_edges`` edges.

    Ordered by edge count, then lexicographically.
    """
    m = n_pairs(p)
    if m > ENUMERATION_LIMIT:
        raise TooLarge(f"p={p} gives {m} vertex pairs; enumeration is limited to {ENUMERATION_LIMIT}")
    if max_edges is None:
        max_edges = m
    pairs = list(combinations(range(p), 2))
    for k in range(min(max_edges, m) + 1):
        for subset in combinations(pairs, k):
            yield Graph(p, subset)


def count_graphs(p, max_edges):
    m = n_pairs(p)
    return sum(comb(m, k) for k in range(min(max_edges, m) + 1))


@dataclass(frozen=True)
class FreeIndexSet:
    """Free entries of a precision matrix supported on a graph.

    All ``p`` diagonal positions come first, then the edges in sorted order.
    ``mult`` is the number of matrix cells each coordinate controls (1 on the
    diagonal, 2 off it).
    """

    p: int
    pairs: tuple

    @classmethod
    def of(cls, g):
        return cls(g.p, tuple((i, i) for i in range(g.p)) + g.edges)

    def __len__(self):
        return len(self.pairs)

    @cached_property
    def rows(self):
        return np.array([a for a, _ in self.pairs], dtype=np.intp)

    @cached_property
    def cols(self):
        return np.array([b for _, b in self.pairs], dtype=np.intp)

    @cached_property
    def mult(self):
        return np.where(self.rows == self.cols, 1.0, 2.0)

    @cached_property
    def is_diag(self):
        return self.rows == self.cols

    def vec(self, m):
        return np.asarray(m)[self.rows, self.cols].astype(float)

    def unvec(self, x):
        out = np.zeros((self.p, self.p))
        out[self.rows, self.cols] = x
        out[self.cols, self.rows] = x
        return out


def embedding_basis(idx):
    """The symmetric unit matrices ``E_(i,j)`` for every pair in ``idx``."""
    basis = []
    for i, j in idx.pairs:
        e = np.zeros((idx.p, idx.p))
        e[i, j] = e[j, i] = 1.0
        basis.append(e)
    return basis


def format_edge_list(g):
    return "".join(f"{i + 1} {j + 1}\n" for i, j in g.edges)


def parse_edge_list(text, p):
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
        i, j = int(parts[0]), int(parts[1])
        if not 1 <= i < j <= p:
            raise ValueError(f"line {lineno}: need 1 <= i < j <= {p}, got {i} {j}")
        edges.append((i - 1, j - 1))
    return Graph(p, tuple(edges))
