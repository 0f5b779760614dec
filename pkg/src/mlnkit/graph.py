"""Undirected simple graphs over a fixed vertex universe.

A :class:`Graph` stores its edges as a sorted array of integer keys
``u * n + v`` with ``u < v``. Boolean composition (AND / OR) is then a sorted
merge of two key arrays, and the CSR adjacency (sorted neighbour lists) is
derived lazily for traversal.

:class:`ComplementGraph` is a lazy view answering adjacency as the negation
of its base graph. The Boolean algebra is closed over both kinds, so a NOT
layer composed with AND / OR never needs to be materialized::

    intersect(g, ~h)  == g minus h            (materialized)
    union(g, ~h)      == ~(h minus g)         (view)
    intersect(~a, ~b) == ~(a | b)             (view)
    union(~a, ~b)     == ~(a & b)             (view)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import ComplementTooLarge, EndpointOutOfRange, SelfLoop, UniverseMismatch

UNREACHABLE = -1

# default edge budget for implicit complement materialization
COMPLEMENT_EDGE_BUDGET = 5_000_000


def _decode(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 0:
        return keys.copy(), keys.copy()
    return keys // n, keys % n


class Graph:
    """Materialized undirected simple graph.

    Parameters
    ----------
    universe_size : int
        Number of vertices; vertex ids are ``0 .. universe_size - 1``.
    keys : ndarray of int64
        Sorted, unique edge keys ``u * n + v`` with ``u < v``. Use
        :func:`from_edge_list` rather than passing keys by hand.
    """

    kind = "materialized"

    def __init__(self, universe_size: int, keys: np.ndarray | None = None):
        self.universe_size = int(universe_size)
        if keys is None:
            keys = np.empty(0, dtype=np.int64)
        self._keys = np.ascontiguousarray(keys, dtype=np.int64)
        self._keys.setflags(write=False)
        self._hash: str | None = None

    # -- basic accessors ----------------------------------------------------

    @property
    def n(self) -> int:
        return self.universe_size

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @property
    def num_edges(self) -> int:
        return int(self._keys.size)

    def edge_array(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array with ``u < v``, lexicographically sorted."""
        u, v = _decode(self._keys, self.universe_size)
        return np.column_stack([u, v]) if u.size else np.empty((0, 2), dtype=np.int64)

    def edges(self) -> list[tuple[int, int]]:
        return [(int(u), int(v)) for u, v in self.edge_array()]

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.universe_size
        u, v = _decode(self._keys, n)
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        indptr.setflags(write=False)
        dst.setflags(write=False)
        return indptr, dst

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices = self._csr
        return indices[indptr[v]:indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        indptr, _ = self._csr
        return np.diff(indptr)

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        if u > v:
            u, v = v, u
        key = u * self.universe_size + v
        i = np.searchsorted(self._keys, key)
        return bool(i < self._keys.size and self._keys[i] == key)

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix (float64)."""
        indptr, indices = self._csr
        data = np.ones(indices.size, dtype=np.float64)
        n = self.universe_size
        return sp.csr_matrix((data, indices, indptr), shape=(n, n))

    def materialize(self, max_edges: int | None = None) -> "Graph":
        return self

    def content_hash(self) -> str:
        """SHA-256 over the universe size and edge keys; computed once."""
        if self._hash is None:
            h = hashlib.sha256()
            h.update(b"G:%d:" % self.universe_size)
            h.update(self._keys.tobytes())
            self._hash = h.hexdigest()
        return self._hash

    def __invert__(self) -> "ComplementGraph":
        return ComplementGraph(self)

    def __eq__(self, other) -> bool:
        if isinstance(other, ComplementGraph):
            return other == self
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.universe_size == other.universe_size
                and np.array_equal(self._keys, other._keys))

    def __hash__(self) -> int:
        return hash(self.content_hash())

    def __repr__(self) -> str:
        return f"Graph(n={self.universe_size}, m={self.num_edges})"


class ComplementGraph:
    """Lazy complement of a :class:`Graph` (self-loops excluded)."""

    kind = "complement-view"

    def __init__(self, base: Graph):
        if not isinstance(base, Graph):
            raise TypeError("complement view requires a materialized base graph")
        self.base = base
        self.universe_size = base.universe_size

    @property
    def n(self) -> int:
        return self.universe_size

    @property
    def num_edges(self) -> int:
        n = self.universe_size
        return n * (n - 1) // 2 - self.base.num_edges

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and not self.base.has_edge(u, v)

    def neighbors(self, v: int) -> np.ndarray:
        mask = np.ones(self.universe_size, dtype=bool)
        mask[self.base.neighbors(v)] = False
        mask[v] = False
        return np.flatnonzero(mask)

    def degrees(self) -> np.ndarray:
        return (self.universe_size - 1) - self.base.degrees()

    def materialize(self, max_edges: int | None = COMPLEMENT_EDGE_BUDGET) -> Graph:
        """Enumerate the complement's edges into a :class:`Graph`.

        Raises :class:`ComplementTooLarge` when the edge count exceeds
        ``max_edges`` (``None`` disables the budget).
        """
        m = self.num_edges
        if max_edges is not None and m > max_edges:
            raise ComplementTooLarge(
                f"complement of {self.base!r} has {m} edges (budget {max_edges}); "
                "materialize explicitly with a larger budget")
        n = self.universe_size
        iu, ju = np.triu_indices(n, k=1)
        all_keys = iu.astype(np.int64) * n + ju
        keys = np.setdiff1d(all_keys, self.base.keys, assume_unique=True)
        return Graph(n, keys)

    @property
    def keys(self) -> np.ndarray:
        return self.materialize().keys

    def edge_array(self) -> np.ndarray:
        return self.materialize().edge_array()

    def edges(self) -> list[tuple[int, int]]:
        return self.materialize().edges()

    def content_hash(self) -> str:
        return hashlib.sha256(b"NOT:" + self.base.content_hash().encode()).hexdigest()

    def __invert__(self) -> Graph:
        return self.base

    def __eq__(self, other) -> bool:
        if isinstance(other, ComplementGraph):
            return self.base == other.base
        if isinstance(other, Graph):
            return (self.universe_size == other.universe_size
                    and self.num_edges == other.num_edges
                    and np.array_equal(self.materialize(None).keys, other.keys))
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.content_hash())

    def __repr__(self) -> str:
        return f"ComplementGraph(n={self.universe_size}, m={self.num_edges})"


AnyGraph = Graph | ComplementGraph


@dataclass(frozen=True, eq=False)
class Partition:
    """Disjoint cover of ``0 .. n-1``; block ids ordered by smallest member."""

    labels: np.ndarray

    @classmethod
    def from_labels(cls, labels: Sequence[int] | np.ndarray) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            return cls(labels)
        # first occurrence order == order of smallest member
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        out = rank[inverse]
        out.setflags(write=False)
        return cls(out)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], n: int) -> "Partition":
        labels = np.full(n, -1, dtype=np.int64)
        for b, block in enumerate(blocks):
            idx = np.fromiter(block, dtype=np.int64)
            if idx.size == 0:
                raise ValueError("partition blocks must be non-empty")
            if np.any(labels[idx] >= 0):
                raise ValueError("partition blocks overlap")
            labels[idx] = b
        if np.any(labels < 0):
            raise ValueError("partition does not cover the universe")
        return cls.from_labels(labels)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def blocks(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        cuts = np.flatnonzero(np.diff(self.labels[order])) + 1
        return np.split(order, cuts) if order.size else []

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __hash__(self) -> int:
        return hash(self.labels.tobytes())


# -- construction -----------------------------------------------------------

def from_edge_list(pairs, universe_size: int) -> Graph:
    """Build a graph from ``(u, v)`` pairs.

    Duplicate pairs and both orientations collapse to one edge; a pair with
    ``u == v`` raises :class:`SelfLoop` and an endpoint outside the universe
    raises :class:`EndpointOutOfRange`.
    """
    n = int(universe_size)
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return Graph(n)
    arr = arr.reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        bad = arr[(arr < 0).any(axis=1) | (arr >= n).any(axis=1)][0]
        raise EndpointOutOfRange(f"edge ({bad[0]}, {bad[1]}) outside universe of size {n}")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        v = arr[loops][0, 0]
        raise SelfLoop(f"self-loop on vertex {v}")
    lo = arr.min(axis=1)
    hi = arr.max(axis=1)
    return Graph(n, np.unique(lo * n + hi))


def from_keys(keys: np.ndarray, universe_size: int) -> Graph:
    return Graph(universe_size, np.unique(np.asarray(keys, dtype=np.int64)))


def edgeless(universe_size: int) -> Graph:
    return Graph(universe_size)


def complete(universe_size: int) -> Graph:
    return ComplementGraph(Graph(universe_size)).materialize(None)


# -- Boolean edge-set algebra ----------------------------------------------

def _check_universe(g1, g2) -> None:
    if g1.universe_size != g2.universe_size:
        raise UniverseMismatch(
            f"universe sizes differ: {g1.universe_size} vs {g2.universe_size}")


def intersect(g1: AnyGraph, g2: AnyGraph) -> AnyGraph:
    """Edge set E1 AND E2."""
    _check_universe(g1, g2)
    n = g1.universe_size
    c1, c2 = isinstance(g1, ComplementGraph), isinstance(g2, ComplementGraph)
    if not c1 and not c2:
        return Graph(n, np.intersect1d(g1.keys, g2.keys, assume_unique=True))
    if c1 and c2:
        return ComplementGraph(union(g1.base, g2.base))
    g, h = (g2, g1) if c1 else (g1, g2)
    return Graph(n, np.setdiff1d(g.keys, h.base.keys, assume_unique=True))


def union(g1: AnyGraph, g2: AnyGraph) -> AnyGraph:
    """Edge set E1 OR E2."""
    _check_universe(g1, g2)
    n = g1.universe_size
    c1, c2 = isinstance(g1, ComplementGraph), isinstance(g2, ComplementGraph)
    if not c1 and not c2:
        return Graph(n, np.union1d(g1.keys, g2.keys))
    if c1 and c2:
        return ComplementGraph(intersect(g1.base, g2.base))
    g, h = (g2, g1) if c1 else (g1, g2)
    return ComplementGraph(Graph(n, np.setdiff1d(h.base.keys, g.keys, assume_unique=True)))


def complement(g: AnyGraph) -> AnyGraph:
    """Lazy complement; ``complement(complement(g))`` returns ``g`` itself."""
    if isinstance(g, ComplementGraph):
        return g.base
    return ComplementGraph(g)


def as_materialized(g: AnyGraph, max_edges: int | None = COMPLEMENT_EDGE_BUDGET) -> Graph:
    return g if isinstance(g, Graph) else g.materialize(max_edges)


# -- traversal --------------------------------------------------------------

def bfs_distances(g: AnyGraph, src: int) -> np.ndarray:
    """Unweighted hop counts from ``src``; unreachable vertices hold ``UNREACHABLE``."""
    n = g.universe_size
    if not 0 <= src < n:
        raise EndpointOutOfRange(f"source {src} outside universe of size {n}")
    dist = np.full(n, UNREACHABLE, dtype=np.int64)
    dist[src] = 0
    if isinstance(g, ComplementGraph):
        # complement BFS: scan the still-unvisited set, O(n + m)
        unvisited = set(range(n))
        unvisited.discard(src)
        frontier = [src]
        d = 0
        while frontier and unvisited:
            d += 1
            nxt = []
            for u in frontier:
                blocked = set(g.base.neighbors(u).tolist())
                reach = [w for w in unvisited if w not in blocked]
                for w in reach:
                    unvisited.discard(w)
                    dist[w] = d
                nxt.extend(reach)
            frontier = nxt
        return dist
    indptr, indices = g._csr
    frontier = np.array([src], dtype=np.int64)
    d = 0
    while frontier.size:
        d += 1
        starts, ends = indptr[frontier], indptr[frontier + 1]
        nbrs = np.concatenate([indices[s:e] for s, e in zip(starts, ends)]) if frontier.size else frontier
        nbrs = np.unique(nbrs)
        nbrs = nbrs[dist[nbrs] == UNREACHABLE]
        dist[nbrs] = d
        frontier = nbrs
    return dist


def connected_components(g: AnyGraph) -> Partition:
    """Maximal connected vertex sets, block ids by smallest member."""
    n = g.universe_size
    if n == 0:
        return Partition.from_labels(np.empty(0, dtype=np.int64))
    if isinstance(g, ComplementGraph):
        labels = np.full(n, -1, dtype=np.int64)
        unvisited = set(range(n))
        comp = 0
        for s in range(n):
            if labels[s] >= 0:
                continue
            unvisited.discard(s)
            labels[s] = comp
            stack = [s]
            while stack:
                u = stack.pop()
                blocked = set(g.base.neighbors(u).tolist())
                reach = [w for w in unvisited if w not in blocked]
                for w in reach:
                    unvisited.discard(w)
                    labels[w] = comp
                stack.extend(reach)
            comp += 1
        return Partition.from_labels(labels)
    _, labels = csgraph.connected_components(g.adjacency(), directed=False)
    return Partition.from_labels(labels)
