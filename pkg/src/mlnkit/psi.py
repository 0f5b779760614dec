"""Per-layer analysis: Louvain communities, degree and closeness centrality, hubs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import ConfigError, DegenerateUniverse, PartitionMismatch
from .graph import (
    COMPLEMENT_EDGE_BUDGET,
    AnyGraph,
    ComplementGraph,
    Graph,
    Partition,
    as_materialized,
    bfs_distances,
)
from .model import PsiKind


@dataclass(frozen=True, eq=False)
class CommunitySet:
    """A partition of one layer's universe into communities.

    Isolated or otherwise unclustered vertices sit in singleton blocks, so
    ``partition`` always covers the universe. ``support`` is set on composed
    results and holds the edge set the communities were cut from.
    """

    layer_id: str
    partition: Partition
    modularity: float
    support: Graph | None = None

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def communities(self) -> list[np.ndarray]:
        return self.partition.blocks

    def nontrivial(self) -> list[tuple[int, np.ndarray]]:
        """``(community_id, members)`` for every block with at least two vertices."""
        return [(i, b) for i, b in enumerate(self.partition.blocks) if b.size >= 2]

    def __eq__(self, other) -> bool:
        return (isinstance(other, CommunitySet) and self.partition == other.partition
                and self.modularity == other.modularity)

    def __len__(self) -> int:
        return self.partition.n_blocks


@dataclass(frozen=True, eq=False)
class NodeScores:
    layer_id: str
    metric: PsiKind
    scores: np.ndarray

    def __eq__(self, other) -> bool:
        return (isinstance(other, NodeScores) and self.metric == other.metric
                and np.array_equal(self.scores, other.scores))


@dataclass(frozen=True)
class HubRule:
    """``top_k`` (count), ``threshold`` (score floor) or ``top_pct`` (percent of universe)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("top_k", "threshold", "top_pct"):
            raise ConfigError(f"unknown hub rule {self.kind!r}")
        if self.kind == "top_k" and (int(self.value) != self.value or self.value < 1):
            raise ConfigError(f"top_k needs an integer >= 1, got {self.value}")
        if self.kind == "top_pct" and not 0 < self.value <= 100:
            raise ConfigError(f"top_pct must lie in (0, 100], got {self.value}")

    def __str__(self) -> str:
        v = int(self.value) if self.kind == "top_k" else self.value
        return f"{self.kind}={v}"


TOP_DECILE = HubRule("top_pct", 10.0)


@dataclass(frozen=True, eq=False)
class HubSet:
    layer_id: str
    metric: PsiKind
    rule: HubRule
    members: np.ndarray  # ranked: best score first, ties by ascending id

    def as_set(self) -> frozenset[int]:
        return frozenset(self.members.tolist())

    def __eq__(self, other) -> bool:
        return isinstance(other, HubSet) and np.array_equal(self.members, other.members)


# -- modularity ---------------------------------------------------------------

def modularity(g: AnyGraph, p: Partition, resolution: float = 1.0) -> float:
    """Newman modularity of ``p`` on ``g``; 0 for an edgeless graph."""
    if p.n != g.universe_size:
        raise PartitionMismatch(f"partition covers {p.n} vertices, graph has {g.universe_size}")
    g = as_materialized(g)
    m = g.num_edges
    if m == 0:
        return 0.0
    e = g.edge_array()
    lab = p.labels
    nb = p.n_blocks
    same = lab[e[:, 0]] == lab[e[:, 1]]
    intra = np.bincount(lab[e[same, 0]], minlength=nb).astype(float)
    deg = np.bincount(lab, weights=g.degrees(), minlength=nb)
    return float(np.sum(intra / m - resolution * (deg / (2.0 * m)) ** 2))


# -- Louvain ------------------------------------------------------------------

def _level(nbrs, wts, k, m, resolution, min_gain, sweep_tol):
    """One local-moving phase. Returns (community per node, moved?)."""
    n = len(k)
    comm = list(range(n))
    tot = list(k)
    two_m = 2.0 * m
    moved_any = False
    improved = True
    while improved:
        improved = False
        sweep_gain = 0.0
        for i in range(n):
            ci = comm[i]
            ki = k[i]
            links: dict[int, float] = {}
            for j, w in zip(nbrs[i], wts[i]):
                c = comm[j]
                links[c] = links.get(c, 0.0) + w
            tot[ci] -= ki
            scale = resolution * ki / two_m
            own = links.get(ci, 0.0) - tot[ci] * scale
            best, best_gain = ci, -math.inf
            # equivalent to scanning candidates in ascending id with strict >
            for c, kin in links.items():
                if c == ci:
                    continue
                gain = kin - tot[c] * scale
                if gain > best_gain or (gain == best_gain and c < best):
                    best, best_gain = c, gain
            # gains above are scaled by m
            delta = (best_gain - own) / m
            if best != ci and delta > min_gain:
                comm[i] = best
                tot[best] += ki
                sweep_gain += delta
                improved = moved_any = True
            else:
                tot[ci] += ki
        if sweep_gain < sweep_tol:
            break
    return comm, moved_any


def _aggregate(u, v, w, self_w, labels, n_new):
    cu, cv = labels[u], labels[v]
    inside = cu == cv
    new_self = np.bincount(labels, weights=self_w, minlength=n_new)
    new_self += np.bincount(cu[inside], weights=w[inside], minlength=n_new)
    a, b = np.minimum(cu[~inside], cv[~inside]), np.maximum(cu[~inside], cv[~inside])
    keys, inv = np.unique(a * n_new + b, return_inverse=True)
    new_w = np.bincount(inv, weights=w[~inside]) if keys.size else np.empty(0)
    return keys // max(n_new, 1), keys % max(n_new, 1), new_w, new_self


def _adjacency_lists(n, u, v, w):
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    ww = np.concatenate([w, w])
    order = np.lexsort((dst, src))
    src, dst, ww = src[order], dst[order], ww[order]
    cuts = np.searchsorted(src, np.arange(n + 1))
    dl, wl = dst.tolist(), ww.tolist()
    return ([dl[cuts[i]:cuts[i + 1]] for i in range(n)],
            [wl[cuts[i]:cuts[i + 1]] for i in range(n)])


def louvain_partition(g: AnyGraph, resolution: float = 1.0, min_gain: float = 1e-9,
                      sweep_tol: float = 1e-7, max_edges: int | None = COMPLEMENT_EDGE_BUDGET) -> Partition:
    """Deterministic multi-level Louvain.

    Vertices are visited in ascending id order; candidate communities are
    tried in ascending id order and the first one reaching the best gain is
    taken; a vertex moves only when that beats staying by more than
    ``min_gain``. A level ends after a full sweep whose summed modularity
    gain is below ``sweep_tol``. Coarsened nodes are numbered by their
    smallest member.
    """
    g = as_materialized(g, max_edges)
    n = g.universe_size
    if n == 0:
        return Partition.from_labels(np.empty(0, dtype=np.int64))
    labels = np.arange(n, dtype=np.int64)
    if g.num_edges == 0:
        return Partition.from_labels(labels)
    e = g.edge_array()
    u, v, w = e[:, 0], e[:, 1], np.ones(e.shape[0])
    self_w = np.zeros(n)
    m = float(g.num_edges)
    size = n
    q_prev = modularity(g, Partition.from_labels(labels), resolution)
    while True:
        nbrs, wts = _adjacency_lists(size, u, v, w)
        k = (np.bincount(u, weights=w, minlength=size) + np.bincount(v, weights=w, minlength=size)
             + 2.0 * self_w).tolist()
        comm, moved = _level(nbrs, wts, k, m, resolution, min_gain, sweep_tol)
        if not moved:
            break
        level_part = Partition.from_labels(comm)
        labels = level_part.labels[labels]
        q = modularity(g, Partition.from_labels(labels), resolution)
        assert q >= q_prev - 1e-9, f"modularity decreased across levels: {q_prev} -> {q}"
        q_prev = q
        size = level_part.n_blocks
        u, v, w, self_w = _aggregate(u, v, w, self_w, level_part.labels, size)
        if u.size == 0:
            break
    return Partition.from_labels(labels)


def louvain(g: AnyGraph, resolution: float = 1.0, min_gain: float = 1e-9, layer_id: str = "",
            sweep_tol: float = 1e-7, max_edges: int | None = COMPLEMENT_EDGE_BUDGET) -> CommunitySet:
    p = louvain_partition(g, resolution, min_gain, sweep_tol, max_edges)
    return CommunitySet(layer_id, p, modularity(as_materialized(g, max_edges), p, resolution))


# -- centrality ---------------------------------------------------------------

def degree_centrality(g: AnyGraph, layer_id: str = "") -> NodeScores:
    n = g.universe_size
    if n < 2:
        raise DegenerateUniverse(f"degree centrality needs at least 2 vertices, got {n}")
    return NodeScores(layer_id, PsiKind.DEGREE, g.degrees().astype(float) / (n - 1))


def _wf(r: np.ndarray, total: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(r.shape, dtype=float)
    ok = (r > 1) & (total > 0)
    rr = r[ok] - 1.0
    out[ok] = (rr / (n - 1)) * (rr / total[ok])
    return out


def closeness(g: AnyGraph, layer_id: str = "", chunk: int = 512,
              max_edges: int | None = COMPLEMENT_EDGE_BUDGET) -> NodeScores:
    """Wasserman-Faust closeness, well defined on disconnected graphs.

    ``C(v) = ((r - 1) / (n - 1)) * ((r - 1) / sum of distances to reachable
    vertices)`` where ``r`` counts vertices reachable from ``v`` including
    itself. Isolated vertices score 0; on a connected graph this is the
    usual ``(n - 1) / sum of distances``.
    """
    n = g.universe_size
    if n < 2:
        return NodeScores(layer_id, PsiKind.CLOSENESS, np.zeros(n))
    if isinstance(g, ComplementGraph) and (max_edges is None or g.num_edges <= max_edges):
        g = g.materialize(max_edges)
    if isinstance(g, ComplementGraph):
        r = np.empty(n)
        tot = np.empty(n)
        for s in range(n):
            d = bfs_distances(g, s)
            reach = d >= 0
            r[s], tot[s] = reach.sum(), d[reach].sum()
        return NodeScores(layer_id, PsiKind.CLOSENESS, _wf(r, tot, n))
    adj = g.adjacency()
    r = np.empty(n)
    tot = np.empty(n)
    for s in range(0, n, chunk):
        idx = np.arange(s, min(s + chunk, n))
        d = csgraph.shortest_path(adj, directed=False, unweighted=True, indices=idx)
        fin = np.isfinite(d)
        r[idx] = fin.sum(axis=1)
        tot[idx] = np.where(fin, d, 0.0).sum(axis=1)
    return NodeScores(layer_id, PsiKind.CLOSENESS, _wf(r, tot, n))


def rank_vertices(scores: np.ndarray) -> np.ndarray:
    """Vertex ids by descending score, ties by ascending id."""
    return np.lexsort((np.arange(scores.size), -scores))


def extract_hubs(scores: NodeScores, rule: HubRule) -> HubSet:
    order = rank_vertices(scores.scores)
    if rule.kind == "threshold":
        members = order[scores.scores[order] >= rule.value]
    else:
        k = int(rule.value) if rule.kind == "top_k" else math.ceil(rule.value / 100.0 * scores.scores.size)
        members = order[:k]
    return HubSet(scores.layer_id, scores.metric, rule, members.astype(np.int64))


def compute_psi(g: AnyGraph, kind: PsiKind, layer_id: str = "", resolution: float = 1.0,
                min_gain: float = 1e-9, sweep_tol: float = 1e-7):
    kind = PsiKind(kind)
    if kind is PsiKind.COMMUNITY:
        return louvain(g, resolution, min_gain, layer_id, sweep_tol)
    if kind is PsiKind.DEGREE:
        return degree_centrality(g, layer_id)
    return closeness(g, layer_id)
