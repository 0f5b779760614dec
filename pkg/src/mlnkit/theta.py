"""Cross-layer composition of per-layer results.

Same-universe layers combine with Boolean operators: community AND keeps the
edges both layers agree on inside each block overlap, community OR re-runs
Louvain on the union graph, and hub sets combine as plain sets.

Layers over different universes combine by maximum weighted matching on a
bipartite graph of communities (meta-nodes), where a meta-edge weight counts
the inter-layer links between two communities. A :class:`MatchChain`
carries matched communities forward into further matchings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import AnchorNotInChain, ComplementTooLarge, LayerMismatch, UniverseMismatch
from .graph import (
    COMPLEMENT_EDGE_BUDGET,
    AnyGraph,
    ComplementGraph,
    Graph,
    connected_components,
    union,
)
from .model import InterLayerEdges, PsiKind, ThetaKind
from .psi import CommunitySet, HubSet, louvain, modularity


# -- community AND / OR -------------------------------------------------------

def _within_group_keys(g: Graph, groups: np.ndarray) -> np.ndarray:
    e = g.edge_array()
    same = groups[e[:, 0]] == groups[e[:, 1]]
    return g.keys[same]


def _all_group_pairs(groups: np.ndarray, n: int, budget: int | None) -> np.ndarray:
    order = np.lexsort((np.arange(n), groups))
    g = groups[order]
    cuts = np.flatnonzero(np.diff(g)) + 1
    blocks = [b for b in np.split(order, cuts) if b.size >= 2]
    total = sum(b.size * (b.size - 1) // 2 for b in blocks)
    if budget is not None and total > budget:
        raise ComplementTooLarge(f"composition needs {total} complement edges (budget {budget})")
    parts = []
    for b in blocks:
        i, j = np.triu_indices(b.size, 1)
        parts.append(b[i] * n + b[j])
    return np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)


def and_support(c1: CommunitySet, c2: CommunitySet, g1: AnyGraph, g2: AnyGraph,
                budget: int | None = COMPLEMENT_EDGE_BUDGET) -> Graph:
    """Edges present in both layers with both endpoints in one block of each partition."""
    n = c1.n
    if not (c2.n == n == g1.universe_size == g2.universe_size):
        raise UniverseMismatch("AND operands live on different vertex universes")
    nb2 = max(c2.partition.n_blocks, 1)
    groups = c1.partition.labels * nb2 + c2.partition.labels
    comp1, comp2 = isinstance(g1, ComplementGraph), isinstance(g2, ComplementGraph)
    if not comp1 and not comp2:
        keys = np.intersect1d(_within_group_keys(g1, groups), _within_group_keys(g2, groups),
                              assume_unique=True)
    elif comp1 and comp2:
        blocked = np.union1d(g1.base.keys, g2.base.keys)
        keys = np.setdiff1d(_all_group_pairs(groups, n, budget), blocked, assume_unique=True)
    else:
        mat, view = (g2, g1) if comp1 else (g1, g2)
        keys = np.setdiff1d(_within_group_keys(mat, groups), view.base.keys, assume_unique=True)
    return Graph(n, keys)


def and_communities(c1: CommunitySet, c2: CommunitySet, g1: AnyGraph, g2: AnyGraph,
                    layer_id: str = "") -> CommunitySet:
    """Communities both layers agree on.

    Vertices sharing a block in ``c1`` and a block in ``c2`` are candidates;
    among them only edges present in both ``g1`` and ``g2`` are kept, and
    each connected component of what remains (two or more vertices) is a
    result community. All other vertices end up in singleton blocks.
    """
    support = and_support(c1, c2, g1, g2)
    part = connected_components(support)
    label = layer_id or f"({c1.layer_id} AND {c2.layer_id})"
    return CommunitySet(label, part, modularity(support, part), support)


def or_communities(g1: AnyGraph, g2: AnyGraph, resolution: float = 1.0, min_gain: float = 1e-9,
                   layer_id: str = "", cache=None) -> CommunitySet:
    """Louvain on the union graph, optionally memoized through a result cache."""
    u = union(g1, g2)
    params = {"resolution": resolution, "min_gain": min_gain}
    if cache is not None:
        return cache.get(u, PsiKind.COMMUNITY, params, layer_id)
    return louvain(u, resolution, min_gain, layer_id)


# -- node sets ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NodeSet:
    """Ordered vertex set over a universe of ``universe_size`` vertices.

    ``scores`` optionally carries the full per-vertex scores the set was
    ranked by, for display.
    """

    label: str
    universe_size: int
    members: np.ndarray
    scores: np.ndarray | None = None

    @classmethod
    def of(cls, members: Iterable[int], universe_size: int, label: str = "") -> "NodeSet":
        seen: dict[int, None] = {}
        for m in members:
            seen.setdefault(int(m), None)
        return cls(label, universe_size, np.fromiter(seen, dtype=np.int64, count=len(seen)))

    @classmethod
    def from_hubs(cls, hubs: HubSet, universe_size: int) -> "NodeSet":
        return cls(f"hubs({hubs.layer_id};{hubs.rule})", universe_size, hubs.members.copy())

    def as_set(self) -> frozenset[int]:
        return frozenset(self.members.tolist())

    def __len__(self) -> int:
        return int(self.members.size)

    def __eq__(self, other) -> bool:
        return (isinstance(other, NodeSet) and self.universe_size == other.universe_size
                and np.array_equal(self.members, other.members))


def nodeset_compose(a, b, op) -> NodeSet | frozenset:
    """AND = intersection, OR = union, MINUS = difference.

    With two :class:`NodeSet` operands the left operand's order is kept and
    OR appends the right operand's new members; plain sets give a frozenset.
    """
    op = ThetaKind(op)
    if op is ThetaKind.MWM:
        raise ValueError("MWM does not apply to node sets")
    if isinstance(a, HubSet) or isinstance(b, HubSet):
        a = a.as_set() if isinstance(a, HubSet) else a
        b = b.as_set() if isinstance(b, HubSet) else b
    if isinstance(a, NodeSet) and isinstance(b, NodeSet):
        if a.universe_size != b.universe_size:
            raise UniverseMismatch("node sets live on different vertex universes")
        bs = b.as_set()
        if op is ThetaKind.AND:
            keep = [v for v in a.members.tolist() if v in bs]
        elif op is ThetaKind.MINUS:
            keep = [v for v in a.members.tolist() if v not in bs]
        else:
            keep = a.members.tolist() + b.members.tolist()
        return NodeSet.of(keep, a.universe_size, f"({a.label} {op.value} {b.label})")
    if isinstance(a, NodeSet) or isinstance(b, NodeSet):
        raise UniverseMismatch("cannot compose a NodeSet with an unsized vertex set")
    a, b = frozenset(a), frozenset(b)
    return {ThetaKind.AND: a & b, ThetaKind.OR: a | b, ThetaKind.MINUS: a - b}[op]


# -- matching -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MetaNode:
    layer_id: str
    community_id: int
    members: np.ndarray

    def key(self) -> tuple[str, int]:
        return (self.layer_id, self.community_id)

    def __eq__(self, other) -> bool:
        return isinstance(other, MetaNode) and self.key() == other.key() \
            and np.array_equal(self.members, other.members)

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"MetaNode({self.layer_id!r}, {self.community_id}, size={self.members.size})"


@dataclass(frozen=True)
class MetaEdge:
    left: int   # community id on the left layer
    right: int  # community id on the right layer
    weight: int


@dataclass(eq=False)
class BipartiteMetaGraph:
    left_layer: str
    right_layer: str
    left: list[MetaNode]
    right: list[MetaNode]
    meta_edges: list[MetaEdge]

    def weight_matrix(self) -> np.ndarray:
        li = {m.community_id: i for i, m in enumerate(self.left)}
        ri = {m.community_id: i for i, m in enumerate(self.right)}
        w = np.zeros((len(self.left), len(self.right)), dtype=np.int64)
        for e in self.meta_edges:
            w[li[e.left], ri[e.right]] = e.weight
        return w

    def total_weight(self) -> int:
        return int(sum(e.weight for e in self.meta_edges))


def meta_nodes(c: CommunitySet, layer_id: str | None = None,
               only: Iterable[int] | None = None) -> list[MetaNode]:
    """Communities of two or more vertices, optionally restricted to ids in ``only``."""
    keep = None if only is None else set(int(i) for i in only)
    lid = layer_id or c.layer_id
    return [MetaNode(lid, i, b) for i, b in c.nontrivial() if keep is None or i in keep]


def bipartite_from_nodes(left: list[MetaNode], right: list[MetaNode], links: np.ndarray,
                         n_left: int, n_right: int, left_layer: str, right_layer: str) -> BipartiteMetaGraph:
    """Count links between meta-nodes; ``links`` rows are (left vertex, right vertex)."""
    lab_l = np.full(n_left, -1, dtype=np.int64)
    lab_r = np.full(n_right, -1, dtype=np.int64)
    for i, m in enumerate(left):
        lab_l[m.members] = i
    for j, m in enumerate(right):
        lab_r[m.members] = j
    edges: list[MetaEdge] = []
    if links.size and left and right:
        a, b = lab_l[links[:, 0]], lab_r[links[:, 1]]
        ok = (a >= 0) & (b >= 0)
        keys, counts = np.unique(a[ok] * len(right) + b[ok], return_counts=True)
        for k, c in zip(keys.tolist(), counts.tolist()):
            i, j = divmod(k, len(right))
            edges.append(MetaEdge(left[i].community_id, right[j].community_id, int(c)))
    return BipartiteMetaGraph(left_layer, right_layer, left, right, edges)


def build_meta_bipartite(c1: CommunitySet, c2: CommunitySet, x: InterLayerEdges,
                         left_layer: str | None = None, right_layer: str | None = None) -> BipartiteMetaGraph:
    """Meta-graph between the non-singleton communities of two linked layers.

    ``left_layer`` / ``right_layer`` name the layers the link set is keyed
    by; they default to the community sets' own layer ids.
    """
    la, lb = left_layer or c1.layer_id, right_layer or c2.layer_id
    if {la, lb} != {x.layer_a, x.layer_b}:
        raise LayerMismatch(f"links join {x.layer_a!r}/{x.layer_b!r}, not {la!r}/{lb!r}")
    links = x.oriented(la, lb)
    return bipartite_from_nodes(meta_nodes(c1, la), meta_nodes(c2, lb), links, c1.n, c2.n, la, lb)


@dataclass(eq=False)
class MatchResult:
    left_layer: str
    right_layer: str
    pairs: list[tuple[MetaNode, MetaNode, int]]
    unmatched_left: list[MetaNode]
    unmatched_right: list[MetaNode]

    @property
    def total_weight(self) -> int:
        return int(sum(w for _, _, w in self.pairs))

    def matched(self, layer_id: str) -> list[MetaNode]:
        if layer_id == self.left_layer:
            return [a for a, _, _ in self.pairs]
        if layer_id == self.right_layer:
            return [b for _, b, _ in self.pairs]
        raise AnchorNotInChain(f"layer {layer_id!r} is not part of this match")

    def id_pairs(self) -> list[tuple[int, int, int]]:
        return [(a.community_id, b.community_id, w) for a, b, w in self.pairs]


@dataclass(eq=False)
class MatchChain:
    stages: list[MatchResult] = field(default_factory=list)

    @property
    def layers(self) -> list[str]:
        out: list[str] = []
        for s in self.stages:
            for lid in (s.left_layer, s.right_layer):
                if lid not in out:
                    out.append(lid)
        return out

    @property
    def last(self) -> MatchResult:
        return self.stages[-1]

    def __len__(self) -> int:
        return len(self.stages)


def _opt(w: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> int:
    if rows.size == 0 or cols.size == 0:
        return 0
    sub = w[np.ix_(rows, cols)]
    if not sub.any():
        return 0
    r, c = linear_sum_assignment(sub, maximize=True)
    return int(sub[r, c].sum())


def max_weight_pairs(w: np.ndarray) -> list[tuple[int, int]]:
    """Lexicographically smallest maximum-weight matching of a non-negative matrix.

    The optimum comes from the assignment solver; the greedy pass then fixes
    pairs in ascending (row, column) order, accepting a pair only when the
    rest of the matrix can still complete the optimum.
    """
    w = np.asarray(w, dtype=np.int64)
    if w.size == 0:
        return []
    n_rows, n_cols = w.shape
    remaining = _opt(w, np.arange(n_rows), np.arange(n_cols))
    free_cols = np.ones(n_cols, dtype=bool)
    out: list[tuple[int, int]] = []
    row = 0
    while remaining > 0 and row < n_rows:
        cols = np.flatnonzero(free_cols)
        rest = np.arange(row + 1, n_rows)
        picked = None
        # invariant: `remaining` is the optimum over rows >= row and free columns
        if w[row, cols].any():
            for c in cols[w[row, cols] > 0].tolist():
                if w[row, c] + _opt(w, rest, cols[cols != c]) == remaining:
                    picked = c
                    break
        if picked is not None:
            out.append((row, picked))
            free_cols[picked] = False
            remaining -= int(w[row, picked])
        row += 1
    return out


def mwm(meta: BipartiteMetaGraph) -> MatchResult:
    """Exact maximum weighted matching with a deterministic tie-break.

    Among all maximum-weight matchings the one whose sorted list of
    (left community id, right community id) pairs is lexicographically
    smallest is returned.
    """
    left = sorted(meta.left, key=lambda m: m.community_id)
    right = sorted(meta.right, key=lambda m: m.community_id)
    ordered = BipartiteMetaGraph(meta.left_layer, meta.right_layer, left, right, meta.meta_edges)
    w = ordered.weight_matrix()
    pairs = [(left[i], right[j], int(w[i, j])) for i, j in max_weight_pairs(w)]
    ml = {a.community_id for a, _, _ in pairs}
    mr = {b.community_id for _, b, _ in pairs}
    return MatchResult(meta.left_layer, meta.right_layer, pairs,
                       [m for m in left if m.community_id not in ml],
                       [m for m in right if m.community_id not in mr])


def mwm_layers(c1: CommunitySet, c2: CommunitySet, x: InterLayerEdges,
               left_layer: str | None = None, right_layer: str | None = None) -> MatchChain:
    return MatchChain([mwm(build_meta_bipartite(c1, c2, x, left_layer, right_layer))])


def chain_mwm(prev: MatchChain, next_c: CommunitySet, x: InterLayerEdges,
              anchor_layer: str | None = None, next_layer: str | None = None) -> MatchChain:
    """Match the communities carried forward from ``prev`` against ``next_c``.

    The anchor side holds only the anchor-layer communities matched in the
    most recent stage that involves the anchor layer. The anchor defaults to
    the right layer of the last stage.
    """
    if not prev.stages:
        raise AnchorNotInChain("cannot extend an empty chain")
    anchor = anchor_layer or prev.last.right_layer
    stage = next((s for s in reversed(prev.stages) if anchor in (s.left_layer, s.right_layer)), None)
    if stage is None:
        raise AnchorNotInChain(f"layer {anchor!r} does not occur in the chain {prev.layers}")
    nxt = next_layer or next_c.layer_id
    if {anchor, nxt} != {x.layer_a, x.layer_b}:
        raise LayerMismatch(f"links join {x.layer_a!r}/{x.layer_b!r}, not {anchor!r}/{nxt!r}")
    carried = sorted(stage.matched(anchor), key=lambda m: m.community_id)
    links = x.oriented(anchor, nxt)
    n_anchor = int(links[:, 0].max()) + 1 if links.size else 0
    for m in carried:
        n_anchor = max(n_anchor, int(m.members.max()) + 1)
    meta = bipartite_from_nodes(carried, meta_nodes(next_c, nxt), links, n_anchor, next_c.n, anchor, nxt)
    return MatchChain(prev.stages + [mwm(meta)])
