"""Two-phase evaluation: per-layer analyses first (cached), then composition."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..cache import PsiCache
from ..graph import AnyGraph, complement, union
from ..model import AttributeStore, MlnSchema, PsiKind, ThetaKind, VertexUniverse, is_missing
from ..psi import CommunitySet, HubRule, NodeScores, extract_hubs
from ..theta import (
    MatchChain,
    NodeSet,
    and_communities,
    chain_mwm,
    mwm_layers,
    nodeset_compose,
    or_communities,
)
from .ast import NodeSetRef, PsiNode, Query, SortBy, SubtractNodeSet, ThetaNode, TopK, base_layer, leaves
from .check import ResultKind, TypeInfo, infer, typecheck, with_default_hub_rule
from .syntax import expand_groups, format, format_layer, parse


@dataclass
class _Value:
    kind: ResultKind
    data: Any
    universe: str | None = None
    graph: AnyGraph | None = None


@dataclass
class Result:
    """Outcome of one query.

    Exactly one of ``communities`` (ordered ``(community_id, members)``),
    ``nodes``, ``scores`` or ``chain`` is set, according to ``kind``.
    """

    text: str
    kind: ResultKind
    universe: VertexUniverse | None
    entity_type: str | None
    communities: list[tuple[int, np.ndarray]] | None = None
    nodes: NodeSet | None = None
    scores: NodeScores | None = None
    chain: MatchChain | None = None
    raw: Any = None
    stats: dict = field(default_factory=dict)

    def canonical(self, schema: MlnSchema | None = None) -> dict:
        """Plain-data form; equal results give equal dictionaries."""
        out: dict[str, Any] = {"expression": self.text, "kind": self.kind.value}
        if self.communities is not None:
            out["communities"] = [[int(c), m.tolist()] for c, m in self.communities]
        if self.nodes is not None:
            out["nodes"] = self.nodes.members.tolist()
            if self.nodes.scores is not None:
                out["scores"] = [float(self.nodes.scores[v]) for v in self.nodes.members]
        if self.scores is not None:
            out["scores"] = self.scores.scores.tolist()
        if self.chain is not None:
            out["stages"] = [
                {"left_layer": s.left_layer, "right_layer": s.right_layer,
                 "pairs": [[a.community_id, b.community_id, w] for a, b, w in s.pairs],
                 "unmatched_left": [m.community_id for m in s.unmatched_left],
                 "unmatched_right": [m.community_id for m in s.unmatched_right]}
                for s in self.chain.stages]
        return out


class Engine:
    """Evaluates queries against one MLN.

    Parameters
    ----------
    schema, store
        The MLN and its attribute store (node sets, drill-down attributes).
    cache
        Per-layer result cache; a fresh in-memory cache when omitted.
    default_hub_rule
        Rule attached to centrality leaves used inside a composition without
        one. ``None`` makes such queries fail type checking.
    """

    def __init__(self, schema: MlnSchema, store: AttributeStore | None = None,
                 cache: PsiCache | None = None, psi_params: dict | None = None,
                 jobs: int = 1, default_hub_rule: HubRule | None = None):
        self.schema = schema
        self.store = store if store is not None else AttributeStore()
        self.cache = cache if cache is not None else PsiCache()
        self.psi_params = dict(psi_params or {})
        self.jobs = jobs
        self.default_hub_rule = default_hub_rule

    # -- public ---------------------------------------------------------------

    def prepare(self, query) -> Query:
        if isinstance(query, str):
            query = parse(query)
        if self.default_hub_rule is not None:
            query = with_default_hub_rule(query, self.default_hub_rule)
        return query

    def check(self, query) -> TypeInfo:
        return typecheck(self.prepare(query), self.schema, self.store)

    def evaluate(self, query) -> Result:
        query = self.prepare(query)
        info = typecheck(query, self.schema, self.store)
        hits0, miss0 = self.cache.stats.hits, self.cache.stats.misses
        t0 = time.perf_counter()
        leaf_values = self._psi_phase(query)
        t1 = time.perf_counter()
        val = self._eval(query.expr, leaf_values)
        result = self._finish(query, info, val)
        t2 = time.perf_counter()
        result.stats = {
            "psi_seconds": t1 - t0,
            "compose_seconds": t2 - t1,
            "psi_hits": self.cache.stats.hits - hits0,
            "psi_misses": self.cache.stats.misses - miss0,
        }
        return result

    def evaluate_text(self, text: str) -> list[Result]:
        """Expand ``$EACH(group)`` macros, then evaluate every resulting query."""
        return [self.evaluate(q) for q in expand_groups(text, self.schema.groups)]

    # -- phases ---------------------------------------------------------------

    def _graph(self, layer_expr) -> AnyGraph:
        layer, depth = base_layer(layer_expr)
        g = self.schema.layer(layer).graph
        return complement(g) if depth % 2 else g

    def _psi_phase(self, query: Query) -> dict:
        todo = {}
        for leaf in leaves(query):
            if isinstance(leaf, PsiNode):
                todo.setdefault((leaf.kind, leaf.layer), leaf)
        params = self.psi_params
        items = [(format_layer(le), self._graph(le), kind, params if kind is PsiKind.COMMUNITY else {})
                 for (kind, le) in todo]
        results = self.cache.get_many(items, self.jobs)
        return {key: (res, item[1]) for key, item, res in zip(todo, items, results)}

    def _eval(self, node, leaf_values) -> _Value:
        if isinstance(node, PsiNode):
            res, graph = leaf_values[(node.kind, node.layer)]
            layer, _ = base_layer(node.layer)
            uni = self.schema.universe_of(layer)
            if node.kind is PsiKind.COMMUNITY:
                return _Value(ResultKind.COMMUNITIES, res, uni.name, graph)
            if node.hub_rule is None:
                return _Value(ResultKind.SCORES, res, uni.name)
            hubs = extract_hubs(res, node.hub_rule)
            ns = NodeSet.from_hubs(hubs, len(uni))
            return _Value(ResultKind.NODESET, NodeSet(ns.label, ns.universe_size, ns.members, res.scores),
                          uni.name)
        if isinstance(node, NodeSetRef):
            uni_name, members = self.store.node_set(node.name)
            n = len(self.schema.universes[uni_name])
            return _Value(ResultKind.NODESET, NodeSet.of(sorted(members), n, node.name), uni_name)
        if node.kind is ThetaKind.MWM:
            return self._eval_mwm(node, leaf_values)
        lv, rv = self._eval(node.left, leaf_values), self._eval(node.right, leaf_values)
        if lv.kind is ResultKind.NODESET:
            out = nodeset_compose(lv.data, rv.data, node.kind)
            scores = lv.data.scores
            return _Value(ResultKind.NODESET, NodeSet(out.label, out.universe_size, out.members, scores),
                          lv.universe)
        label = format(node)
        if node.kind is ThetaKind.AND:
            cs = and_communities(lv.data, rv.data, lv.graph, rv.graph, label)
            return _Value(ResultKind.COMMUNITIES, cs, lv.universe, cs.support)
        cs = or_communities(lv.graph, rv.graph, layer_id=label, cache=self.cache, **self._louvain_kw())
        return _Value(ResultKind.COMMUNITIES, cs, lv.universe, union(lv.graph, rv.graph))

    def _louvain_kw(self) -> dict:
        return {k: v for k, v in self.psi_params.items() if k in ("resolution", "min_gain")}

    def _eval_mwm(self, node: ThetaNode, leaf_values) -> _Value:
        rv = self._eval(node.right, leaf_values)
        right_layer, _ = base_layer(node.right.layer)
        if isinstance(node.left, PsiNode):
            lv = self._eval(node.left, leaf_values)
            left_layer, _ = base_layer(node.left.layer)
            x = self.schema.links(left_layer, right_layer)
            chain = mwm_layers(lv.data, rv.data, x, left_layer, right_layer)
        else:
            prev = self._eval(node.left, leaf_values).data
            anchor = node.anchor or prev.last.right_layer
            x = self.schema.links(anchor, right_layer)
            chain = chain_mwm(prev, rv.data, x, anchor, right_layer)
        return _Value(ResultKind.MATCHES, chain)

    # -- filters ----------------------------------------------------------------

    def _finish(self, query: Query, info: TypeInfo, val: _Value) -> Result:
        uni = self.schema.universes.get(val.universe) if val.universe else None
        etype = self.schema.entity_of_universe(val.universe) if val.universe else None
        res = Result(format(query), info.kind, uni, etype, raw=val.data)
        if val.kind is ResultKind.MATCHES:
            res.chain = val.data
            return res
        kind = val.kind
        comms = nodes = None
        if kind is ResultKind.COMMUNITIES:
            comms = sorted(val.data.nontrivial(), key=lambda cm: (-cm[1].size, cm[0]))
        elif kind is ResultKind.NODESET:
            nodes = val.data
        for f in query.filters:
            if isinstance(f, TopK):
                if kind is ResultKind.SCORES:
                    hubs = extract_hubs(val.data, HubRule("top_k", f.k))
                    nodes = NodeSet(f"top_k({f.k})", val.data.scores.size, hubs.members, val.data.scores)
                    kind = ResultKind.NODESET
                elif kind is ResultKind.NODESET:
                    nodes = NodeSet(nodes.label, nodes.universe_size, nodes.members[:f.k], nodes.scores)
                else:
                    comms = comms[:f.k]
            elif isinstance(f, SortBy):
                if kind is ResultKind.NODESET:
                    order = self._sort_order(etype, f, [[v] for v in nodes.members.tolist()])
                    nodes = NodeSet(nodes.label, nodes.universe_size, nodes.members[order], nodes.scores)
                else:
                    order = self._sort_order(etype, f, [m.tolist() for _, m in comms])
                    comms = [comms[i] for i in order]
            elif isinstance(f, SubtractNodeSet):
                _, drop = self.store.node_set(f.name)
                if kind is ResultKind.NODESET:
                    keep = [v for v in nodes.members.tolist() if v not in drop]
                    nodes = NodeSet(nodes.label, nodes.universe_size, np.asarray(keep, dtype=np.int64),
                                    nodes.scores)
                else:
                    trimmed = [(c, np.asarray([v for v in m.tolist() if v not in drop], dtype=np.int64))
                               for c, m in comms]
                    comms = [(c, m) for c, m in trimmed if m.size >= 2]
        if kind is ResultKind.SCORES:
            res.scores = val.data
        elif kind is ResultKind.NODESET:
            res.nodes = nodes
        else:
            res.communities = comms
        return res

    def _sort_order(self, etype: str, f: SortBy, groups: list[list[int]]) -> list[int]:
        """Stable order of ``groups`` by their mean attribute (first value for text); missing last."""
        present, missing = [], []
        for i, members in enumerate(groups):
            vals = [self.store.lookup(etype, v, f.attr) for v in members]
            vals = [v for v in vals if not is_missing(v)]
            if not vals:
                missing.append(i)
            elif isinstance(vals[0], str):
                present.append((i, vals[0]))
            else:
                present.append((i, sum(vals) / len(vals)))
        present.sort(key=lambda t: t[1], reverse=f.descending)
        return [i for i, _ in present] + missing
