"""Static result typing against a schema.

Each node gets a :class:`TypeInfo`. Community results compose with AND / OR
only over one vertex universe; hub sets compose with AND / OR / MINUS over
one universe; matching needs a linked pair of layers and a community
analysis of a single layer on its right.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ..errors import (
    AnchorNotInChain,
    FilterNotApplicable,
    IllegalPsi,
    IllegalTheta,
    MissingHubRule,
    MixedResultKinds,
    UndeclaredAttribute,
)
from ..model import AttributeStore, MlnSchema, PsiKind, ThetaKind, psi_options, theta_options
from ..psi import HubRule
from .ast import NodeSetRef, PsiNode, Query, SortBy, SubtractNodeSet, ThetaNode, TopK, base_layer
from .syntax import format_expr, format_layer


class ResultKind(str, enum.Enum):
    COMMUNITIES = "communities"
    SCORES = "scores"
    NODESET = "nodeset"
    MATCHES = "matches"


@dataclass(frozen=True)
class TypeInfo:
    kind: ResultKind
    universe: str | None = None
    layer: str | None = None          # base layer of a single-layer analysis
    leaf: bool = False                # a PSI[community] leaf (possibly over NOT)
    chain: tuple[str, ...] = ()       # MATCHES: layers in the order they joined
    last_right: str | None = None     # MATCHES: right layer of the newest stage


def _label(node) -> str:
    return format_expr(node)


def infer(node, schema: MlnSchema, store: AttributeStore | None = None) -> TypeInfo:
    if isinstance(node, PsiNode):
        layer, _ = base_layer(node.layer)
        spec = schema.layer(layer)
        if node.kind not in psi_options(schema, layer):
            raise IllegalPsi(f"{node.kind.value} is not available on {layer!r}")
        uni = spec.universe.name
        if node.kind is PsiKind.COMMUNITY:
            if node.hub_rule is not None:
                raise IllegalPsi(f"hub rule {node.hub_rule} only applies to centrality analyses")
            return TypeInfo(ResultKind.COMMUNITIES, uni, layer, leaf=True)
        kind = ResultKind.SCORES if node.hub_rule is None else ResultKind.NODESET
        return TypeInfo(kind, uni, layer)
    if isinstance(node, NodeSetRef):
        if store is None:
            raise FilterNotApplicable(f"NODESET({node.name}) needs an attribute store")
        uni, _ = store.node_set(node.name)
        return TypeInfo(ResultKind.NODESET, uni)
    if isinstance(node, ThetaNode):
        if node.kind is ThetaKind.MWM:
            return _infer_mwm(node, schema, store)
        return _infer_boolean(node, schema, store)
    raise TypeError(f"not an expression node: {node!r}")


def _infer_boolean(node: ThetaNode, schema, store) -> TypeInfo:
    lt, rt = infer(node.left, schema, store), infer(node.right, schema, store)
    a, b = _label(node.left), _label(node.right)
    for t, side in ((lt, node.left), (rt, node.right)):
        if t.kind is ResultKind.SCORES:
            raise MissingHubRule(
                f"{_label(side)} yields raw scores; add a hub rule such as "
                f"PSI[{side.kind.value};top_k=10](...) to use it in {node.kind.value}")
    if ResultKind.MATCHES in (lt.kind, rt.kind):
        raise MixedResultKinds(f"{node.kind.value} cannot combine a matching result ({a} {node.kind.value} {b})")
    if lt.kind is not rt.kind:
        raise MixedResultKinds(
            f"{node.kind.value} mixes {lt.kind.value} ({a}) with {rt.kind.value} ({b})")
    if lt.layer and rt.layer:
        legal = theta_options(schema, lt.layer, rt.layer)
        if node.kind not in legal:
            raise IllegalTheta(lt.layer, rt.layer, node.kind.value,
                               "layers do not share a vertex universe")
    if lt.universe != rt.universe:
        raise IllegalTheta(a, b, node.kind.value, "operands do not share a vertex universe")
    if lt.kind is ResultKind.COMMUNITIES and node.kind is ThetaKind.MINUS:
        raise IllegalTheta(a, b, node.kind.value, "MINUS applies to node sets, not communities")
    layer = lt.layer if lt.layer == rt.layer else None
    return TypeInfo(lt.kind, lt.universe, layer)


def _infer_mwm(node: ThetaNode, schema, store) -> TypeInfo:
    lt, rt = infer(node.left, schema, store), infer(node.right, schema, store)
    a, b = _label(node.left), _label(node.right)
    if not rt.leaf:
        raise IllegalTheta(a, b, "MWM", "the right operand must be PSI[community] of a single layer")
    if lt.leaf:
        if node.anchor is not None and node.anchor != lt.layer:
            raise AnchorNotInChain(f"anchor {node.anchor!r} is not the left layer {lt.layer!r}")
        if ThetaKind.MWM not in theta_options(schema, lt.layer, rt.layer):
            raise IllegalTheta(lt.layer, rt.layer, "MWM", "no inter-layer edges join these layers")
        return TypeInfo(ResultKind.MATCHES, chain=(lt.layer, rt.layer), last_right=rt.layer)
    if lt.kind is ResultKind.MATCHES:
        anchor = node.anchor or lt.last_right
        if anchor not in lt.chain:
            raise AnchorNotInChain(f"anchor {anchor!r} does not occur in the chain {list(lt.chain)}")
        if ThetaKind.MWM not in theta_options(schema, anchor, rt.layer):
            raise IllegalTheta(anchor, rt.layer, "MWM", "no inter-layer edges join these layers")
        chain = lt.chain + ((rt.layer,) if rt.layer not in lt.chain else ())
        return TypeInfo(ResultKind.MATCHES, chain=chain, last_right=rt.layer)
    if lt.kind is ResultKind.COMMUNITIES:
        raise IllegalTheta(a, b, "MWM", "the left operand must be one layer's communities or a matching")
    raise MixedResultKinds(f"MWM needs community results, got {lt.kind.value} ({a})")


def entity_of(info: TypeInfo, schema: MlnSchema) -> str | None:
    return schema.entity_of_universe(info.universe) if info.universe else None


def check_filters(info: TypeInfo, filters, schema: MlnSchema, store: AttributeStore | None) -> TypeInfo:
    for f in filters:
        if info.kind is ResultKind.MATCHES:
            raise FilterNotApplicable(f"filters do not apply to matching results")
        if isinstance(f, TopK):
            if info.kind is ResultKind.SCORES:
                info = replace(info, kind=ResultKind.NODESET)
        elif isinstance(f, SortBy):
            if info.kind is ResultKind.SCORES:
                raise FilterNotApplicable("sort_by needs a node set or communities; apply top_k first")
            etype = entity_of(info, schema)
            if store is None or not store.is_declared(etype, f.attr):
                raise UndeclaredAttribute(f"attribute {f.attr!r} is not declared for entity type {etype!r}")
        elif isinstance(f, SubtractNodeSet):
            if info.kind is ResultKind.SCORES:
                raise FilterNotApplicable("subtract needs a node set or communities; apply top_k first")
            if store is None:
                raise FilterNotApplicable(f"NODESET({f.name}) needs an attribute store")
            uni, _ = store.node_set(f.name)
            if uni != info.universe:
                raise FilterNotApplicable(
                    f"node set {f.name!r} is over {uni!r}, the result is over {info.universe!r}")
    return info


def typecheck(query: Query, schema: MlnSchema, store: AttributeStore | None = None) -> TypeInfo:
    """Type of the query result after its filters; raises on any illegal construct."""
    if not isinstance(query, Query):
        query = Query(query)
    info = infer(query.expr, schema, store)
    return check_filters(info, query.filters, schema, store)


def with_default_hub_rule(query: Query, rule: HubRule) -> Query:
    """Attach ``rule`` to every centrality leaf that feeds a set composition without one."""

    def fix(node, inside_theta: bool):
        if isinstance(node, PsiNode):
            if inside_theta and node.kind is not PsiKind.COMMUNITY and node.hub_rule is None:
                return PsiNode(node.kind, node.layer, rule)
            return node
        if isinstance(node, ThetaNode):
            return ThetaNode(node.kind, fix(node.left, True), fix(node.right, True), node.anchor)
        return node

    return Query(fix(query.expr, False), query.filters)


def describe_leaf(node: PsiNode) -> str:
    return f"{node.kind.value}({format_layer(node.layer)})"
