"""Expression tree nodes. All nodes are frozen and compare structurally."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..model import PsiKind, ThetaKind
from ..psi import HubRule


@dataclass(frozen=True)
class LayerRef:
    name: str


@dataclass(frozen=True)
class Not:
    inner: "LayerExpr"


LayerExpr = Union[LayerRef, Not]


@dataclass(frozen=True)
class PsiNode:
    kind: PsiKind
    layer: LayerExpr
    hub_rule: HubRule | None = None


@dataclass(frozen=True)
class NodeSetRef:
    name: str


@dataclass(frozen=True)
class ThetaNode:
    kind: ThetaKind
    left: "Expr"
    right: "Expr"
    anchor: str | None = None


Expr = Union[PsiNode, NodeSetRef, ThetaNode]


@dataclass(frozen=True)
class TopK:
    k: int


@dataclass(frozen=True)
class SortBy:
    attr: str
    descending: bool = True


@dataclass(frozen=True)
class SubtractNodeSet:
    name: str


Filter = Union[TopK, SortBy, SubtractNodeSet]


@dataclass(frozen=True)
class Query:
    expr: Expr
    filters: tuple = ()


def base_layer(le: LayerExpr) -> tuple[str, int]:
    """Underlying layer id and NOT nesting depth."""
    depth = 0
    while isinstance(le, Not):
        le = le.inner
        depth += 1
    return le.name, depth


def leaves(node) -> list[PsiNode | NodeSetRef]:
    """Analysis and node-set leaves in left-to-right order."""
    if isinstance(node, Query):
        return leaves(node.expr)
    if isinstance(node, ThetaNode):
        return leaves(node.left) + leaves(node.right)
    return [node]
