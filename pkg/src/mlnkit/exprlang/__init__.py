"""Analysis expressions: syntax, type rules and evaluation."""

from .ast import (
    LayerRef,
    NodeSetRef,
    Not,
    PsiNode,
    Query,
    SortBy,
    SubtractNodeSet,
    ThetaNode,
    TopK,
)
from .syntax import expand_groups, format, parse, tokenize
from .check import ResultKind, TypeInfo, typecheck, with_default_hub_rule
from .engine import Engine, Result
