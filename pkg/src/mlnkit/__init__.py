"""Multilayer network analysis: per-layer analyses composed across layers."""

from .errors import ExpressionError, MlnError
from .graph import ComplementGraph, Graph, Partition, complement, from_edge_list, intersect, union
from .model import AttributeStore, InterLayerEdges, LayerSpec, MlnSchema, PsiKind, ThetaKind, VertexUniverse

__version__ = "0.1.0"
