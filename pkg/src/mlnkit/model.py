"""MLN schema: layer registry, inter-layer links, lookup tables, attributes.

Layers that share a vertex universe are homogeneous siblings; they are
implicitly coupled through that universe and may be composed with the
Boolean operators. Layers over different universes are coupled only through
an explicit :class:`InterLayerEdges` set, which is what makes the matching
composition available for them.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import (
    ConfigError,
    EndpointOutOfRange,
    LayerMismatch,
    ParseError,
    UndeclaredAttribute,
    UniverseMismatch,
    UnknownLayer,
    UnknownNodeName,
    UnknownNodeSet,
)
from .graph import Graph


class ThetaKind(str, enum.Enum):
    AND = "AND"
    OR = "OR"
    MINUS = "MINUS"
    MWM = "MWM"


class PsiKind(str, enum.Enum):
    COMMUNITY = "community"
    DEGREE = "degree"
    CLOSENESS = "closeness"


HOMOGENEOUS_THETAS = frozenset({ThetaKind.AND, ThetaKind.OR, ThetaKind.MINUS})
ALL_PSI = frozenset(PsiKind)
# listed in the lookup table but not computable here
RECOGNIZED_UNIMPLEMENTED_PSI = frozenset({"substructure"})


class VertexUniverse:
    """Interner mapping external names to dense vertex ids."""

    def __init__(self, name: str, names: Iterable[str] = ()):
        self.name = name
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self.frozen = False
        for nm in names:
            self.intern(nm)

    def intern(self, name: str) -> int:
        name = str(name)
        idx = self._index.get(name)
        if idx is not None:
            return idx
        if self.frozen:
            raise UnknownNodeName(f"unknown node {name!r} in universe {self.name!r}")
        idx = len(self._names)
        self._names.append(name)
        self._index[name] = idx
        return idx

    def id_of(self, name: str) -> int:
        try:
            return self._index[str(name)]
        except KeyError:
            raise UnknownNodeName(f"unknown node {name!r} in universe {self.name!r}") from None

    def name_of(self, vid: int) -> str:
        return self._names[vid]

    def __contains__(self, name) -> bool:
        return str(name) in self._index

    def __len__(self) -> int:
        return len(self._names)

    @property
    def names(self) -> list[str]:
        return list(self._names)

    def freeze(self) -> "VertexUniverse":
        self.frozen = True
        return self

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id", "name"])
        for i, nm in enumerate(self._names):
            w.writerow([i, nm])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, name: str, text: str) -> "VertexUniverse":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if rows and rows[0][0].strip() == "node_id":
            rows = rows[1:]
        names = [""] * len(rows)
        for r in rows:
            names[int(r[0])] = r[1]
        return cls(name, names)

    def __repr__(self) -> str:
        return f"VertexUniverse({self.name!r}, size={len(self)})"


@dataclass
class LayerSpec:
    layer_id: str
    entity_type: str
    universe: VertexUniverse
    graph: Graph
    builder_provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.graph.universe_size != len(self.universe):
            raise UniverseMismatch(
                f"layer {self.layer_id!r}: graph has {self.graph.universe_size} vertices, "
                f"universe {self.universe.name!r} has {len(self.universe)}")


@dataclass
class InterLayerEdges:
    """Bipartite link set between two layers; ``links[:, 0]`` index layer ``a``."""

    layer_a: str
    layer_b: str
    links: np.ndarray

    def __post_init__(self):
        if self.layer_a == self.layer_b:
            raise ConfigError("inter-layer edges need two distinct layers")
        arr = np.asarray(self.links, dtype=np.int64).reshape(-1, 2)
        self.links = np.unique(arr, axis=0) if arr.size else arr

    def oriented(self, a: str, b: str) -> np.ndarray:
        """Links as ``(vertex in a, vertex in b)`` rows."""
        if (a, b) == (self.layer_a, self.layer_b):
            return self.links
        if (a, b) == (self.layer_b, self.layer_a):
            return self.links[:, ::-1]
        raise LayerMismatch(f"links connect {self.layer_a}/{self.layer_b}, not {a}/{b}")

    def __len__(self) -> int:
        return int(self.links.shape[0])


def _pair_key(a: str, b: str) -> frozenset:
    return frozenset((a, b))


class MlnSchema:
    def __init__(self, name: str = "mln"):
        self.name = name
        self.layers: dict[str, LayerSpec] = {}
        self.inter_layer: dict[frozenset, InterLayerEdges] = {}
        self.groups: dict[str, list[str]] = {}
        self.universes: dict[str, VertexUniverse] = {}
        self.universe_entity: dict[str, str] = {}

    # -- registration -------------------------------------------------------

    def add_universe(self, universe: VertexUniverse, entity_type: str) -> VertexUniverse:
        self.universes[universe.name] = universe
        self.universe_entity[universe.name] = entity_type
        return universe

    def add_layer(self, spec: LayerSpec) -> LayerSpec:
        if spec.layer_id in self.layers:
            raise ConfigError(f"duplicate layer id {spec.layer_id!r}")
        known = self.universes.get(spec.universe.name)
        if known is None:
            self.add_universe(spec.universe, spec.entity_type)
        elif known is not spec.universe:
            raise ConfigError(f"universe {spec.universe.name!r} registered twice")
        self.layers[spec.layer_id] = spec
        return spec

    def add_inter_layer(self, x: InterLayerEdges) -> InterLayerEdges:
        la, lb = self.layer(x.layer_a), self.layer(x.layer_b)
        if la.universe is lb.universe:
            raise ConfigError(
                f"{x.layer_a!r} and {x.layer_b!r} share universe {la.universe.name!r}; "
                "homogeneous siblings are implicitly linked")
        if x.links.size:
            if x.links[:, 0].max() >= len(la.universe) or x.links[:, 1].max() >= len(lb.universe):
                raise EndpointOutOfRange("inter-layer link endpoint outside its universe")
        self.inter_layer[_pair_key(x.layer_a, x.layer_b)] = x
        return x

    def add_group(self, name: str, layer_ids: list[str]) -> None:
        for lid in layer_ids:
            self.layer(lid)
        self.groups[name] = list(layer_ids)

    # -- lookups ------------------------------------------------------------

    def layer(self, layer_id: str) -> LayerSpec:
        try:
            return self.layers[layer_id]
        except KeyError:
            raise UnknownLayer(f"unknown layer {layer_id!r}") from None

    def links(self, a: str, b: str) -> InterLayerEdges | None:
        return self.inter_layer.get(_pair_key(a, b))

    def universe_of(self, layer_id: str) -> VertexUniverse:
        return self.layer(layer_id).universe

    def entity_of_universe(self, universe_name: str) -> str:
        return self.universe_entity[universe_name]

    def kind(self) -> str:
        """``HoMLN``, ``HeMLN`` or ``HyMLN`` from the registered layers."""
        per_universe: dict[str, int] = {}
        for spec in self.layers.values():
            per_universe[spec.universe.name] = per_universe.get(spec.universe.name, 0) + 1
        siblings = any(c > 1 for c in per_universe.values())
        if len(per_universe) <= 1:
            return "HoMLN"
        return "HyMLN" if siblings else "HeMLN"

    def __repr__(self) -> str:
        return f"MlnSchema({self.name!r}, layers={len(self.layers)}, inter_layer={len(self.inter_layer)})"


def theta_options(schema: MlnSchema, a: str, b: str) -> frozenset[ThetaKind]:
    """Legal compositions for a layer pair (the Θ lookup table)."""
    la, lb = schema.layer(a), schema.layer(b)
    if la.universe is lb.universe:
        return HOMOGENEOUS_THETAS
    if schema.links(a, b) is not None:
        return frozenset({ThetaKind.MWM})
    return frozenset()


def psi_options(schema: MlnSchema, a: str) -> frozenset[PsiKind]:
    """Available analysis functions for a layer (the Ψ lookup table)."""
    schema.layer(a)
    return ALL_PSI


# -- attribute store ----------------------------------------------------------

class _Missing:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_Missing, ())


MISSING = _Missing()

_TYPES = {"str": str, "int": int, "float": float, "real": float, "integer": int, "string": str}
_TYPE_NAMES = {str: "str", int: "int", float: "float"}


def _coerce(value: str, typ: type):
    if value == "":
        return MISSING
    if typ is int:
        return int(value.replace(",", "").replace("_", ""))
    if typ is float:
        return float(value)
    return value


class AttributeStore:
    """Typed scalar attributes per entity type, plus named node sets."""

    def __init__(self):
        self.declared: dict[str, dict[str, type]] = {}
        self.values: dict[str, dict[int, dict[str, Any]]] = {}
        self.node_sets: dict[str, tuple[str, frozenset[int]]] = {}

    def declare(self, entity_type: str, attr: str, typ: type | str) -> None:
        if isinstance(typ, str):
            try:
                typ = _TYPES[typ.lower()]
            except KeyError:
                raise ConfigError(f"unknown attribute type {typ!r}") from None
        self.declared.setdefault(entity_type, {})[attr] = typ
        self.values.setdefault(entity_type, {})

    def set(self, entity_type: str, v: int, attr: str, value) -> None:
        typ = self._type(entity_type, attr)
        if value is not MISSING and not isinstance(value, typ):
            value = typ(value)
        self.values[entity_type].setdefault(int(v), {})[attr] = value

    def _type(self, entity_type: str, attr: str) -> type:
        try:
            return self.declared[entity_type][attr]
        except KeyError:
            raise UndeclaredAttribute(
                f"attribute {attr!r} is not declared for entity type {entity_type!r}") from None

    def is_declared(self, entity_type: str, attr: str) -> bool:
        return attr in self.declared.get(entity_type, {})

    def lookup(self, entity_type: str, v: int, attr: str):
        self._type(entity_type, attr)
        return self.values[entity_type].get(int(v), {}).get(attr, MISSING)

    def add_node_set(self, name: str, universe_name: str, members: Iterable[int]) -> None:
        self.node_sets[name] = (universe_name, frozenset(int(m) for m in members))

    def node_set(self, name: str) -> tuple[str, frozenset[int]]:
        try:
            return self.node_sets[name]
        except KeyError:
            raise UnknownNodeSet(f"unknown node set {name!r}") from None

    # -- file round trip ----------------------------------------------------

    def load_table(self, entity_type: str, text: str, universe: VertexUniverse,
                   column_types: Mapping[str, str] | None = None, path=None,
                   strict: bool = False) -> int:
        """Load ``node,attr:type,...`` rows; returns count of skipped unknown nodes.

        Column types come from ``name:type`` header annotations or from
        ``column_types``; unannotated columns default to ``str``.
        """
        column_types = dict(column_types or {})
        lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1)
                 if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines:
            return 0
        header = next(csv.reader([lines[0][1]]))
        cols = []
        for h in header[1:]:
            name, _, typ = h.strip().partition(":")
            typ = column_types.get(name, typ or "str")
            self.declare(entity_type, name, typ)
            cols.append(name)
        skipped = 0
        for lineno, ln in lines[1:]:
            row = next(csv.reader([ln]))
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
            if row[0] not in universe:
                if strict:
                    raise UnknownNodeName(f"unknown node {row[0]!r} in universe {universe.name!r}")
                skipped += 1
                continue
            v = universe.id_of(row[0])
            for name, raw in zip(cols, row[1:]):
                typ = self.declared[entity_type][name]
                try:
                    self.set(entity_type, v, name, _coerce(raw.strip(), typ))
                except ValueError as exc:
                    raise ParseError(f"bad {name} value {raw!r}: {exc}", path, lineno) from None
        return skipped

    def dump_table(self, entity_type: str, universe: VertexUniverse) -> str:
        attrs = list(self.declared.get(entity_type, {}))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node"] + [f"{a}:{_TYPE_NAMES[self.declared[entity_type][a]]}" for a in attrs])
        for v in sorted(self.values.get(entity_type, {})):
            row = self.values[entity_type][v]
            out = [universe.name_of(v)]
            for a in attrs:
                val = row.get(a, MISSING)
                out.append("" if val is MISSING else (repr(val) if isinstance(val, float) else str(val)))
            w.writerow(out)
        return buf.getvalue()

    def table(self, entity_type: str) -> dict[int, dict[str, Any]]:
        return {v: dict(r) for v, r in self.values.get(entity_type, {}).items()}


def attr_lookup(store: AttributeStore, entity_type: str, v: int, attr: str):
    """Stored value, or :data:`MISSING` when the row lacks it."""
    return store.lookup(entity_type, v, attr)


def is_missing(value) -> bool:
    return value is MISSING or (isinstance(value, float) and math.isnan(value))
