"""Result documents, drill-down joins and file exporters.

Every exporter works from the plain JSON *result document* built by
:func:`result_document`, so a saved ``result.json`` can be re-exported or
drilled down without re-running the query. Node names travel with the ids.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError, UndeclaredAttribute
from .exprlang.check import ResultKind
from .exprlang.engine import Result
from .model import AttributeStore, MlnSchema, is_missing

MISSING_MARKER = "NA"
FORMATS = ("csv", "dot", "json", "geojson")


def _members(universe, ids) -> list[dict]:
    return [{"id": int(v), "name": universe.name_of(int(v)) if universe is not None else str(int(v))}
            for v in ids]


def result_document(result: Result, schema: MlnSchema | None = None) -> dict:
    """Nested, name-carrying form of a query result (the JSON export)."""
    doc: dict = {"expression": result.text, "kind": result.kind.value,
                 "entity_type": result.entity_type,
                 "universe": result.universe.name if result.universe is not None else None}
    uni = result.universe
    if result.communities is not None:
        doc["communities"] = [{"id": int(c), "members": _members(uni, m)} for c, m in result.communities]
    if result.nodes is not None:
        nodes = _members(uni, result.nodes.members)
        if result.nodes.scores is not None:
            for n in nodes:
                n["score"] = float(result.nodes.scores[n["id"]])
        doc["nodes"] = nodes
    if result.scores is not None:
        doc["scores"] = [dict(m, score=float(s))
                         for m, s in zip(_members(uni, range(result.scores.scores.size)), result.scores.scores)]
    if result.chain is not None:
        stages = []
        for i, st in enumerate(result.chain.stages, 1):
            lu = schema.universe_of(st.left_layer) if schema else None
            ru = schema.universe_of(st.right_layer) if schema else None
            stages.append({
                "stage": i,
                "left_layer": st.left_layer, "right_layer": st.right_layer,
                "left_entity": schema.layer(st.left_layer).entity_type if schema else None,
                "right_entity": schema.layer(st.right_layer).entity_type if schema else None,
                "pairs": [{"left": a.community_id, "right": b.community_id, "weight": int(w),
                           "left_members": _members(lu, a.members), "right_members": _members(ru, b.members)}
                          for a, b, w in st.pairs],
                "unmatched_left": [{"id": m.community_id, "members": _members(lu, m.members)}
                                   for m in st.unmatched_left],
                "unmatched_right": [{"id": m.community_id, "members": _members(ru, m.members)}
                                    for m in st.unmatched_right],
            })
        doc["stages"] = stages
    if result.stats:
        doc["stats"] = dict(result.stats)
    return doc


def load_document(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "kind" not in doc:
        raise ConfigError(f"{path}: not a result document (no 'kind')")
    return doc


def membership(doc: dict) -> set[tuple]:
    """``(community_id, node_id)`` pairs; node-set results use community id ``None``."""
    if "communities" in doc:
        return {(c["id"], m["id"]) for c in doc["communities"] for m in c["members"]}
    if "nodes" in doc:
        return {(None, m["id"]) for m in doc["nodes"]}
    if "stages" in doc:
        out = set()
        for st in doc["stages"]:
            for p in st["pairs"]:
                out |= {((st["stage"], st["left_layer"], p["left"]), m["id"]) for m in p["left_members"]}
                out |= {((st["stage"], st["right_layer"], p["right"]), m["id"]) for m in p["right_members"]}
        return out
    return set()


# -- csv ----------------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def to_csv(doc: dict) -> str:
    kind = doc["kind"]
    if kind == ResultKind.COMMUNITIES.value:
        rows = [(c["id"], m["id"], m["name"]) for c in doc["communities"] for m in c["members"]]
        return _csv_text(("community_id", "node_id", "name"), rows)
    if kind == ResultKind.NODESET.value:
        rows = [(m["id"], m["name"], m.get("score", "")) for m in doc["nodes"]]
        return _csv_text(("node_id", "name", "score"), rows)
    if kind == ResultKind.SCORES.value:
        rows = [(m["id"], m["name"], repr(m["score"])) for m in doc["scores"]]
        return _csv_text(("node_id", "name", "score"), rows)
    header = ("stage", "left_layer", "left_comm", "right_layer", "right_comm", "weight")
    rows = []
    for st in doc["stages"]:
        for p in st["pairs"]:
            rows.append((st["stage"], st["left_layer"], p["left"], st["right_layer"], p["right"], p["weight"]))
    text = _csv_text(header, rows)
    unmatched = []
    for st in doc["stages"]:
        unmatched += [(st["stage"], st["left_layer"], m["id"]) for m in st["unmatched_left"]]
        unmatched += [(st["stage"], st["right_layer"], m["id"]) for m in st["unmatched_right"]]
    return text + "\n# unmatched\n" + _csv_text(("stage", "layer", "community_id"), unmatched)


# -- dot ----------------------------------------------------------------------

def _q(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(doc: dict) -> str:
    """Communities as clusters; a matching as one bipartite graph per stage."""
    kind = doc["kind"]
    if kind == ResultKind.MATCHES.value:
        out = []
        for st in doc["stages"]:
            lines = [f"graph stage{st['stage']} {{", f"  label={_q(st['left_layer'] + ' -- ' + st['right_layer'])};",
                     "  rankdir=LR;"]
            left = [p["left"] for p in st["pairs"]] + [m["id"] for m in st["unmatched_left"]]
            right = [p["right"] for p in st["pairs"]] + [m["id"] for m in st["unmatched_right"]]
            for side, layer, ids in (("L", st["left_layer"], left), ("R", st["right_layer"], right)):
                lines.append(f"  subgraph cluster_{side} {{ label={_q(layer)};")
                lines += [f"    {_q(f'{side}{c}')} [label={_q(f'community {c}')}];" for c in ids]
                lines.append("  }")
            lines += [f"  {_q('L' + str(p['left']))} -- {_q('R' + str(p['right']))} [label={p['weight']}];"
                      for p in st["pairs"]]
            lines.append("}")
            out.append("\n".join(lines))
        return "\n".join(out) + "\n"
    lines = ["graph result {", f"  label={_q(doc['expression'])};"]
    if kind == ResultKind.COMMUNITIES.value:
        for c in doc["communities"]:
            lines.append(f"  subgraph cluster_{c['id']} {{")
            lines.append(f"    label={_q('community ' + str(c['id']))};")
            lines += [f"    {_q(m['name'])};" for m in c["members"]]
            lines.append("  }")
    else:
        lines += [f"  {_q(m['name'])};" for m in doc.get("nodes", doc.get("scores", []))]
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- json ---------------------------------------------------------------------

def to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


# -- geojson ------------------------------------------------------------------

@dataclass(frozen=True)
class MissingGeometry:
    node: str

    def __str__(self) -> str:
        return f"MissingGeometry: no geometry for node {self.node!r}; feature skipped"


def load_geometry(path, key: str = "name") -> dict[str, dict]:
    """Node name -> GeoJSON geometry, from a FeatureCollection keyed by property ``key``
    or from a plain ``{name: geometry}`` mapping."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and data.get("type") == "FeatureCollection":
        out = {}
        for feat in data.get("features", []):
            props = feat.get("properties") or {}
            if key in props:
                out[str(props[key])] = feat.get("geometry")
        return out
    if isinstance(data, dict):
        return {str(k): v for k, v in data.items()}
    raise ConfigError(f"{path}: geometry file must be a FeatureCollection or a name->geometry object")


def to_geojson(doc: dict, geometry: dict[str, dict], bands: dict[str, object] | None = None):
    """FeatureCollection with one feature per node that has a geometry.

    Returns ``(collection, warnings)``; nodes without geometry are skipped and
    listed as :class:`MissingGeometry` warnings.
    """
    bands = bands or {}
    if "communities" in doc:
        rows = [(c["id"], m) for c in doc["communities"] for m in c["members"]]
    elif "nodes" in doc:
        rows = [(None, m) for m in doc["nodes"]]
    else:
        raise ConfigError("geojson export needs a community or node-set result")
    features, warnings = [], []
    for cid, m in rows:
        geom = geometry.get(m["name"])
        if geom is None:
            warnings.append(MissingGeometry(m["name"]))
            continue
        band = bands.get(m["name"])
        features.append({"type": "Feature", "geometry": geom,
                         "properties": {"name": m["name"], "node_id": m["id"], "community_id": cid,
                                        "band": None if band is None or is_missing(band) else band}})
    return {"type": "FeatureCollection", "features": features}, warnings


# -- drill-down ---------------------------------------------------------------

def _cell(value) -> str:
    return MISSING_MARKER if is_missing(value) else str(value)


def drilldown(doc: dict, attrs: list[str], store: AttributeStore) -> tuple[list[str], list[list[str]]]:
    """Left-join result vertices with stored attributes; absent values become ``NA``."""
    kind = doc["kind"]

    def check(etype):
        for a in attrs:
            if not store.is_declared(etype, a):
                raise UndeclaredAttribute(f"attribute {a!r} is not declared for entity type {etype!r}")

    def vals(etype, vid):
        return [_cell(store.lookup(etype, vid, a)) for a in attrs]

    if kind == ResultKind.MATCHES.value:
        for st in doc["stages"]:
            check(st["left_entity"])
            check(st["right_entity"])
        header = ["stage", "layer", "community_id", "name"] + attrs
        rows = []
        for st in doc["stages"]:
            for p in st["pairs"]:
                for side in ("left", "right"):
                    etype, layer = st[f"{side}_entity"], st[f"{side}_layer"]
                    rows += [[str(st["stage"]), layer, str(p[side]), m["name"]] + vals(etype, m["id"])
                             for m in p[f"{side}_members"]]
        return header, rows
    etype = doc["entity_type"]
    check(etype)
    if kind == ResultKind.COMMUNITIES.value:
        header = ["community_id", "name"] + attrs
        rows = [[str(c["id"]), m["name"]] + vals(etype, m["id"])
                for c in doc["communities"] for m in c["members"]]
        return header, rows
    items = doc.get("nodes", doc.get("scores", []))
    header = ["name"] + attrs
    return header, [[m["name"]] + vals(etype, m["id"]) for m in items]


def drilldown_csv(doc: dict, attrs: list[str], store: AttributeStore) -> str:
    header, rows = drilldown(doc, attrs, store)
    return _csv_text(header, rows)


# -- writing ------------------------------------------------------------------

def export(doc: dict, fmt: str, path, geometry: dict | None = None, bands: dict | None = None) -> list:
    """Write ``doc`` in ``fmt`` to ``path``; returns warnings (geojson only)."""
    warnings: list = []
    if fmt == "csv":
        text = to_csv(doc)
    elif fmt == "dot":
        text = to_dot(doc)
    elif fmt == "json":
        text = to_json(doc)
    elif fmt == "geojson":
        if geometry is None:
            raise ConfigError("geojson export needs a geometry file")
        fc, warnings = to_geojson(doc, geometry, bands)
        text = json.dumps(fc) + "\n"
    else:
        raise ConfigError(f"unknown export format {fmt!r}; expected one of {', '.join(FORMATS)}")
    Path(path).write_text(text, encoding="utf-8")
    return warnings


@dataclass
class RunManifest:
    """What a run did and what it cost; Ψ time and composition time kept apart."""

    config: str | None
    expression: str
    psi_hits: int = 0
    psi_misses: int = 0
    psi_seconds: float = 0.0
    compose_seconds: float = 0.0
    total_seconds: float = 0.0
    outputs: list[str] = field(default_factory=list)
    config_fingerprint: str | None = None
    deterministic: bool = True
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))

    @classmethod
    def from_result(cls, result: Result, config: str | None, total_seconds: float, **kw) -> "RunManifest":
        s = result.stats
        return cls(config=config, expression=result.text,
                   psi_hits=int(s.get("psi_hits", 0)), psi_misses=int(s.get("psi_misses", 0)),
                   psi_seconds=float(s.get("psi_seconds", 0.0)),
                   compose_seconds=float(s.get("compose_seconds", 0.0)),
                   total_seconds=total_seconds, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        tmp = f"{path}.tmp"
        Path(tmp).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)
