"""Layer-registry config (YAML) and MLN assembly.

Example::

    name: airline
    layers:
      - id: USCITY-American-DirectFlight
        entity_type: USCITY
        builder: explicit               # explicit | count_threshold | band
        source_file: american.csv       # | correlation | interval_clique
    inter_layer:
      - {a: LAYER-A, b: LAYER-B, source_file: links.csv}
    attributes:
      - {entity_type: USCITY, source_file: cities.csv, columns: {population: int}}
    nodesets:
      - {name: allegiant-active-hubs, entity_type: USCITY, source_file: hubs.csv}
    groups:
      other-airlines: [USCITY-American-DirectFlight, ...]
    synonyms:
      USCITY-American-DirectFlight: [american, american airlines]
    universes:                          # optional fixed vertex lists
      USCITY: {nodes_file: cities.csv}

Paths are relative to the config file. Layers share a vertex universe when
they share an ``entity_type``, unless a layer names its own ``universe``.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, UnknownNodeName
from .graph import Graph
from .ingest import (
    DEFAULT_PERCENT_CHANGE_BANDS,
    BuildReport,
    build_band_similarity,
    build_correlation_similarity,
    build_count_threshold,
    build_explicit,
    build_interval_clique,
    read_pair_counts,
    read_pairs,
    read_rows,
    read_scalars,
    read_vectors,
)
from .model import AttributeStore, InterLayerEdges, LayerSpec, MlnSchema, VertexUniverse

log = logging.getLogger(__name__)

BUILDERS = ("explicit", "count_threshold", "band", "correlation", "interval_clique")


@dataclass
class BuiltMln:
    schema: MlnSchema
    store: AttributeStore
    synonyms: dict[str, list[str]] = field(default_factory=dict)
    reports: list[BuildReport] = field(default_factory=list)
    config_path: str | None = None

    def stats_lines(self) -> list[str]:
        return [f"{lid}: {spec.graph.n} nodes, {spec.graph.num_edges} edges"
                for lid, spec in self.schema.layers.items()]


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return entry[key]


def _read_layer_names(builder: str, path: Path) -> list[str]:
    """Every vertex name a layer source mentions, in file order."""
    if builder in ("explicit",):
        return [n for _, a, b in read_pairs(path) for n in (a, b)]
    if builder == "count_threshold":
        return [n for _, a, b, _c in read_pair_counts(path) for n in (a, b)]
    if builder == "correlation":
        return [nm for _, nm, _v in read_vectors(path)]
    return [nm for _, nm, _v in read_scalars(path)]


def _build_layer(builder: str, params: dict, path: Path, universe: VertexUniverse,
                 report: BuildReport) -> Graph:
    n = len(universe)
    if builder == "explicit":
        return build_explicit(path, universe)
    if builder == "count_threshold":
        rows = [(universe.id_of(a), universe.id_of(b), c) for _, a, b, c in read_pair_counts(path)]
        return build_count_threshold(rows, int(params.get("min_count", 1)), n)
    if builder == "band":
        edges = params.get("band_edges", DEFAULT_PERCENT_CHANGE_BANDS)
        edges = [float(x) for x in edges]
        vals = {universe.id_of(nm): v for _, nm, v in read_scalars(path)}
        return build_band_similarity(vals, edges, n, report)
    if builder == "correlation":
        vecs = {universe.id_of(nm): v for _, nm, v in read_vectors(path)}
        return build_correlation_similarity(vecs, float(params.get("min_correlation", 0.9)), n, report)
    if builder == "interval_clique":
        keys = {universe.id_of(nm): v for _, nm, v in read_scalars(path, as_int=True)}
        return build_interval_clique(keys, int(params.get("interval_k", 1)), n)
    raise ConfigError(f"unknown builder {builder!r}; expected one of {', '.join(BUILDERS)}")


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(cfg, dict) or not cfg.get("layers"):
        raise ConfigError(f"{path}: config needs a non-empty 'layers' list")
    return cfg


def build_mln(config_path, cfg: dict | None = None) -> BuiltMln:
    """Read every source file named by the config and assemble the MLN.

    Names are interned in two passes: layer sources first (plus optional
    fixed node lists), then universes are frozen so inter-layer links must
    reference known vertices. Attribute rows for unknown vertices are
    skipped with a warning.
    """
    config_path = Path(config_path)
    cfg = cfg if cfg is not None else load_config(config_path)
    base = config_path.parent

    def src(entry: dict, where: str) -> Path:
        p = base / str(_require(entry, "source_file", where))
        if not p.exists():
            raise FileNotFoundError(f"{where}: source file not found: {p}")
        return p

    schema = MlnSchema(str(cfg.get("name", config_path.stem)))
    store = AttributeStore()
    universes: dict[str, VertexUniverse] = {}
    layer_entries = []

    for i, entry in enumerate(cfg["layers"]):
        where = f"layers[{i}]"
        lid = str(_require(entry, "id", where))
        etype = str(_require(entry, "entity_type", where))
        builder = str(entry.get("builder", "explicit"))
        if builder not in BUILDERS:
            raise ConfigError(f"{where}: unknown builder {builder!r}")
        uname = str(entry.get("universe", etype))
        if uname not in universes:
            universes[uname] = VertexUniverse(uname)
            schema.add_universe(universes[uname], etype)
        elif schema.entity_of_universe(uname) != etype:
            raise ConfigError(f"{where}: universe {uname!r} already holds entity type "
                              f"{schema.entity_of_universe(uname)!r}")
        layer_entries.append((lid, etype, builder, dict(entry.get("builder_params") or {}),
                              src(entry, where), universes[uname]))

    # pass 1: fixed node lists, then every name in layer sources
    for uname, spec in (cfg.get("universes") or {}).items():
        if uname not in universes:
            raise ConfigError(f"universes: {uname!r} is not used by any layer")
        if spec and spec.get("nodes_file"):
            # either a plain name list or a `node_id,name` sidecar
            rows, _ = read_rows(base / spec["nodes_file"])
            if rows and all(len(f) > 1 and f[0].isdigit() for _, f in rows):
                rows.sort(key=lambda r: int(r[1][0]))
                names = [f[1] for _, f in rows]
            else:
                names = [f[0] for _, f in rows]
            for nm in names:
                universes[uname].intern(nm)
    for lid, etype, builder, params, path, uni in layer_entries:
        for nm in _read_layer_names(builder, path):
            uni.intern(nm)
    for uni in universes.values():
        uni.freeze()

    reports = []
    for lid, etype, builder, params, path, uni in layer_entries:
        report = BuildReport(layer_id=lid)
        graph = _build_layer(builder, params, path, uni, report)
        schema.add_layer(LayerSpec(lid, etype, uni, graph,
                                   {"builder": builder, "params": params, "source_file": str(path)}))
        reports.append(report)

    for i, entry in enumerate(cfg.get("inter_layer") or []):
        where = f"inter_layer[{i}]"
        a, b = str(_require(entry, "a", where)), str(_require(entry, "b", where))
        ua, ub = schema.universe_of(a), schema.universe_of(b)
        path = src(entry, where)
        links = []
        for lineno, x, y in read_pairs(path):
            try:
                links.append((ua.id_of(x), ub.id_of(y)))
            except UnknownNodeName as exc:
                raise UnknownNodeName(f"{path}:{lineno}: {exc}") from None
        schema.add_inter_layer(InterLayerEdges(a, b, links))

    entity_universe = {}
    for uname in universes:
        entity_universe.setdefault(schema.entity_of_universe(uname), universes[uname])

    for i, entry in enumerate(cfg.get("attributes") or []):
        where = f"attributes[{i}]"
        etype = str(_require(entry, "entity_type", where))
        uni = universes.get(str(entry.get("universe", ""))) or entity_universe.get(etype)
        if uni is None:
            raise ConfigError(f"{where}: no layer has entity type {etype!r}")
        path = src(entry, where)
        skipped = store.load_table(etype, path.read_text(encoding="utf-8"), uni,
                                   entry.get("columns"), path=str(path))
        if skipped:
            log.warning("%s: skipped %d row(s) naming unknown %s vertices", path, skipped, etype)

    for i, entry in enumerate(cfg.get("nodesets") or []):
        where = f"nodesets[{i}]"
        name = str(_require(entry, "name", where))
        etype = str(_require(entry, "entity_type", where))
        uni = universes.get(str(entry.get("universe", ""))) or entity_universe.get(etype)
        if uni is None:
            raise ConfigError(f"{where}: no layer has entity type {etype!r}")
        if "members" in entry:
            names = [str(m) for m in entry["members"]]
        else:
            rows, _ = read_rows(src(entry, where))
            names = [f[0] for _, f in rows]
        store.add_node_set(name, uni.name, (uni.id_of(nm) for nm in names))

    for gname, members in (cfg.get("groups") or {}).items():
        schema.add_group(str(gname), [str(m) for m in members])

    synonyms = {str(k): [str(p).lower() for p in (v or [])] for k, v in (cfg.get("synonyms") or {}).items()}
    for lid in synonyms:
        schema.layer(lid)
    return BuiltMln(schema, store, synonyms, reports, str(config_path))


def config_fingerprint(config_path) -> str:
    """Content hash of the config plus every file it references (for manifests)."""
    import hashlib

    config_path = Path(config_path)
    cfg = load_config(config_path)
    h = hashlib.sha256(config_path.read_bytes())
    sections: list[Any] = list(cfg.get("layers") or []) + list(cfg.get("inter_layer") or []) \
        + list(cfg.get("attributes") or []) + list(cfg.get("nodesets") or [])
    for entry in sections:
        f = entry.get("source_file") if isinstance(entry, dict) else None
        if f and (config_path.parent / f).exists():
            h.update((config_path.parent / f).read_bytes())
    return h.hexdigest()


__all__ = ["BuiltMln", "BUILDERS", "build_mln", "load_config", "config_fingerprint"]
