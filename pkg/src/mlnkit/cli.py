"""``mlnkit`` command line.

Exit codes: 0 success, 1 I/O, 2 expression or type error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import yaml

from .cache import DEFAULT_PARAMS, PsiCache, default_cache_dir
from .config import build_mln, config_fingerprint
from .errors import ConfigError, ExpressionError, MlnError, NoLayerMention
from .exprlang.ast import PsiNode, leaves
from .exprlang.engine import Engine
from .exprlang.syntax import expand_groups
from .export import (
    FORMATS,
    RunManifest,
    drilldown_csv,
    export,
    load_document,
    load_geometry,
    result_document,
    to_csv,
    to_json,
)
from .model import PsiKind
from .psi import TOP_DECILE
from .translate import KeywordRow, KeywordTable, translate

log = logging.getLogger("mlnkit")

EXIT_OK, EXIT_IO, EXIT_EXPR, EXIT_DATA = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlnkit", description="Multilayer network analysis by per-layer "
                                "analysis and cross-layer composition.")
    p.add_argument("--config", help="layer-registry YAML file")
    p.add_argument("--cache-dir", help="analysis cache directory (default: $MLNKIT_CACHE_DIR "
                   "or $XDG_CACHE_HOME/mlnkit)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-layer analyses")
    p.add_argument("--seedless-deterministic", action=argparse.BooleanOptionalAction, default=True,
                   help="deterministic tie-breaking everywhere (default on)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build every layer and warm the analysis cache")
    b.add_argument("--precompute", default="community,degree,closeness",
                   help="comma-separated analyses to cache per layer ('' for none)")

    sub.add_parser("stats", help="per-layer node and edge counts")

    r = sub.add_parser("run", help="evaluate an expression or a batch file of expressions")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("expression", nargs="?")
    src.add_argument("--batch", help="file with one expression per line ('#' comments)")
    r.add_argument("--out", default="mlnkit-out", help="output directory")
    r.add_argument("--resolution", type=float, default=DEFAULT_PARAMS["resolution"])
    r.add_argument("--strict-hubs", action="store_true",
                   help="reject centrality operands without a hub rule instead of using top_pct=10")

    t = sub.add_parser("translate", help="suggest expressions for an English objective")
    obj = t.add_mutually_exclusive_group(required=True)
    obj.add_argument("objective", nargs="?")
    obj.add_argument("--objective", dest="objective_opt", metavar="TEXT")
    t.add_argument("--synonyms", help="YAML map of layer id -> phrases (replaces the config's synonyms)")
    t.add_argument("--keywords", help="YAML list of extra keyword rows")
    t.add_argument("--override", action="store_true", help="extra keyword rows replace default meanings")
    t.add_argument("--all", action="store_true", help="show every candidate, not just the best")

    d = sub.add_parser("drilldown", help="join a result file with stored attributes")
    d.add_argument("result", help="result.json written by 'run'")
    d.add_argument("--attrs", required=True, help="comma-separated attribute names")
    d.add_argument("--out", help="output CSV (default: stdout)")

    e = sub.add_parser("export", help="re-export a result file")
    e.add_argument("result", help="result.json written by 'run'")
    e.add_argument("--format", choices=FORMATS, required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--geometry", help="GeoJSON geometry file (geojson format)")
    e.add_argument("--geometry-key", default="name", help="feature property holding the node name")
    e.add_argument("--band-attr", help="attribute written as each feature's 'band'")

    c = sub.add_parser("cache", help="inspect or clear the analysis cache")
    c.add_argument("action", choices=("ls", "clear"))
    return p


def _need_config(args):
    if not args.config:
        raise FileNotFoundError("--config is required for this command")
    return args.config


def _cache(args) -> PsiCache:
    return PsiCache(Path(args.cache_dir) if args.cache_dir else default_cache_dir())


def _layer_items(schema, kinds):
    return [(lid, spec.graph, kind, DEFAULT_PARAMS if kind is PsiKind.COMMUNITY else {})
            for lid, spec in schema.layers.items() for kind in kinds]


def cmd_build(args, out) -> int:
    built = build_mln(_need_config(args))
    for rep in built.reports:
        for line in rep.lines():
            print(line, file=sys.stderr)
    for line in built.stats_lines():
        print(line, file=out)
    kinds = [PsiKind(k.strip()) for k in args.precompute.split(",") if k.strip()]
    if kinds:
        cache = _cache(args)
        t0 = time.perf_counter()
        n = cache.precompute(_layer_items(built.schema, kinds), args.jobs)
        print(f"cached {n} new analyses in {time.perf_counter() - t0:.2f}s ({cache.root})", file=out)
    return EXIT_OK


def cmd_stats(args, out) -> int:
    built = build_mln(_need_config(args))
    print(f"schema: {built.schema.kind()}", file=out)
    for line in built.stats_lines():
        print(line, file=out)
    for x in built.schema.inter_layer.values():
        print(f"{x.layer_a} <-> {x.layer_b}: {len(x)} links", file=out)
    return EXIT_OK


def _write_result(result, schema, outdir: Path, config, t0, fingerprint, deterministic) -> RunManifest:
    outdir.mkdir(parents=True, exist_ok=True)
    doc = result_document(result, schema)
    paths = [outdir / "result.json", outdir / "result.csv"]
    paths[0].write_text(to_json(doc), encoding="utf-8")
    paths[1].write_text(to_csv(doc), encoding="utf-8")
    man = RunManifest.from_result(result, config, time.perf_counter() - t0,
                                  outputs=[str(p) for p in paths] + [str(outdir / "manifest.json")],
                                  config_fingerprint=fingerprint, deterministic=deterministic)
    man.write(outdir / "manifest.json")
    return man


def cmd_run(args, out) -> int:
    config = _need_config(args)
    built = build_mln(config)
    fingerprint = config_fingerprint(config)
    cache = _cache(args)
    engine = Engine(built.schema, built.store, cache,
                    psi_params=dict(DEFAULT_PARAMS, resolution=args.resolution), jobs=args.jobs,
                    default_hub_rule=None if args.strict_hubs else TOP_DECILE)
    if args.batch:
        lines = Path(args.batch).read_text(encoding="utf-8").splitlines()
        texts = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    else:
        texts = [args.expression]
    queries = [q for t in texts for q in expand_groups(t, built.schema.groups)]
    prepared = [engine.prepare(q) for q in queries]
    for q in prepared:
        engine.check(q)
    # warm every leaf analysis of the batch at once so workers share the load
    todo = {}
    for q in prepared:
        for leaf in leaves(q):
            if isinstance(leaf, PsiNode):
                todo.setdefault((leaf.kind, leaf.layer), leaf)
    if args.jobs > 1 and len(todo) > 1:
        items = [("", engine._graph(le), kind, engine.psi_params if kind is PsiKind.COMMUNITY else {})
                 for kind, le in todo]
        cache.precompute(items, args.jobs)
    outroot = Path(args.out)
    for i, q in enumerate(prepared, 1):
        t0 = time.perf_counter()
        result = engine.evaluate(q)
        outdir = outroot if len(prepared) == 1 else outroot / f"q{i:03d}"
        man = _write_result(result, built.schema, outdir, str(config), t0, fingerprint,
                            args.seedless_deterministic)
        size = (len(result.communities) if result.communities is not None
                else len(result.nodes.members) if result.nodes is not None
                else len(result.chain.stages) if result.chain is not None else result.scores.scores.size)
        print(f"{result.text}\n  {result.kind.value}: {size}; analyses {man.psi_hits} hit / "
              f"{man.psi_misses} computed; wrote {outdir}", file=out)
    return EXIT_OK


def cmd_translate(args, out) -> int:
    built = build_mln(_need_config(args))
    synonyms = built.synonyms
    if args.synonyms:
        synonyms = _read_yaml(args.synonyms) or {}
    table = KeywordTable()
    if args.keywords:
        table = table.extend(_keyword_rows(_read_yaml(args.keywords) or []), override=args.override)
    try:
        tr = translate(args.objective or args.objective_opt, built.schema, synonyms, table, built.store)
    except NoLayerMention as exc:
        print(_describe(exc), file=sys.stderr)
        return EXIT_EXPR
    for d in tr.diagnostics:
        print(str(d), file=sys.stderr)
    if not tr.candidates:
        print("no candidate expression", file=sys.stderr)
        return EXIT_EXPR
    for c in tr.candidates if args.all else tr.candidates[:1]:
        print(f"{c.expression}\t(coverage {c.coverage:.2f})", file=out)
        for d in c.diagnostics:
            print(f"  {d}", file=sys.stderr)
    return EXIT_OK


def _read_yaml(path):
    return yaml.safe_load(Path(path).read_text(encoding="utf-8"))


def _keyword_rows(entries) -> list[KeywordRow]:
    """``[{phrases: [...], target: psi|not|theta, value: ..., context: ...}, ...]``"""
    rows = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict) or "phrases" not in e or e.get("target") not in ("psi", "not", "theta"):
            raise ConfigError(f"keyword row {i + 1}: needs 'phrases' and target psi, not or theta")
        rows.append(KeywordRow(frozenset(str(p).lower() for p in e["phrases"]), e["target"],
                               e.get("value"), e.get("context")))
    return rows


def cmd_drilldown(args, out) -> int:
    built = build_mln(_need_config(args))
    doc = load_document(args.result)
    text = drilldown_csv(doc, [a.strip() for a in args.attrs.split(",") if a.strip()], built.store)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK


def cmd_export(args, out) -> int:
    doc = load_document(args.result)
    geometry = bands = None
    if args.format == "geojson":
        if not args.geometry:
            raise FileNotFoundError("geojson export needs --geometry FILE")
        geometry = load_geometry(args.geometry, args.geometry_key)
        if args.band_attr:
            built = build_mln(_need_config(args))
            uni = built.schema.universes[doc["universe"]]
            bands = {uni.name_of(v): built.store.lookup(doc["entity_type"], v, args.band_attr)
                     for v in range(len(uni))}
    warnings = export(doc, args.format, args.out, geometry, bands)
    for w in warnings:
        print(str(w), file=sys.stderr)
    print(f"wrote {args.out}" + (f" ({len(warnings)} warnings)" if warnings else ""), file=out)
    return EXIT_OK


def cmd_cache(args, out) -> int:
    cache = _cache(args)
    if args.action == "ls":
        entries = cache.entries()
        for ghash, tag, size in entries:
            print(f"{ghash[:16]}  {tag}  {size} bytes", file=out)
        print(f"{len(entries)} entries in {cache.root}", file=out)
    else:
        print(f"removed {cache.clear()} entries from {cache.root}", file=out)
    return EXIT_OK


COMMANDS = {"build": cmd_build, "stats": cmd_stats, "run": cmd_run, "translate": cmd_translate,
            "drilldown": cmd_drilldown, "export": cmd_export, "cache": cmd_cache}


def _describe(exc: Exception) -> str:
    name, msg = type(exc).__name__, str(exc)
    return msg if msg.startswith(name) else f"{name}: {msg}"


def main(argv=None, out=None) -> int:
    args = _parser().parse_args(argv)
    out = out or sys.stdout
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except ExpressionError as exc:
        print(_describe(exc), file=sys.stderr)
        return EXIT_EXPR
    except MlnError as exc:
        print(_describe(exc), file=sys.stderr)
        return getattr(exc, "exit_code", EXIT_DATA)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
