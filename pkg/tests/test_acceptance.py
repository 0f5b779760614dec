"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (the lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import os
import sys
import time
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlnkit.cache import PsiCache  # noqa: E402
from mlnkit.errors import IllegalTheta  # noqa: E402
from mlnkit.exprlang import Engine, expand_groups, format, parse, typecheck  # noqa: E402
from mlnkit.graph import (  # noqa: E402
    Partition,
    as_materialized,
    complement,
    complete,
    connected_components,
    edgeless,
    from_edge_list,
    intersect,
    union,
)
from mlnkit.model import InterLayerEdges, LayerSpec, MlnSchema, VertexUniverse  # noqa: E402
from mlnkit.psi import HubRule, closeness, degree_centrality, extract_hubs, louvain, modularity  # noqa: E402
from mlnkit.synth import gnp, layer_pair_with_core  # noqa: E402
from mlnkit.theta import (  # noqa: E402
    BipartiteMetaGraph,
    MetaEdge,
    MetaNode,
    and_communities,
    chain_mwm,
    mwm,
    mwm_layers,
)
from mlnkit.translate import KeywordTable, translate  # noqa: E402

from oracles import all_pairs, best_partition, edge_set, max_matching_weight  # noqa: E402
from schemas import A3_EXPRESSION, A3_OBJECTIVE, DBLP_SYNONYMS, EXPRESSIONS, ILLEGAL, SCHEMAS, dblp_schema  # noqa: E402

RESULTS: dict[int, tuple[bool, str]] = {}


def status(ok: bool | None) -> str:
    return "SKIP" if ok is None else "PASS" if ok else "FAIL"


def report(n: int, ok: bool | None, detail: str) -> None:
    """``ok=None`` marks a data-gated check that could not run."""
    RESULTS[n] = (ok, detail)
    print(f"criterion {n:2d}: {status(ok)}  {detail}")


# -- 1 ------------------------------------------------------------------------------

def check_mwm_optimality():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        r, c = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        w = rng.integers(0, 101, size=(r, c))
        left = [MetaNode("L", i, np.array([i])) for i in range(r)]
        right = [MetaNode("R", j, np.array([j])) for j in range(c)]
        edges = [MetaEdge(i, j, int(w[i, j])) for i in range(r) for j in range(c) if w[i, j] > 0]
        res = mwm(BipartiteMetaGraph("L", "R", left, right, edges))
        used_l = [a.community_id for a, _, _ in res.pairs]
        used_r = [b.community_id for _, b, _ in res.pairs]
        valid = len(set(used_l)) == len(used_l) and len(set(used_r)) == len(used_r)
        if not valid or res.total_weight != max_matching_weight(tuple(map(tuple, w.tolist()))):
            bad += 1
    dt = time.perf_counter() - t0
    report(1, bad == 0 and dt < 10, f"MWM optimal on {200 - bad}/200 random meta-graphs in {dt:.2f}s (limit 10s)")


# -- 2 ------------------------------------------------------------------------------

def _co_pairs(p: Partition) -> set:
    return {(int(a), int(b)) for blk in p.blocks for a, b in combinations(blk.tolist(), 2)}


def check_and_invariants():
    rng = np.random.default_rng(7)
    violations = 0
    jaccard = []
    communities = 0
    for _ in range(100):
        g1, g2 = gnp(100, 0.05, rng), gnp(100, 0.05, rng)
        c1, c2 = louvain(g1), louvain(g2)
        out = and_communities(c1, c2, g1, g2)
        both = edge_set(g1) & edge_set(g2)
        inter = intersect(g1, g2)
        comp = connected_components(inter).labels
        support = edge_set(out.support)
        for blk in out.communities:
            if blk.size < 2:
                continue
            communities += 1
            ms = set(blk.tolist())
            inside = {e for e in support if e <= ms}
            a = np.unique(c1.partition.labels[blk]).size == 1 and np.unique(c2.partition.labels[blk]).size == 1
            b = inside <= both
            idx = {v: i for i, v in enumerate(sorted(ms))}
            sub = from_edge_list([tuple(idx[v] for v in e) for e in inside], len(ms))
            c = connected_components(sub).n_blocks == 1
            d = np.unique(comp[blk]).size == 1
            violations += not (a and b and c and d)
        ref = _co_pairs(louvain(inter).partition)
        got = _co_pairs(out.partition)
        jaccard.append(len(ref & got) / len(ref | got) if ref | got else 1.0)
    report(2, violations == 0,
           f"{communities} AND communities over 100 layer pairs, {violations} violating (a)-(d); "
           f"mean pair Jaccard vs louvain(intersection) = {np.mean(jaccard):.3f} (informational)")


# -- 3 ------------------------------------------------------------------------------

def check_louvain_fixture():
    g = from_edge_list([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)], 6)
    best, arg = best_partition(6, edge_set(g))
    c = louvain(g)
    blocks = [b.tolist() for b in c.communities]
    runs = {louvain(g).partition.labels.tobytes() + np.float64(louvain(g).modularity).tobytes() for _ in range(5)}
    ok = (blocks == arg and best == Fraction(5, 14) and abs(c.modularity - 5 / 14) <= 1e-12 and len(runs) == 1)
    report(3, ok, f"partition {blocks} (oracle {arg}), modularity {c.modularity!r} vs 5/14, "
                  f"{len(runs)} distinct outputs over 5 runs")


# -- 4 ------------------------------------------------------------------------------

def check_centrality():
    star = from_edge_list([(0, i) for i in range(1, 5)], 5)
    p3 = from_edge_list([(0, 1), (1, 2)], 3)
    two = from_edge_list([(0, 1), (2, 3)], 4)
    cases = [
        (closeness(star).scores, [1.0] + [4 / 7] * 4),
        (closeness(p3).scores, [2 / 3, 1.0, 2 / 3]),
        (closeness(two).scores, [1 / 3] * 4),
        (degree_centrality(star).scores, [1.0] + [0.25] * 4),
        (degree_centrality(complete(4)).scores, [1.0] * 4),
        (degree_centrality(edgeless(3)).scores, [0.0] * 3),
    ]
    worst = max(float(np.max(np.abs(np.asarray(got) - np.asarray(exp)))) for got, exp in cases)
    hubs_ok = (extract_hubs(closeness(star), HubRule("top_k", 1)).members.tolist() == [0]
               and extract_hubs(closeness(star), HubRule("threshold", 0.9)).members.tolist() == [0])
    report(4, worst <= 1e-12 and hubs_ok, f"max deviation {worst:.2e} over star/path/two-component fixtures")


# -- 5 ------------------------------------------------------------------------------

def _adj(g) -> set:
    n = g.universe_size
    return {(u, v) for u in range(n) for v in range(u + 1, n) if g.has_edge(u, v)}


def check_boolean_laws():
    rng = np.random.default_rng(11)
    failures = 0
    for _ in range(200):
        n = int(rng.integers(1, 65))
        g1, g2, g3 = (gnp(n, float(rng.uniform(0, 0.5)), rng) for _ in range(3))
        full = n * (n - 1) // 2
        laws = [
            intersect(g1, g2) == intersect(g2, g1),
            union(g1, g2) == union(g2, g1),
            intersect(intersect(g1, g2), g3) == intersect(g1, intersect(g2, g3)),
            union(union(g1, g2), g3) == union(g1, union(g2, g3)),
            intersect(g1, g1) == g1,
            union(g1, edgeless(n)) == g1,
            intersect(g1, complement(g1)).num_edges == 0,
            as_materialized(union(g1, complement(g1)), None) == complete(n),
            g1.num_edges + complement(g1).num_edges == full,
            edge_set(as_materialized(complement(g1), None)) == all_pairs(n) - edge_set(g1),
            _adj(complement(complement(g1))) == _adj(g1),
            _adj(complement(union(g1, g2))) == _adj(intersect(complement(g1), complement(g2))),
            _adj(complement(intersect(g1, g2))) == _adj(union(complement(g1), complement(g2))),
        ]
        failures += not all(laws)
    report(5, failures == 0, f"{200 - failures}/200 random graph triples (n <= 64) satisfy every law")


# -- 6 ------------------------------------------------------------------------------

def check_expressions():
    ok_count, problems = 0, []
    for name, (schema_name, text) in EXPRESSIONS.items():
        schema, store = SCHEMAS[schema_name]()
        try:
            for q_text in expand_groups(text, schema.groups):
                q = parse(q_text)
                typecheck(q, schema, store)
                assert parse(format(q)) == q and format(parse(format(q))) == format(q)
            ok_count += 1
        except Exception as exc:  # reported, not raised
            problems.append(f"{name}: {exc}")
    rejected = 0
    for name, (schema_name, text) in ILLEGAL.items():
        schema, store = SCHEMAS[schema_name]()
        try:
            typecheck(parse(text), schema, store)
        except IllegalTheta:
            rejected += 1
    ok = ok_count == 10 and rejected == len(ILLEGAL) == 2
    report(6, ok, f"{ok_count}/10 worked expressions parse, typecheck and round-trip; "
                  f"{rejected}/2 illegal variants rejected with IllegalTheta" + (f"; {problems}" if problems else ""))


# -- 7 ------------------------------------------------------------------------------

def check_translator():
    table = KeywordTable()

    def maps(phrase, target, value=None, context=None):
        return any(r.target == target and r.value == value and r.context == context for r in table.lookup(phrase))

    rows_ok = all([
        maps("coverage", "psi", "closeness"),
        maps("cluster", "psi", "community"),
        maps("group", "psi", "community"),
        maps("never", "not"),
        maps("for each", "theta", "MWM", "HeMLN"),
        maps("and", "theta", "AND", "HoMLN"),
    ])
    s, st_ = dblp_schema()
    exprs = translate(A3_OBJECTIVE, s, DBLP_SYNONYMS, store=st_).expressions()
    top = exprs[:3]
    report(7, rows_ok and A3_EXPRESSION in top,
           f"keyword rows {'ok' if rows_ok else 'WRONG'}; A3 objective -> {top[:1]}")


# -- 8 ------------------------------------------------------------------------------

def check_carry_forward():
    s = MlnSchema("chain")
    ua = s.add_universe(VertexUniverse("a", [f"a{i}" for i in range(8)]).freeze(), "A")
    ub = s.add_universe(VertexUniverse("b", [f"b{i}" for i in range(8)]).freeze(), "B")
    uc = s.add_universe(VertexUniverse("c", [f"c{i}" for i in range(6)]).freeze(), "C")
    pairs8 = [(0, 1), (2, 3), (4, 5), (6, 7)]
    s.add_layer(LayerSpec("A-L", "A", ua, from_edge_list(pairs8, 8), {}))
    s.add_layer(LayerSpec("B-L", "B", ub, from_edge_list(pairs8, 8), {}))
    s.add_layer(LayerSpec("C-L", "C", uc, from_edge_list([(0, 1), (2, 3), (4, 5)], 6), {}))
    # A-B links touch only B communities {0,1} and {2,3}
    s.add_inter_layer(InterLayerEdges("A-L", "B-L", np.array([[0, 0], [1, 1], [2, 2], [3, 3], [4, 2]])))
    # B-C links also touch unmatched B communities, which must not be carried
    s.add_inter_layer(InterLayerEdges("B-L", "C-L", np.array([[0, 0], [2, 2], [4, 4], [5, 4], [6, 0]])))
    res = Engine(s).evaluate("PSI[community](A-L) MWM PSI[community](B-L) MWM PSI[community](C-L)")
    st1, st2 = res.chain.stages
    matched_b = sorted(b.community_id for _, b, _ in st1.pairs)
    left2 = sorted([a.community_id for a, _, _ in st2.pairs] + [m.community_id for m in st2.unmatched_left])
    ok = matched_b == [0, 1] and left2 == [0, 1] and st2.left_layer == "B-L"
    report(8, ok, f"stage 1 matched B communities {matched_b}; stage 2 left side {left2}")


# -- 9 ------------------------------------------------------------------------------

def check_decoupling_speed():
    t_all = time.perf_counter()
    g1, g2 = layer_pair_with_core(20_000, 100, 10.5, 0.6, np.random.default_rng(99))
    t0 = time.perf_counter()
    louvain(intersect(g1, g2))
    single = time.perf_counter() - t0
    s = MlnSchema("speed")
    uni = s.add_universe(VertexUniverse("v", [str(i) for i in range(20_000)]).freeze(), "V")
    s.add_layer(LayerSpec("V-One", "V", uni, g1, {}))
    s.add_layer(LayerSpec("V-Two", "V", uni, g2, {}))
    eng = Engine(s, cache=PsiCache(None))
    text = "PSI[community](V-One) AND PSI[community](V-Two)"
    eng.evaluate(text)  # one-time per-layer cost
    t0 = time.perf_counter()
    res = eng.evaluate(text)
    warm = time.perf_counter() - t0
    total = time.perf_counter() - t_all
    avg_deg = (2 * g1.num_edges / 20_000 + 2 * g2.num_edges / 20_000) / 2
    ok = res.stats["psi_misses"] == 0 and warm <= 0.5 * single and total < 120
    report(9, ok, f"warm AND {warm:.3f}s vs cold louvain(intersection) {single:.3f}s "
                  f"({100 * warm / single:.0f}%, limit 50%); avg degree {avg_deg:.1f}; whole check {total:.1f}s")


# -- 10 -----------------------------------------------------------------------------

AIRLINE_EDGES = {"American": 746, "Delta": 717, "Southwest": 688, "Allegiant": 346, "Spirit": 189, "Frontier": 379}
TOP5_AMERICAN = {"Dallas", "Chicago", "Charlotte", "Philadelphia", "Phoenix"}


def check_airline_data():
    path = os.environ.get("MLNKIT_AIRLINE_CONFIG")
    if not path:
        report(10, None, "set MLNKIT_AIRLINE_CONFIG to a config for the full airline data")
        return None
    from mlnkit.config import build_mln
    mln = build_mln(path)
    layers = {lid: spec for lid, spec in mln.schema.layers.items()}
    american = next(lid for lid in layers if "American" in lid)
    stats_ok = all(spec.graph.universe_size == 270 for spec in layers.values())
    for airline, edges in AIRLINE_EDGES.items():
        lid = next((lid for lid in layers if airline in lid), None)
        stats_ok &= lid is not None and layers[lid].graph.num_edges == edges
    if not stats_ok:
        report(10, None, "supplied airline data does not match the expected layer statistics")
        return None
    res = Engine(mln.schema, mln.store).evaluate(f"PSI[closeness]({american}); FILTER top_k(5)")
    names = {mln.schema.universe_of(american).name_of(v) for v in res.nodes.members.tolist()}
    report(10, names == TOP5_AMERICAN, f"top-5 closeness for American: {sorted(names)}")
    return names == TOP5_AMERICAN


CHECKS = [check_mwm_optimality, check_and_invariants, check_louvain_fixture, check_centrality,
          check_boolean_laws, check_expressions, check_translator, check_carry_forward,
          check_decoupling_speed, check_airline_data]


# -- pytest entry points -------------------------------------------------------------

@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n):
    CHECKS[n - 1]()
    ok, detail = RESULTS[n]
    assert ok, detail


def test_criterion_10_airline_data():
    outcome = check_airline_data()
    if outcome is None:
        pytest.skip(RESULTS[10][1])
    assert outcome, RESULTS[10][1]


if __name__ == "__main__":
    for check in CHECKS:
        check()
    sys.exit(0 if all(ok is not False for ok, _ in RESULTS.values()) else 1)
