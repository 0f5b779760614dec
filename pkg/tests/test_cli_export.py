import csv
import io
import json
from pathlib import Path

import pytest

from mlnkit.cli import main
from mlnkit.config import build_mln
from mlnkit.errors import ConfigError, UndeclaredAttribute
from mlnkit.export import (
    MISSING_MARKER,
    MissingGeometry,
    RunManifest,
    drilldown,
    export,
    load_document,
    load_geometry,
    membership,
    result_document,
    to_csv,
    to_dot,
    to_geojson,
)
from mlnkit.exprlang import Engine

from schemas import EXPRESSIONS, imdb_schema

DATA = Path(__file__).parent / "data"
AIR = str(DATA / "airline" / "config.yaml")
DBLP = str(DATA / "dblp" / "config.yaml")
A2 = ("PSI[closeness](USCITY-Allegiant-DirectFlight) MINUS (PSI[closeness](USCITY-Allegiant-DirectFlight) AND "
      "{OR PSI[closeness]($EACH(other-airlines))}) MINUS NODESET(allegiant-active-hubs); "
      "FILTER sort_by(population, desc)")
OR_QUERY = "PSI[community](USCITY-American-DirectFlight) OR PSI[community](USCITY-Delta-DirectFlight)"
EMPTY_QUERY = "PSI[community](USCITY-American-DirectFlight) AND PSI[community](NOT(USCITY-American-DirectFlight))"


def run(*argv, cache=None):
    out = io.StringIO()
    args = list(argv)
    if cache is not None:
        args = ["--cache-dir", str(cache)] + args
    code = main(args, out=out)
    return code, out.getvalue()


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# -- build / stats ----------------------------------------------------------------

def test_stats_lines():
    code, text = run("--config", DBLP, "stats")
    assert code == 0
    assert "YEAR-Same-Interval: 18 nodes, 18 edges" in text.splitlines()
    assert text.splitlines()[0] == "schema: HeMLN"


def test_build_warms_cache(tmp_path):
    code, text = run("--config", AIR, "build", cache=tmp_path)
    assert code == 0 and "USCITY-American-DirectFlight: 14 nodes" in text
    assert "cached 12 new analyses" in text
    code, text = run("--config", AIR, "build", "--precompute", "community", cache=tmp_path)
    assert "cached 0 new analyses" in text
    code, text = run("cache", "ls", cache=tmp_path)
    assert code == 0 and text.strip().splitlines()[-1].startswith("12 entries")
    code, text = run("cache", "clear", cache=tmp_path)
    assert "removed 12 entries" in text
    assert run("cache", "ls", cache=tmp_path)[1].startswith("0 entries")


def test_missing_source_file_names_the_path(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("layers:\n  - {id: X-L, entity_type: X, builder: explicit, source_file: nowhere.csv}\n")
    code, _ = run("--config", str(cfg), "stats")
    assert code == 1 and "nowhere.csv" in capsys.readouterr().err


# -- run ------------------------------------------------------------------------------

def test_run_writes_files_and_second_run_computes_nothing(tmp_path):
    out = tmp_path / "out"
    code, text = run("--config", AIR, "run", A2, "--out", str(out), cache=tmp_path / "c")
    assert code == 0 and "4 computed" in text
    assert {p.name for p in out.iterdir()} == {"result.json", "result.csv", "manifest.json"}
    assert read_csv(out / "result.csv")[1][1] == "Grand Rapids"
    code, text = run("--config", AIR, "run", A2, "--out", str(out), cache=tmp_path / "c")
    man = json.loads((out / "manifest.json").read_text())
    assert man["psi_misses"] == 0 and man["psi_hits"] == 4
    assert man["total_seconds"] >= man["psi_seconds"] + man["compose_seconds"]
    assert man["config"] == AIR and man["deterministic"] is True and len(man["config_fingerprint"]) == 64


def test_strict_hubs_rejects_bare_centrality(tmp_path, capsys):
    code, _ = run("--config", AIR, "run", A2, "--strict-hubs", "--out", str(tmp_path), cache=tmp_path / "c")
    assert code == 2 and "MissingHubRule" in capsys.readouterr().err


def test_batch_run_with_group_fanout(tmp_path):
    batch = tmp_path / "q.txt"
    batch.write_text("# airline batch\nPSI[closeness]($EACH(other-airlines)); FILTER top_k(3)\n\n" + OR_QUERY + "\n")
    code, text = run("--config", AIR, "--jobs", "2", "run", "--batch", str(batch), "--out", str(tmp_path / "o"),
                     cache=tmp_path / "c")
    assert code == 0
    dirs = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert dirs == ["q001", "q002", "q003", "q004"]
    assert len(read_csv(tmp_path / "o" / "q002" / "result.csv")) == 4


def test_a5_style_boolean_on_fixture(tmp_path):
    triangles = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
    (tmp_path / "n.csv").write_text("node\n" + "\n".join(f"v{i}" for i in range(10)) + "\n")
    layers = []
    for k in range(4):
        extra = [(k, 6 + k), (3 + k % 3, 6 + (k + 1) % 4)]
        edges = triangles + extra
        (tmp_path / f"l{k}.csv").write_text("".join(f"v{u},v{v}\n" for u, v in edges))
        layers.append(f"  - {{id: X-L{k}, entity_type: X, builder: explicit, source_file: l{k}.csv}}")
    (tmp_path / "c.yaml").write_text("universes:\n  X: {nodes_file: n.csv}\nlayers:\n" + "\n".join(layers) + "\n")
    expr = ("(PSI[community](X-L0) AND PSI[community](X-L1)) AND "
            "(PSI[community](X-L2) AND PSI[community](X-L3))")
    code, _ = run("--config", str(tmp_path / "c.yaml"), "run", expr, "--out", str(tmp_path / "o"),
                  cache=tmp_path / "cache")
    assert code == 0
    rows = read_csv(tmp_path / "o" / "result.csv")
    assert rows[0] == ["community_id", "node_id", "name"]
    groups = {}
    for cid, _, name in rows[1:]:
        groups.setdefault(cid, []).append(name)
    assert sorted(groups.values()) == [["v0", "v1", "v2"], ["v3", "v4", "v5"]]


@pytest.mark.parametrize("argv,code,needle", [
    (["run", "PSI[community](USCITY-American-DirectFlight) AND"], 2, "ExpressionSyntaxError"),
    (["run", "PSI[community](USCITY-American-DirectFlight) MWM PSI[community](USCITY-Delta-DirectFlight)"],
     2, "IllegalTheta"),
    (["run", "PSI[community](Nope)"], 2, "UnknownLayer"),
    (["run", "--batch", "/nonexistent/batch.txt"], 1, "batch.txt"),
])
def test_exit_codes(tmp_path, capsys, argv, code, needle):
    got, _ = run("--config", AIR, *argv[:1], *argv[1:], "--out", str(tmp_path), cache=tmp_path / "c")
    assert got == code and needle in capsys.readouterr().err


def test_data_error_exit_code(tmp_path, capsys):
    (tmp_path / "n.csv").write_text("node\na\nb\n")
    (tmp_path / "e.csv").write_text("a,a\n")
    (tmp_path / "c.yaml").write_text("universes:\n  X: {nodes_file: n.csv}\nlayers:\n"
                                     "  - {id: X-L, entity_type: X, builder: explicit, source_file: e.csv}\n")
    code, _ = run("--config", str(tmp_path / "c.yaml"), "stats")
    assert code == 3 and "SelfLoop" in capsys.readouterr().err


# -- translate --------------------------------------------------------------------------

def test_translate_command(tmp_path, capsys):
    code, text = run("--config", DBLP, "translate",
                     "For each 3-year interval group, find the most actively publishing strong author "
                     "collaboration groups")
    assert code == 0
    assert text.split("\t")[0] == "PSI[community](YEAR-Same-Interval) MWM PSI[community](AUTHOR-Collaborates-With)"
    code, _ = run("--config", DBLP, "translate", "--objective", "nothing to see")
    assert code == 2 and "NoLayerMention" in capsys.readouterr().err


def test_translate_with_user_files(tmp_path):
    syn = tmp_path / "s.yaml"
    syn.write_text("AUTHOR-Collaborates-With: [coauthors]\n")
    kw = tmp_path / "k.yaml"
    kw.write_text("- {phrases: [reach], target: psi, value: closeness}\n")
    code, text = run("--config", DBLP, "translate", "--objective", "reach of coauthors",
                     "--synonyms", str(syn), "--keywords", str(kw))
    assert code == 0 and text.startswith("PSI[closeness](AUTHOR-Collaborates-With)")
    kw.write_text("- {phrases: [group], target: psi, value: degree}\n")
    code, text = run("--config", DBLP, "translate", "groups of coauthors", "--synonyms", str(syn),
                     "--keywords", str(kw), "--override", "--all")
    assert text.startswith("PSI[degree](AUTHOR-Collaborates-With)") and "community" not in text


# -- drilldown ----------------------------------------------------------------------------

def test_drilldown_joins_attributes(tmp_path):
    run("--config", AIR, "run", A2, "--out", str(tmp_path / "a"), cache=tmp_path / "c")
    code, text = run("--config", AIR, "drilldown", str(tmp_path / "a" / "result.json"), "--attrs", "population")
    assert code == 0 and text.splitlines() == ["name,population", "Grand Rapids,198401"]


def test_drilldown_marks_missing_values(tmp_path):
    run("--config", AIR, "run", OR_QUERY, "--out", str(tmp_path / "o"), cache=tmp_path / "c")
    dest = tmp_path / "d.csv"
    code, _ = run("--config", AIR, "drilldown", str(tmp_path / "o" / "result.json"),
                  "--attrs", "population,state", "--out", str(dest))
    rows = {r[1]: r for r in read_csv(dest)[1:]}
    assert rows["Tampa"][2] == MISSING_MARKER and rows["Tampa"][3] == "FL"
    assert rows["Dallas"][2] == "1304379"


def test_drilldown_empty_result_is_header_only(tmp_path, capsys):
    run("--config", AIR, "run", EMPTY_QUERY, "--out", str(tmp_path / "e"), cache=tmp_path / "c")
    code, text = run("--config", AIR, "drilldown", str(tmp_path / "e" / "result.json"), "--attrs", "population")
    assert code == 0 and text == "community_id,name,population\n"
    assert read_csv(tmp_path / "e" / "result.csv") == [["community_id", "node_id", "name"]]
    code, _ = run("--config", AIR, "drilldown", str(tmp_path / "e" / "result.json"), "--attrs", "area")
    assert code == 2 and "UndeclaredAttribute" in capsys.readouterr().err


def test_drilldown_on_matches():
    mln = build_mln(DBLP)
    res = Engine(mln.schema, mln.store).evaluate(
        "PSI[community](YEAR-Same-Interval) MWM PSI[community](AUTHOR-Collaborates-With)")
    doc = result_document(res, mln.schema)
    with pytest.raises(UndeclaredAttribute):
        drilldown(doc, ["citations"], mln.store)  # YEAR has no citations


# -- exports --------------------------------------------------------------------------------

def _community_doc(tmp_path, query=OR_QUERY):
    run("--config", AIR, "run", query, "--out", str(tmp_path / "x"), cache=tmp_path / "c")
    return load_document(tmp_path / "x" / "result.json")


def test_csv_and_json_membership_agree(tmp_path):
    doc = _community_doc(tmp_path)
    rows = read_csv(tmp_path / "x" / "result.csv")[1:]
    assert {(int(c), int(n)) for c, n, _ in rows} == membership(doc)
    export(doc, "json", tmp_path / "again.json")
    assert membership(load_document(tmp_path / "again.json")) == membership(doc)


def test_dot_has_one_cluster_per_community(tmp_path):
    doc = {"expression": "x", "kind": "communities", "entity_type": "T", "universe": "u",
           "communities": [{"id": 0, "members": [{"id": 0, "name": "a"}, {"id": 1, "name": "b"}]},
                           {"id": 2, "members": [{"id": 2, "name": "c"}, {"id": 3, "name": 'd"q'}]}]}
    dot = to_dot(doc)
    assert dot.count("subgraph cluster_") == 2 and '"d\\"q"' in dot


def test_geojson_skips_missing_geometry(tmp_path):
    doc = {"expression": "x", "kind": "nodeset", "entity_type": "COUNTY", "universe": "county",
           "nodes": [{"id": 0, "name": "48113"}, {"id": 1, "name": "48201"}, {"id": 2, "name": "06037"}]}
    square = {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]}
    fc, warnings = to_geojson(doc, {"48113": square, "06037": square}, {"48113": "high"})
    assert len(fc["features"]) == 2 and warnings == [MissingGeometry("48201")]
    assert fc["features"][0]["properties"] == {"name": "48113", "node_id": 0, "community_id": None,
                                               "band": "high"}
    assert str(warnings[0]).startswith("MissingGeometry")


def test_geojson_command(tmp_path, capsys):
    _community_doc(tmp_path)
    out = tmp_path / "map.geojson"
    code, _ = run("--config", AIR, "export", str(tmp_path / "x" / "result.json"), "--format", "geojson",
                  "--out", str(out), "--geometry", str(DATA / "airline" / "geometry.geojson"),
                  "--band-attr", "state")
    err = capsys.readouterr().err
    fc = json.loads(out.read_text())
    named = {f["properties"]["name"]: f["properties"] for f in fc["features"]}
    assert code == 0 and set(named) == {"Dallas", "Chicago", "Charlotte", "Philadelphia"}
    assert named["Dallas"]["band"] == "TX" and named["Dallas"]["community_id"] == 0
    assert err.count("MissingGeometry") == 8
    assert set(load_geometry(DATA / "airline" / "geometry.geojson")) == set(named)


def test_matching_exports_have_one_entry_per_stage(tmp_path):
    s, st_ = imdb_schema()
    res = Engine(s, st_).evaluate(EXPRESSIONS["A9"][1])
    doc = result_document(res, s)
    export(doc, "json", tmp_path / "m.json")
    back = load_document(tmp_path / "m.json")
    assert len(back["stages"]) == 3 and [x["stage"] for x in back["stages"]] == [1, 2, 3]
    assert back["stages"][1]["left_layer"] == "MOVIE-Similar-Rating"
    dot = to_dot(doc)
    assert dot.count("graph stage") == 3
    text = to_csv(doc)
    head, _, tail = text.partition("\n# unmatched\n")
    assert head.splitlines()[0] == "stage,left_layer,left_comm,right_layer,right_comm,weight"
    assert len(head.splitlines()) - 1 == sum(len(x["pairs"]) for x in back["stages"])
    assert tail.splitlines()[0] == "stage,layer,community_id"


def test_export_errors(tmp_path, capsys):
    doc = _community_doc(tmp_path)
    with pytest.raises(ConfigError):
        export(doc, "svg", tmp_path / "x.svg")
    code, _ = run("export", str(tmp_path / "x" / "result.json"), "--format", "geojson", "--out",
                  str(tmp_path / "g.json"))
    assert code == 1
    (tmp_path / "bad.json").write_text("{not json")
    code, _ = run("export", str(tmp_path / "bad.json"), "--format", "csv", "--out", str(tmp_path / "b.csv"))
    assert code == 1


def test_manifest_round_trip(tmp_path):
    m = RunManifest("c.yaml", "PSI[community](X)", psi_hits=2, psi_misses=1, psi_seconds=0.5,
                    compose_seconds=0.1, total_seconds=0.7)
    m.write(tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text()) == m.to_dict()
    assert not list(tmp_path.glob("*.tmp"))
