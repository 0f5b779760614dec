import numpy as np
import pytest

from mlnkit.errors import (
    ConfigError,
    LayerMismatch,
    ParseError,
    UndeclaredAttribute,
    UniverseMismatch,
    UnknownLayer,
    UnknownNodeName,
    UnknownNodeSet,
)
from mlnkit.graph import edgeless, from_edge_list
from mlnkit.model import (
    MISSING,
    AttributeStore,
    InterLayerEdges,
    LayerSpec,
    MlnSchema,
    PsiKind,
    ThetaKind,
    VertexUniverse,
    attr_lookup,
    is_missing,
    psi_options,
    theta_options,
)

from schemas import dblp_schema


def test_universe_interning_and_freeze():
    u = VertexUniverse("city")
    assert u.intern("Dallas") == 0 and u.intern("Chicago") == 1 and u.intern("Dallas") == 0
    u.freeze()
    assert u.id_of("Chicago") == 1 and u.name_of(0) == "Dallas" and "Dallas" in u and len(u) == 2
    with pytest.raises(UnknownNodeName):
        u.intern("Boston")
    with pytest.raises(UnknownNodeName):
        u.id_of("Boston")


def test_universe_csv_round_trip():
    u = VertexUniverse("city", ["Dallas", "Grand Rapids", "St. Louis"])
    again = VertexUniverse.from_csv("city", u.to_csv())
    assert again.names == u.names


def test_layer_spec_checks_universe_size():
    u = VertexUniverse("x", ["a", "b", "c"]).freeze()
    with pytest.raises(UniverseMismatch):
        LayerSpec("L", "X", u, edgeless(4), {})


def test_theta_options_table():
    s, _ = dblp_schema()
    assert {ThetaKind.AND, ThetaKind.OR} <= theta_options(s, "AUTHOR-Collaborates-in-VLDB",
                                                          "AUTHOR-Collaborates-in-SIGMOD")
    assert theta_options(s, "PAPER-Same-Conference", "AUTHOR-Collaborates-With") == {ThetaKind.MWM}
    assert theta_options(s, "PAPER-Same-Conference", "YEAR-Same-Interval") == frozenset()
    with pytest.raises(UnknownLayer):
        theta_options(s, "NoSuchLayer", "YEAR-Same-Interval")


def test_theta_options_properties():
    s, _ = dblp_schema()
    ids = list(s.layers)
    for a in ids:
        for b in ids:
            if a == b:
                continue
            opts = theta_options(s, a, b)
            assert opts == theta_options(s, b, a)
            assert (ThetaKind.MWM in opts) == (s.links(a, b) is not None)
            shared = s.layer(a).universe is s.layer(b).universe
            assert ({ThetaKind.AND, ThetaKind.OR, ThetaKind.MINUS} <= opts) == shared


def test_psi_options():
    s, _ = dblp_schema()
    every = {PsiKind.COMMUNITY, PsiKind.DEGREE, PsiKind.CLOSENESS}
    assert psi_options(s, "AUTHOR-Collaborates-With") == every
    assert all(psi_options(s, lid) == every for lid in s.layers)
    with pytest.raises(UnknownLayer):
        psi_options(s, "NoSuchLayer")


def test_inter_layer_rejects_siblings_and_bad_endpoints():
    s = MlnSchema()
    u = s.add_universe(VertexUniverse("a", ["x", "y"]).freeze(), "A")
    w = s.add_universe(VertexUniverse("b", ["p"]).freeze(), "B")
    s.add_layer(LayerSpec("A1", "A", u, from_edge_list([(0, 1)], 2), {}))
    s.add_layer(LayerSpec("A2", "A", u, edgeless(2), {}))
    s.add_layer(LayerSpec("B1", "B", w, edgeless(1), {}))
    with pytest.raises(ConfigError):
        s.add_inter_layer(InterLayerEdges("A1", "A2", np.array([[0, 1]])))
    with pytest.raises(Exception):
        s.add_inter_layer(InterLayerEdges("A1", "B1", np.array([[0, 3]])))
    x = s.add_inter_layer(InterLayerEdges("A1", "B1", np.array([[1, 0]])))
    assert s.links("B1", "A1") is x
    assert x.oriented("B1", "A1").tolist() == [[0, 1]]
    with pytest.raises(LayerMismatch):
        x.oriented("A2", "B1")
    assert s.kind() == "HyMLN"


def test_attribute_lookup_and_missing_marker():
    st = AttributeStore()
    st.declare("USCITY", "population", "int")
    st.set("USCITY", 3, "population", 198401)
    assert attr_lookup(st, "USCITY", 3, "population") == 198401
    missing = attr_lookup(st, "USCITY", 4, "population")
    assert missing is MISSING and is_missing(missing) and missing != 0 and missing != ""
    with pytest.raises(UndeclaredAttribute):
        attr_lookup(st, "USCITY", 3, "area")


TABLE = """node,population:int,state:str,density:float
Grand Rapids,198401,MI,1.5
Dallas,,TX,
Nowhere,1,XX,0.0
"""


def test_load_table_types_missing_and_unknown_rows():
    uni = VertexUniverse("city", ["Dallas", "Grand Rapids"]).freeze()
    st = AttributeStore()
    skipped = st.load_table("USCITY", TABLE, uni)
    assert skipped == 1
    assert st.lookup("USCITY", 1, "population") == 198401
    assert st.lookup("USCITY", 1, "density") == 1.5
    assert is_missing(st.lookup("USCITY", 0, "population"))
    assert st.lookup("USCITY", 0, "state") == "TX"
    with pytest.raises(UnknownNodeName):
        AttributeStore().load_table("USCITY", TABLE, uni, strict=True)


def test_load_table_reports_bad_values_with_line():
    uni = VertexUniverse("city", ["Dallas"]).freeze()
    with pytest.raises(ParseError) as exc:
        AttributeStore().load_table("USCITY", "node,population:int\nDallas,many\n", uni, path="c.csv")
    assert exc.value.line == 2 and "c.csv" in str(exc.value)


def test_attribute_store_round_trip():
    uni = VertexUniverse("city", ["Dallas", "Grand Rapids"]).freeze()
    st = AttributeStore()
    st.load_table("USCITY", TABLE, uni)
    dumped = st.dump_table("USCITY", uni)
    again = AttributeStore()
    again.load_table("USCITY", dumped, uni)
    assert again.table("USCITY") == st.table("USCITY")
    assert again.dump_table("USCITY", uni) == dumped


def test_node_sets():
    st = AttributeStore()
    st.add_node_set("hubs", "city", [3, 1, 3])
    assert st.node_set("hubs") == ("city", frozenset({1, 3}))
    with pytest.raises(UnknownNodeSet):
        st.node_set("nope")
