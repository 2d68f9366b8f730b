import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swapcheck import commerce, machinefile
from swapcheck import expr as E
from swapcheck import obligations as O
from swapcheck.errors import FormatError

BUILT = {
    "m1": commerce.build_m1(),
    "m11": commerce.build_m11()[0],
    "m12": commerce.build_m12()[0],
    "m13": commerce.build_m13(),
    "m13-sys2": commerce.build_m13(start="Sys2"),
    "m141": commerce.build_m141()[0],
    "m142": commerce.build_m142()[0],
    "m12-mutant": commerce.build_m12(mutate="drop-disjointness-guard")[0],
}


@pytest.mark.parametrize("name", sorted(BUILT))
def test_round_trip_is_identity(name):
    m = BUILT[name]
    text = machinefile.dumps(m)
    back = machinefile.loads(text)
    assert back == m
    assert machinefile.dumps(back) == text


def test_universe_order_in_file_does_not_matter():
    m = BUILT["m11"]
    data = json.loads(machinefile.dumps(m))
    data["universe"] = list(reversed(data["universe"]))
    assert machinefile.machine_from_dict(data) == m


def test_dump_and_load_file(tmp_path):
    path = tmp_path / "m142.json"
    machinefile.dump(BUILT["m142"], path)
    assert machinefile.load(path) == BUILT["m142"]


def test_imported_machine_checks_like_the_original():
    m = machinefile.loads(machinefile.dumps(BUILT["m12"]))
    assert O.check_invariants(m).passed
    assert O.check_variant(m, "Sys2").passed
    assert len(O.reachable(m)) == 275


def test_imported_mutant_still_fails():
    m = machinefile.loads(machinefile.dumps(BUILT["m12-mutant"]))
    assert not O.check_invariants(m).passed


def mutate_json(edit):
    data = json.loads(machinefile.dumps(BUILT["m142"]))
    edit(data)
    return json.dumps(data)


@pytest.mark.parametrize(
    "edit",
    [
        lambda d: d.update(colour="blue"),
        lambda d: d.pop("events"),
        lambda d: d["events"][0].update(priority=1),
        lambda d: d["variables"][0].update(kind="real"),
        lambda d: d["variables"][0].update(kind="atom"),
        lambda d: d["init"].update(ghost=3),
        lambda d: d["events"][0]["guard"].update(op="xor"),
        lambda d: d["events"][0].update(convergent="yes"),
        lambda d: d["systems"][0].update(sv=["C1", "C2a"]),
        lambda d: d["invariants"].append({"nat": 3}),
        lambda d: d["invariants"].append({"op": "card", "arg": {"var": "selection_done"}}),
        lambda d: d.update(selector="nobody"),
    ],
)
def test_malformed_files_are_rejected(edit):
    with pytest.raises(FormatError):
        machinefile.loads(mutate_json(edit))


def test_invalid_json():
    with pytest.raises(FormatError):
        machinefile.loads("{not json")


def test_expression_tree_shapes():
    e = E.and_(E.member(E.atom("a"), E.var("S")), E.le(E.card(E.UNIVERSE), E.nat(3)))
    tree = machinefile.expr_to_tree(e)
    assert tree["op"] == "and"
    assert tree["args"][0] == {"op": "in", "args": [{"atom": "a"}, {"var": "S"}]}
    assert tree["args"][1]["args"][0] == {"op": "card", "arg": {"op": "universe"}}
    q = E.forall("q", E.AtomsIn(E.var("S")), E.TRUE)
    assert machinefile.tree_to_expr(machinefile.expr_to_tree(q)) == q


LEAVES = st.one_of(
    st.integers(0, 20).map(E.nat),
    st.sampled_from(["a", "b", "c"]).map(E.atom),
    st.frozensets(st.sampled_from(["a", "b", "c"])).map(E.atoms),
    st.sampled_from(["x", "y"]).map(E.var),
    st.just(E.UNIVERSE),
    st.booleans().map(E.Bool),
)


def grow(children):
    return st.one_of(
        st.tuples(st.sampled_from(sorted(E.BIN_OPS)), children, children).map(lambda t: E.Bin(*t)),
        st.tuples(st.sampled_from(sorted(E.JUNCTIONS)), st.lists(children, min_size=1, max_size=3)).map(
            lambda t: E.Junction(t[0], tuple(t[1]))
        ),
        children.map(E.Not),
        children.map(E.Card),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(LEAVES, grow, max_leaves=12))
def test_expression_codec_round_trip(e):
    # sort-agnostic: the codec must preserve even ill-sorted trees
    tree = machinefile.expr_to_tree(e)
    assert machinefile.tree_to_expr(json.loads(json.dumps(tree))) == e
