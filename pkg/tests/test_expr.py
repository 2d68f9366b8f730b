import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swapcheck import expr as E
from swapcheck.errors import SortError, UnboundVariable
from swapcheck.expr import Sort

UNIVERSE = frozenset(f"Prod{i}" for i in range(1, 6))


def ev(e, env=None):
    return E.evaluate(e, env or {}, UNIVERSE)


def test_card_of_union_collapses_shared_member():
    e = E.card(E.union(E.atoms(["Prod1", "Prod2"]), E.atoms(["Prod2", "Prod3"])))
    assert ev(e) == 3


def test_sys1_variant_formula():
    e = E.sub(E.card(E.UNIVERSE), E.card(E.var("C1")))
    assert ev(e, {"C1": frozenset({"Prod1", "Prod2"})}) == 3


def test_forall_over_empty_set_is_true():
    e = E.forall("p", E.AtomsIn(E.atoms(())), E.FALSE)
    assert ev(e) is True


def test_exists_over_empty_set_is_false():
    assert ev(E.exists("p", E.AtomsIn(E.atoms(())), E.TRUE)) is False


def test_natural_subtraction_floors_at_zero():
    assert ev(E.sub(E.nat(2), E.nat(7))) == 0


@pytest.mark.parametrize(
    "e, expected",
    [
        (E.inter(E.atoms(["Prod1", "Prod2"]), E.atoms(["Prod2"])), frozenset({"Prod2"})),
        (E.diff(E.UNIVERSE, E.atoms(["Prod1"])), UNIVERSE - {"Prod1"}),
        (E.member(E.atom("Prod1"), E.atoms(["Prod1"])), True),
        (E.not_member(E.atom("Prod1"), E.atoms(["Prod1"])), False),
        (E.subset(E.atoms([]), E.atoms(["Prod4"])), True),
        (E.implies(E.FALSE, E.FALSE), True),
        (E.implies(E.TRUE, E.FALSE), False),
        (E.or_(E.FALSE, E.TRUE), True),
        (E.and_(), True),
        (E.lt(E.nat(1), E.nat(1)), False),
        (E.le(E.nat(1), E.nat(1)), True),
        (E.setof(E.atom("Prod2"), E.atom("Prod2")), frozenset({"Prod2"})),
        (E.forall("n", E.NatRange(0, 3), E.le(E.var("n"), E.nat(3))), True),
        (E.exists("b", E.BoolDomain(), E.var("b")), True),
    ],
)
def test_operators(e, expected):
    assert ev(e) == expected


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        ev(E.var("ghost"))
    with pytest.raises(UnboundVariable):
        E.sort_of(E.var("ghost"), {})


def test_static_sort_errors():
    with pytest.raises(SortError):
        E.sort_of(E.card(E.nat(3)), {})
    with pytest.raises(SortError):
        E.sort_of(E.eq(E.nat(1), E.TRUE), {})
    with pytest.raises(SortError):
        E.sort_of(E.add(E.var("C1"), E.nat(1)), {"C1": Sort.ATOMSET})
    with pytest.raises(SortError):
        E.Bin("xor", E.TRUE, E.TRUE)


def test_dynamic_sort_error_on_ill_sorted_ast():
    with pytest.raises(SortError):
        ev(E.card(E.nat(3)))


def test_free_vars_excludes_binder():
    e = E.forall("q", E.AtomsIn(E.var("S")), E.member(E.var("q"), E.var("T")))
    assert E.free_vars(e) == {"S", "T"}


# --- random well-sorted terms ---------------------------------------------

VARS = {"n": Sort.NAT, "b": Sort.BOOL, "s": Sort.ATOMSET, "t": Sort.ATOMSET}
ATOM_NAMES = sorted(UNIVERSE)


def leaves(sort):
    if sort is Sort.NAT:
        return st.one_of(st.integers(0, 6).map(E.nat), st.just(E.var("n")))
    if sort is Sort.BOOL:
        return st.one_of(st.booleans().map(E.Bool), st.just(E.var("b")))
    if sort is Sort.ATOM:
        return st.sampled_from(ATOM_NAMES).map(E.atom)
    return st.one_of(
        st.just(E.UNIVERSE),
        st.sampled_from([E.var("s"), E.var("t")]),
        st.frozensets(st.sampled_from(ATOM_NAMES)).map(E.Atoms),
    )


def terms(sort, depth=3):
    if depth == 0:
        return leaves(sort)
    sub = lambda s: terms(s, depth - 1)  # noqa: E731
    if sort is Sort.NAT:
        options = [
            sub(Sort.ATOMSET).map(E.card),
            st.builds(E.add, sub(Sort.NAT), sub(Sort.NAT)),
            st.builds(E.sub, sub(Sort.NAT), sub(Sort.NAT)),
        ]
    elif sort is Sort.BOOL:
        options = [
            sub(Sort.BOOL).map(E.not_),
            st.builds(E.and_, sub(Sort.BOOL), sub(Sort.BOOL)),
            st.builds(E.or_, sub(Sort.BOOL), sub(Sort.BOOL)),
            st.builds(E.implies, sub(Sort.BOOL), sub(Sort.BOOL)),
            st.builds(E.le, sub(Sort.NAT), sub(Sort.NAT)),
            st.builds(E.lt, sub(Sort.NAT), sub(Sort.NAT)),
            st.builds(E.eq, sub(Sort.ATOMSET), sub(Sort.ATOMSET)),
            st.builds(E.member, leaves(Sort.ATOM), sub(Sort.ATOMSET)),
            st.builds(E.subset, sub(Sort.ATOMSET), sub(Sort.ATOMSET)),
            st.builds(
                lambda d, s: E.forall("x", E.AtomsIn(d), E.member(E.var("x"), s)),
                sub(Sort.ATOMSET),
                sub(Sort.ATOMSET),
            ),
        ]
    elif sort is Sort.ATOMSET:
        options = [
            st.builds(E.union, sub(Sort.ATOMSET), sub(Sort.ATOMSET)),
            st.builds(E.inter, sub(Sort.ATOMSET), sub(Sort.ATOMSET)),
            st.builds(E.diff, sub(Sort.ATOMSET), sub(Sort.ATOMSET)),
            st.lists(leaves(Sort.ATOM), max_size=3).map(lambda xs: E.SetOf(tuple(xs))),
        ]
    else:
        return leaves(sort)
    return st.one_of(leaves(sort), *options)


TERMS = {sort: terms(sort) for sort in (Sort.NAT, Sort.BOOL, Sort.ATOMSET)}

valuations = st.fixed_dictionaries(
    {
        "n": st.integers(0, 9),
        "b": st.booleans(),
        "s": st.frozensets(st.sampled_from(ATOM_NAMES)),
        "t": st.frozensets(st.sampled_from(ATOM_NAMES)),
    }
)

SORT_OF_VALUE = {bool: Sort.BOOL, int: Sort.NAT, frozenset: Sort.ATOMSET}


@settings(max_examples=300, deadline=None)
@given(sort=st.sampled_from([Sort.NAT, Sort.BOOL, Sort.ATOMSET]), data=st.data(), env=valuations)
def test_evaluation_is_total_and_well_sorted(sort, data, env):
    e = data.draw(TERMS[sort])
    assert E.sort_of(e, VARS) is sort
    value = E.evaluate(e, env, UNIVERSE)
    assert SORT_OF_VALUE[type(value)] is sort
    if sort is Sort.NAT:
        assert value >= 0
    if sort is Sort.ATOMSET:
        assert value <= UNIVERSE
    assert E.evaluate(e, dict(env), UNIVERSE) == value


@settings(max_examples=100, deadline=None)
@given(data=st.data(), env=valuations)
def test_show_never_fails(data, env):
    e = data.draw(TERMS[Sort.BOOL])
    assert isinstance(E.show(e), str)
