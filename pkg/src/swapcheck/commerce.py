"""Online-purchase selection step: carts on one or two web sites.

``Sys1`` keeps one cart ``C1``; ``Sys2`` spreads the selection over two site
carts ``C2a`` and ``C2b``. The relation "carts ∈ SITES × PRODUCTS" is kept as
one set variable per site, so the range of the relation is ``C2a ∪ C2b`` and
"selected on exactly one site" becomes ``card(C2a ∩ {p}) + card(C2b ∩ {p}) = 1``.

Machines:

* ``m1``   abstract selection with a single abstract cart
* ``m11``  Sys1 alone
* ``m12``  Sys2 alone
* ``m13``  both systems, the running one chosen at initialisation
* ``m141`` Sys1 fails and Sys2 cold-starts from its initial state
* ``m142`` Sys1 fails and Sys2 resumes from the recovered selection
"""

from __future__ import annotations

import types
from dataclasses import dataclass
from typing import Optional

from . import expr as E
from .errors import ConfigError
from .expr import Sort
from .kernel import GuardedEvent, Machine, Param, SystemDef, Valuation, VarDecl
from .obligations import STUTTER, RefinementLink
from .substitution import Manual, Policy, SubstitutionConfig, Trigger, config_for

MUTANTS = types.MappingProxyType(
    {
        "drop-disjointness-guard": "select_a stops checking that the product is absent from C2b",
        "non-decreasing-select": "select events stop checking that the product is absent from their own cart",
        "hinv-false": "the horizontal invariant used for recovery is replaced by FALSE",
    }
)

DONE = E.var("selection_done")
ACTIVE = E.var("active")
C1, C2A, C2B = E.var("C1"), E.var("C2a"), E.var("C2b")
SYS2_CART = E.union(C2A, C2B)
EMPTY = E.atoms(())
PRODUCT = Param("p", E.AtomsIn(E.UNIVERSE))
P_ = E.var("p")


def products(n: int = 5) -> tuple:
    if n < 1:
        raise ConfigError("need at least one product")
    return tuple(f"Prod{i}" for i in range(1, n + 1))


def _purchase(universe: tuple, purchase) -> frozenset:
    chosen = frozenset(universe if purchase is None else purchase)
    stray = chosen - set(universe)
    if stray:
        raise ConfigError(f"purchase set mentions unknown products {sorted(stray)}")
    return chosen


def sys1_variant() -> E.Expr:
    return E.sub(E.card(E.UNIVERSE), E.card(C1))


def sys2_variant() -> E.Expr:
    return E.sub(E.card(E.UNIVERSE), E.card(SYS2_CART))


def sys1() -> SystemDef:
    return SystemDef("Sys1", ("C1",), sys1_variant())


def sys2() -> SystemDef:
    return SystemDef("Sys2", ("C2a", "C2b"), sys2_variant())


def horizontal_invariant() -> E.Expr:
    return E.eq(C1, SYS2_CART)


def _when(cond: Optional[E.Expr], body: E.Expr) -> E.Expr:
    return body if cond is None else E.implies(cond, body)


def _guard(cond: Optional[E.Expr], *conjuncts: E.Expr) -> E.Expr:
    parts = ([cond] if cond is not None else []) + list(conjuncts)
    return E.and_(*parts)


def _select(name, cart, other, P, system, mode, mutate, convergent=True) -> GuardedEvent:
    conjuncts = [E.member(P_, P)]
    if mutate != "non-decreasing-select":
        conjuncts.append(E.not_member(P_, cart))
    if other is not None and not (mutate == "drop-disjointness-guard" and name == "select_a"):
        conjuncts.append(E.not_member(P_, other))
    conjuncts.append(E.not_(DONE))
    return GuardedEvent(
        name,
        (PRODUCT,),
        _guard(mode, *conjuncts),
        ((cart.name, E.union(cart, E.setof(P_))),),
        convergent,
        system,
    )


def _finish(name, selected, P, system, mode) -> GuardedEvent:
    return GuardedEvent(
        name, (), _guard(mode, E.eq(selected, P), E.not_(DONE)), (("selection_done", E.TRUE),), False, system
    )


def _sys1_invariants(P, mode=None) -> list:
    return [
        E.subset(C1, P),
        _when(mode, E.implies(DONE, E.eq(C1, P))),
    ]


def _sys2_invariants(P, mode=None) -> list:
    return [
        E.eq(E.inter(C2A, C2B), EMPTY),
        E.forall(
            "q",
            E.AtomsIn(E.UNIVERSE),
            E.implies(
                E.member(E.var("q"), SYS2_CART),
                E.eq(
                    E.add(E.card(E.inter(C2A, E.setof(E.var("q")))), E.card(E.inter(C2B, E.setof(E.var("q"))))),
                    E.nat(1),
                ),
            ),
        ),
        E.subset(SYS2_CART, P),
        _when(mode, E.implies(DONE, E.eq(SYS2_CART, P))),
    ]


def _check_mutant(mutate, allowed, name):
    if mutate is not None and mutate not in MUTANTS:
        raise ConfigError(f"unknown mutant {mutate!r}; choose from {sorted(MUTANTS)}")
    if mutate is not None and mutate not in allowed:
        raise ConfigError(f"mutant {mutate} does not apply to {name}")


# --- machines --------------------------------------------------------------


def build_m1(n: int = 5, purchase=None, mutate: str | None = None) -> Machine:
    _check_mutant(mutate, {"non-decreasing-select"}, "m1")
    universe = products(n)
    P = E.atoms(_purchase(universe, purchase))
    cart = E.var("cart")
    select = GuardedEvent(
        "select",
        (PRODUCT,),
        E.and_(
            *([E.member(P_, P)] + ([] if mutate else [E.not_member(P_, cart)]) + [E.not_(DONE)])
        ),
        (("cart", E.union(cart, E.setof(P_))),),
        True,
    )
    finish = GuardedEvent("finish", (), E.and_(E.eq(cart, P), E.not_(DONE)), (("selection_done", E.TRUE),))
    return Machine(
        name="M1",
        universe=universe,
        variables=(VarDecl("cart", Sort.ATOMSET), VarDecl("selection_done", Sort.BOOL)),
        init=Valuation({"cart": frozenset(), "selection_done": False}),
        invariants=(E.subset(cart, P), E.implies(DONE, E.eq(cart, P))),
        variant=E.sub(E.card(E.UNIVERSE), E.card(cart)),
        events=(select, finish),
    )


def build_m11(n: int = 5, purchase=None, mutate: str | None = None) -> tuple[Machine, SystemDef]:
    _check_mutant(mutate, {"non-decreasing-select"}, "m11")
    universe = products(n)
    P = E.atoms(_purchase(universe, purchase))
    s1 = sys1()
    m = Machine(
        name="M11",
        universe=universe,
        variables=(VarDecl("C1", Sort.ATOMSET), VarDecl("selection_done", Sort.BOOL)),
        init=Valuation({"C1": frozenset(), "selection_done": False}),
        invariants=tuple(_sys1_invariants(P)),
        variant=s1.variant,
        events=(_select("select", C1, None, P, "Sys1", None, mutate), _finish("finish", C1, P, "Sys1", None)),
        systems=(s1,),
    )
    return m, s1


def build_m12(n: int = 5, purchase=None, mutate: str | None = None) -> tuple[Machine, SystemDef]:
    _check_mutant(mutate, {"non-decreasing-select", "drop-disjointness-guard"}, "m12")
    universe = products(n)
    P = E.atoms(_purchase(universe, purchase))
    s2 = sys2()
    m = Machine(
        name="M12",
        universe=universe,
        variables=(
            VarDecl("C2a", Sort.ATOMSET),
            VarDecl("C2b", Sort.ATOMSET),
            VarDecl("selection_done", Sort.BOOL),
        ),
        init=Valuation({"C2a": frozenset(), "C2b": frozenset(), "selection_done": False}),
        invariants=tuple(_sys2_invariants(P)),
        variant=s2.variant,
        events=(
            _select("select_a", C2A, C2B, P, "Sys2", None, mutate),
            _select("select_b", C2B, C2A, P, "Sys2", None, mutate),
            _finish("finish", SYS2_CART, P, "Sys2", None),
        ),
        systems=(s2,),
    )
    return m, s2


def _composite(name, n, purchase, mutate, start, switch_assigns, extra_invariants, recovering=False) -> Machine:
    universe = products(n)
    P = E.atoms(_purchase(universe, purchase))
    on1 = E.eq(ACTIVE, E.nat(0))
    on2 = E.eq(ACTIVE, E.nat(1))
    events = [
        _select("select1", C1, None, P, "Sys1", on1, mutate),
        _finish("finish1", C1, P, "Sys1", on1),
        _select("select_a", C2A, C2B, P, "Sys2", on2, mutate),
        _select("select_b", C2B, C2A, P, "Sys2", on2, mutate),
        _finish("finish2", SYS2_CART, P, "Sys2", on2),
    ]
    if switch_assigns is not None:
        # failure may strike at any point while Sys1 is still selecting
        events.append(
            GuardedEvent("switch", (), E.and_(on1, E.not_(DONE)), (("active", E.nat(1)),) + switch_assigns)
        )
    invariants = (
        _sys1_invariants(P, on1)
        + _sys2_invariants(P, on2)
        + [E.implies(on1, E.and_(E.eq(C2A, EMPTY), E.eq(C2B, EMPTY)))]
        + extra_invariants(P, on2)
    )
    return Machine(
        name=name,
        universe=universe,
        variables=(
            VarDecl("C1", Sort.ATOMSET),
            VarDecl("C2a", Sort.ATOMSET),
            VarDecl("C2b", Sort.ATOMSET),
            VarDecl("selection_done", Sort.BOOL),
            VarDecl("active", Sort.NAT, 1),
        ),
        init=Valuation(
            {
                "C1": frozenset(),
                "C2a": frozenset(),
                "C2b": frozenset(),
                "selection_done": False,
                "active": 0 if start == "Sys1" else 1,
            }
        ),
        invariants=tuple(invariants),
        events=tuple(events),
        systems=(sys1(), sys2()),
        selector="active",
        checkpoint=E.TRUE if recovering else None,
        horizontal=horizontal_invariant() if recovering else None,
    )


def build_m13(n: int = 5, purchase=None, mutate: str | None = None, start: str = "Sys1") -> Machine:
    _check_mutant(mutate, {"non-decreasing-select", "drop-disjointness-guard"}, "m13")
    if start not in ("Sys1", "Sys2"):
        raise ConfigError(f"unknown system {start!r}")
    name = "M13" if start == "Sys1" else "M13_Sys2"
    return _composite(name, n, purchase, mutate, start, None, lambda P, on2: [E.implies(on2, E.eq(C1, EMPTY))])


def build_m141(
    n: int = 5, purchase=None, mutate: str | None = None, trigger: Trigger = Manual()
) -> tuple[Machine, SubstitutionConfig]:
    _check_mutant(mutate, {"non-decreasing-select", "drop-disjointness-guard"}, "m141")
    m = _composite("M141", n, purchase, mutate, "Sys1", (("C2a", EMPTY), ("C2b", EMPTY)), lambda P, on2: [])
    return m, config_for(m, Policy.COLD, trigger)


def build_m142(
    n: int = 5,
    purchase=None,
    mutate: str | None = None,
    trigger: Trigger = Manual(),
    policy: Policy | str = Policy.HOT,
) -> tuple[Machine, SubstitutionConfig]:
    _check_mutant(mutate, {"non-decreasing-select", "drop-disjointness-guard", "hinv-false"}, "m142")
    m = _composite(
        "M142",
        n,
        purchase,
        mutate,
        "Sys1",
        (("C2a", C1), ("C2b", EMPTY)),
        lambda P, on2: [E.implies(on2, E.subset(C1, SYS2_CART))],
        recovering=True,
    )
    hinv = E.FALSE if mutate == "hinv-false" else None
    return m, config_for(m, policy, trigger, hinv=hinv)


def composite_gluing() -> E.Expr:
    return E.and_(
        E.implies(E.eq(ACTIVE, E.nat(0)), E.eq(E.var("cart"), C1)),
        E.implies(E.eq(ACTIVE, E.nat(1)), E.eq(E.var("cart"), SYS2_CART)),
    )


# --- registry --------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    machine: Machine
    refinement: Optional[RefinementLink] = None
    config: Optional[SubstitutionConfig] = None
    check_policies: tuple = ()


def _refines_m1(m: Machine, gluing: E.Expr, event_map: dict, n, purchase) -> RefinementLink:
    return RefinementLink(build_m1(n, purchase), m, gluing, tuple(event_map.items()))


_COMPOSITE_MAP = {
    "select1": "select",
    "finish1": "finish",
    "select_a": "select",
    "select_b": "select",
    "finish2": "finish",
}


def build(
    name: str,
    n: int = 5,
    purchase=None,
    mutate: str | None = None,
    trigger: Trigger = Manual(),
    policy: Policy | str | None = None,
    start: str = "Sys1",
) -> Scenario:
    """Assemble a registry scenario with its refinement link and substitution config."""
    if name not in REGISTRY:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(REGISTRY)}")
    if name == "m1":
        return Scenario(name, build_m1(n, purchase, mutate))
    if name == "m11":
        m, _ = build_m11(n, purchase, mutate)
        link = _refines_m1(m, E.eq(E.var("cart"), C1), {"select": "select", "finish": "finish"}, n, purchase)
        return Scenario(name, m, link)
    if name == "m12":
        m, _ = build_m12(n, purchase, mutate)
        link = _refines_m1(
            m,
            E.eq(E.var("cart"), SYS2_CART),
            {"select_a": "select", "select_b": "select", "finish": "finish"},
            n,
            purchase,
        )
        return Scenario(name, m, link)
    if name == "m13":
        m = build_m13(n, purchase, mutate, start)
        return Scenario(name, m, _refines_m1(m, composite_gluing(), _COMPOSITE_MAP, n, purchase))
    if name == "m141":
        if policy not in (None, "cold", Policy.COLD):
            raise ConfigError("m141 is the cold-start machine")
        m, cfg = build_m141(n, purchase, mutate, trigger)
        return Scenario(name, m, None, cfg, (Policy.COLD,))
    m, cfg = build_m142(n, purchase, mutate, trigger, policy or Policy.HOT)
    link = _refines_m1(m, composite_gluing(), dict(_COMPOSITE_MAP, switch=STUTTER), n, purchase)
    return Scenario(name, m, link, cfg, (Policy.HOT, Policy.WARM))


REGISTRY = types.MappingProxyType(
    {
        "m1": "abstract selection of goods in one cart",
        "m11": "Sys1: one cart on one web site",
        "m12": "Sys2: two carts on two web sites, no failures",
        "m13": "Sys1 or Sys2, chosen at initialisation",
        "m141": "Sys1 fails, Sys2 cold-starts from its initial state",
        "m142": "Sys1 fails, Sys2 resumes from the recovered selection (hot/warm)",
    }
)
