"""Finite-domain expression language: AST, sort checking, evaluation.

Four sorts exist. ``nat`` values are Python ints (never negative), ``bool``
values are Python bools, ``atom`` values are strings drawn from the machine
universe and ``atomset`` values are frozensets of atoms. Machine variables
only ever hold nat, bool or atomset values; the atom sort appears for event
parameters, quantifier binders and set-builder elements.

Natural subtraction floors at 0 so the nat sort stays closed. Variants built
from card differences do not depend on the floor: they stay non-negative
because a cart can never hold more atoms than the universe.
"""

from __future__ import annotations

import enum
import functools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Union

from .errors import SortError, UnboundVariable


class Sort(str, enum.Enum):
    NAT = "nat"
    BOOL = "bool"
    ATOM = "atom"
    ATOMSET = "atomset"


Value = Union[int, bool, str, frozenset]


def sort_of_value(value: Value) -> Sort:
    if isinstance(value, bool):
        return Sort.BOOL
    if isinstance(value, int):
        if value < 0:
            raise SortError(f"negative natural {value}")
        return Sort.NAT
    if isinstance(value, str):
        return Sort.ATOM
    if isinstance(value, frozenset):
        return Sort.ATOMSET
    raise SortError(f"not a value: {value!r}")


# --- AST -------------------------------------------------------------------


class Expr:
    """Marker base class for AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Nat(Expr):
    value: int


@dataclass(frozen=True)
class Bool(Expr):
    value: bool


@dataclass(frozen=True)
class Atom(Expr):
    name: str


@dataclass(frozen=True)
class Atoms(Expr):
    """Literal atom set."""

    names: frozenset


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Universe(Expr):
    pass


@dataclass(frozen=True)
class SetOf(Expr):
    """Set built from atom-sorted element terms, e.g. ``{p}``."""

    elems: tuple


@dataclass(frozen=True)
class Card(Expr):
    arg: Expr


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


SET_OPS = ("union", "inter", "diff")
ARITH_OPS = ("add", "sub")
COMPARE_OPS = ("le", "lt")
BIN_OPS = SET_OPS + ARITH_OPS + COMPARE_OPS + ("eq", "in", "subset", "implies")
JUNCTIONS = ("and", "or")
QUANTIFIERS = ("forall", "exists")


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BIN_OPS:
            raise SortError(f"unknown binary operator {self.op!r}")


@dataclass(frozen=True)
class Junction(Expr):
    op: str
    args: tuple

    def __post_init__(self):
        if self.op not in JUNCTIONS:
            raise SortError(f"unknown connective {self.op!r}")


class Domain:
    __slots__ = ()


@dataclass(frozen=True)
class AtomsIn(Domain):
    """Atoms of an atomset-sorted expression (often the universe)."""

    of: Expr


@dataclass(frozen=True)
class NatRange(Domain):
    lo: int
    hi: int


@dataclass(frozen=True)
class BoolDomain(Domain):
    pass


@dataclass(frozen=True)
class Quant(Expr):
    kind: str
    bind: str
    domain: Domain
    body: Expr

    def __post_init__(self):
        if self.kind not in QUANTIFIERS:
            raise SortError(f"unknown quantifier {self.kind!r}")


# --- constructors ----------------------------------------------------------

TRUE = Bool(True)
FALSE = Bool(False)
UNIVERSE = Universe()


def var(name: str) -> Var:
    return Var(name)


def nat(n: int) -> Nat:
    return Nat(n)


def atom(name: str) -> Atom:
    return Atom(name)


def atoms(names: Iterable[str]) -> Atoms:
    return Atoms(frozenset(names))


def setof(*elems: Expr) -> SetOf:
    return SetOf(tuple(elems))


def card(e: Expr) -> Card:
    return Card(e)


def union(a: Expr, b: Expr) -> Bin:
    return Bin("union", a, b)


def inter(a: Expr, b: Expr) -> Bin:
    return Bin("inter", a, b)


def diff(a: Expr, b: Expr) -> Bin:
    return Bin("diff", a, b)


def add(a: Expr, b: Expr) -> Bin:
    return Bin("add", a, b)


def sub(a: Expr, b: Expr) -> Bin:
    return Bin("sub", a, b)


def eq(a: Expr, b: Expr) -> Bin:
    return Bin("eq", a, b)


def le(a: Expr, b: Expr) -> Bin:
    return Bin("le", a, b)


def lt(a: Expr, b: Expr) -> Bin:
    return Bin("lt", a, b)


def member(a: Expr, s: Expr) -> Bin:
    return Bin("in", a, s)


def not_member(a: Expr, s: Expr) -> Not:
    return Not(Bin("in", a, s))


def subset(a: Expr, b: Expr) -> Bin:
    return Bin("subset", a, b)


def implies(a: Expr, b: Expr) -> Bin:
    return Bin("implies", a, b)


def not_(a: Expr) -> Not:
    return Not(a)


def and_(*args: Expr) -> Junction:
    return Junction("and", tuple(args))


def or_(*args: Expr) -> Junction:
    return Junction("or", tuple(args))


def forall(bind: str, domain: Domain, body: Expr) -> Quant:
    return Quant("forall", bind, domain, body)


def exists(bind: str, domain: Domain, body: Expr) -> Quant:
    return Quant("exists", bind, domain, body)


# --- static sort checking --------------------------------------------------


def domain_sort(domain: Domain, env: Mapping[str, Sort]) -> Sort:
    """Sort of the elements a domain enumerates."""
    match domain:
        case AtomsIn(of):
            if sort_of(of, env) is not Sort.ATOMSET:
                raise SortError("quantifier domain must be an atom set")
            return Sort.ATOM
        case NatRange(lo, hi):
            if not 0 <= lo <= hi + 1:
                raise SortError(f"bad nat range {lo}..{hi}")
            return Sort.NAT
        case BoolDomain():
            return Sort.BOOL
    raise SortError(f"unknown domain {domain!r}")


def sort_of(e: Expr, env: Mapping[str, Sort]) -> Sort:
    """Return the unique sort of ``e`` or raise SortError / UnboundVariable."""

    def expect(sub_expr, want):
        got = sort_of(sub_expr, env)
        if got is not want:
            raise SortError(f"{show(sub_expr)} has sort {got.value}, expected {want.value}")

    match e:
        case Nat(value):
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise SortError(f"bad natural literal {value!r}")
            return Sort.NAT
        case Bool(value):
            if not isinstance(value, bool):
                raise SortError(f"bad boolean literal {value!r}")
            return Sort.BOOL
        case Atom():
            return Sort.ATOM
        case Atoms():
            return Sort.ATOMSET
        case Var(name):
            if name not in env:
                raise UnboundVariable(name)
            return env[name]
        case Universe():
            return Sort.ATOMSET
        case SetOf(elems):
            for el in elems:
                expect(el, Sort.ATOM)
            return Sort.ATOMSET
        case Card(arg):
            expect(arg, Sort.ATOMSET)
            return Sort.NAT
        case Not(arg):
            expect(arg, Sort.BOOL)
            return Sort.BOOL
        case Junction(_, args):
            for a in args:
                expect(a, Sort.BOOL)
            return Sort.BOOL
        case Bin(op, left, right):
            if op in SET_OPS:
                expect(left, Sort.ATOMSET)
                expect(right, Sort.ATOMSET)
                return Sort.ATOMSET
            if op in ARITH_OPS:
                expect(left, Sort.NAT)
                expect(right, Sort.NAT)
                return Sort.NAT
            if op in COMPARE_OPS:
                expect(left, Sort.NAT)
                expect(right, Sort.NAT)
                return Sort.BOOL
            if op == "eq":
                expect(right, sort_of(left, env))
                return Sort.BOOL
            if op == "in":
                expect(left, Sort.ATOM)
                expect(right, Sort.ATOMSET)
                return Sort.BOOL
            if op == "subset":
                expect(left, Sort.ATOMSET)
                expect(right, Sort.ATOMSET)
                return Sort.BOOL
            expect(left, Sort.BOOL)
            expect(right, Sort.BOOL)
            return Sort.BOOL
        case Quant(_, bind, domain, body):
            inner = dict(env)
            inner[bind] = domain_sort(domain, env)
            if sort_of(body, inner) is not Sort.BOOL:
                raise SortError(f"quantifier body {show(body)} is not boolean")
            return Sort.BOOL
    raise SortError(f"not an expression: {e!r}")


def free_vars(e: Expr) -> frozenset:
    match e:
        case Var(name):
            return frozenset([name])
        case SetOf(elems) | Junction(_, elems):
            return frozenset().union(*(free_vars(x) for x in elems))
        case Card(arg) | Not(arg):
            return free_vars(arg)
        case Bin(_, left, right):
            return free_vars(left) | free_vars(right)
        case Quant(_, bind, domain, body):
            dom = free_vars(domain.of) if isinstance(domain, AtomsIn) else frozenset()
            return dom | (free_vars(body) - {bind})
    return frozenset()


# --- evaluation ------------------------------------------------------------


def domain_values(domain: Domain, env: Mapping[str, Value], universe: frozenset) -> list:
    """Enumerate a domain in canonical order (atoms lexicographic, numbers ascending)."""
    match domain:
        case AtomsIn(of):
            s = evaluate(of, env, universe)
            if not isinstance(s, frozenset):
                raise SortError("quantifier domain did not evaluate to an atom set")
            return sorted(s)
        case NatRange(lo, hi):
            return list(range(lo, hi + 1))
        case BoolDomain():
            return [False, True]
    raise SortError(f"unknown domain {domain!r}")


def _nat(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise SortError(f"expected natural, got {v!r}")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise SortError(f"expected boolean, got {v!r}")
    return v


def _set(v):
    if not isinstance(v, frozenset):
        raise SortError(f"expected atom set, got {v!r}")
    return v


def _atom(v):
    if not isinstance(v, str):
        raise SortError(f"expected atom, got {v!r}")
    return v


def evaluate(e: Expr, env: Mapping[str, Value], universe: frozenset = frozenset()) -> Value:
    """Evaluate ``e`` under ``env``. Pure and deterministic.

    Expressions are compiled to closures on first use and cached, so repeated
    evaluation during state-space exploration stays cheap.
    """
    return compile_expr(e)(env, universe)


_SET_FN = {
    "union": frozenset.union,
    "inter": frozenset.intersection,
    "diff": frozenset.difference,
}


@functools.lru_cache(maxsize=None)
def compile_expr(e: Expr):
    match e:
        case Nat(value) | Bool(value):
            return lambda env, u: value
        case Atom(name):
            return lambda env, u: name
        case Atoms(names):
            return lambda env, u: names
        case Var(name):
            def lookup(env, u):
                try:
                    return env[name]
                except KeyError:
                    raise UnboundVariable(name) from None
            return lookup
        case Universe():
            return lambda env, u: u
        case SetOf(elems):
            fs = [compile_expr(x) for x in elems]
            return lambda env, u: frozenset(_atom(f(env, u)) for f in fs)
        case Card(arg):
            f = compile_expr(arg)
            return lambda env, u: len(_set(f(env, u)))
        case Not(arg):
            f = compile_expr(arg)
            return lambda env, u: not _bool(f(env, u))
        case Junction(op, args):
            fs = [compile_expr(a) for a in args]
            if op == "and":
                return lambda env, u: all(_bool(f(env, u)) for f in fs)
            return lambda env, u: any(_bool(f(env, u)) for f in fs)
        case Bin("implies", left, right):
            fl, fr = compile_expr(left), compile_expr(right)
            return lambda env, u: (not _bool(fl(env, u))) or _bool(fr(env, u))
        case Bin(op, left, right):
            return _compile_bin(op, compile_expr(left), compile_expr(right))
        case Quant(kind, bind, domain, body):
            fb = compile_expr(body)
            want = kind == "exists"

            def quant(env, u):
                inner = dict(env)
                for value in domain_values(domain, env, u):
                    inner[bind] = value
                    if _bool(fb(inner, u)) == want:
                        return want
                return not want

            return quant
    raise SortError(f"not an expression: {e!r}")


def _compile_bin(op, fl, fr):
    if op in _SET_FN:
        fn = _SET_FN[op]
        return lambda env, u: fn(_set(fl(env, u)), _set(fr(env, u)))
    if op == "add":
        return lambda env, u: _nat(fl(env, u)) + _nat(fr(env, u))
    if op == "sub":
        return lambda env, u: max(0, _nat(fl(env, u)) - _nat(fr(env, u)))
    if op == "le":
        return lambda env, u: _nat(fl(env, u)) <= _nat(fr(env, u))
    if op == "lt":
        return lambda env, u: _nat(fl(env, u)) < _nat(fr(env, u))
    if op == "in":
        return lambda env, u: _atom(fl(env, u)) in _set(fr(env, u))
    if op == "subset":
        return lambda env, u: _set(fl(env, u)) <= _set(fr(env, u))
    if op == "eq":

        def equal(env, u):
            a, b = fl(env, u), fr(env, u)
            if sort_of_value(a) is not sort_of_value(b):
                raise SortError(f"cannot compare {a!r} with {b!r}")
            return a == b

        return equal
    raise SortError(f"unknown operator {op!r}")


# --- printing --------------------------------------------------------------

_INFIX = {
    "union": "∪",
    "inter": "∩",
    "diff": "\\",
    "add": "+",
    "sub": "-",
    "eq": "=",
    "le": "≤",
    "lt": "<",
    "in": "∈",
    "subset": "⊆",
    "implies": "⇒",
}


def show_domain(d: Domain) -> str:
    match d:
        case AtomsIn(of):
            return show(of)
        case NatRange(lo, hi):
            return f"{lo}..{hi}"
        case BoolDomain():
            return "BOOL"
    return repr(d)


def show(e: Expr) -> str:
    """Human-readable rendering used in reports and error messages."""
    match e:
        case Nat(value):
            return str(value)
        case Bool(value):
            return "TRUE" if value else "FALSE"
        case Atom(name) | Var(name):
            return name
        case Atoms(names):
            return "{" + ", ".join(sorted(names)) + "}" if names else "∅"
        case Universe():
            return "UNIVERSE"
        case SetOf(elems):
            return "{" + ", ".join(show(x) for x in elems) + "}"
        case Card(arg):
            return f"card({show(arg)})"
        case Not(Bin("in", left, right)):
            return f"{show(left)} ∉ {show(right)}"
        case Not(arg):
            return f"¬({show(arg)})"
        case Junction(op, args):
            if not args:
                return "TRUE" if op == "and" else "FALSE"
            sep = " ∧ " if op == "and" else " ∨ "
            return "(" + sep.join(show(a) for a in args) + ")"
        case Bin(op, left, right):
            return f"({show(left)} {_INFIX[op]} {show(right)})"
        case Quant(kind, bind, domain, body):
            q = "∀" if kind == "forall" else "∃"
            return f"{q}{bind} ∈ {show_domain(domain)} · {show(body)}"
    return repr(e)
