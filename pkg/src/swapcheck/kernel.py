"""Valuations, guarded-event machines and single-step execution.

A machine is a finite transition system: typed variables over finite
domains, one initial valuation, invariants, guarded events with parallel
assignments, and an optional partition of its variables into *systems*
(each a variable set plus a variant expression). Events are deterministic
once a parameter binding is fixed; choosing among enabled pairs is left to
the caller.

Composite machines that host several systems name a ``selector`` variable,
a nat whose value indexes ``systems`` and tells which system is active.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Optional

from . import expr as E
from .errors import (
    DomainError,
    GuardFalse,
    InitViolatesInvariant,
    MachineError,
    SortError,
    UnknownEvent,
)
from .expr import Expr, Sort, Value

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

VAR_KINDS = (Sort.NAT, Sort.BOOL, Sort.ATOMSET)


class Valuation(Mapping):
    """Immutable, hashable map from variable names to values."""

    __slots__ = ("_data", "_hash")

    def __init__(self, items: Mapping[str, Value] | Iterable[tuple[str, Value]] = ()):
        data = dict(items)
        for name, value in data.items():
            if isinstance(value, (set, list, tuple)):
                data[name] = frozenset(value)
        self._data = data
        self._hash = None

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Valuation):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}={format_value(v)}" for k, v in self._data.items())
        return f"Valuation({inner})"

    def update(self, changes: Mapping[str, Value]) -> Valuation:
        data = dict(self._data)
        data.update(changes)
        return Valuation(data)

    def restrict(self, names: Iterable[str]) -> Valuation:
        return Valuation((n, self._data[n]) for n in names if n in self._data)


def format_value(v: Value) -> str:
    if isinstance(v, frozenset):
        return "{" + ",".join(sorted(v)) + "}"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    return str(v)


def value_key(v: Value):
    """Canonical sort key of a single value.

    Atom sets compare as their sorted member lists where running out of
    members ranks *after* every atom, so {a, c} < {a} < {c} < ∅. This makes
    the fullest set in the earliest position the minimum of a recovery search.
    """
    if isinstance(v, frozenset):
        return tuple((0, a) for a in sorted(v)) + ((1, ""),)
    if isinstance(v, bool):
        return int(v)
    return v


def canonical_key(v: Mapping[str, Value], names: Iterable[str]) -> tuple:
    return tuple(value_key(v[n]) for n in names)


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: Sort
    bound: Optional[int] = None


@dataclass(frozen=True)
class Param:
    name: str
    domain: E.Domain


@dataclass(frozen=True)
class GuardedEvent:
    name: str
    params: tuple = ()
    guard: Expr = E.TRUE
    assigns: tuple = ()  # (variable, Expr) pairs, applied in parallel
    convergent: bool = False
    system: Optional[str] = None

    def assigned(self) -> tuple:
        return tuple(target for target, _ in self.assigns)


@dataclass(frozen=True)
class SystemDef:
    id: str
    sv: tuple
    variant: Expr


@dataclass(frozen=True)
class SystemsPartition:
    systems: tuple

    def __post_init__(self):
        seen: dict[str, str] = {}
        ids = set()
        for s in self.systems:
            if s.id in ids:
                raise MachineError(f"duplicate system id {s.id}")
            ids.add(s.id)
            for name in s.sv:
                if name in seen:
                    raise MachineError(f"variable {name} belongs to both {seen[name]} and {s.id}")
                seen[name] = s.id

    def get(self, system_id: str) -> SystemDef:
        for s in self.systems:
            if s.id == system_id:
                return s
        raise MachineError(f"unknown system {system_id}")

    def owner(self, variable: str) -> Optional[str]:
        for s in self.systems:
            if variable in s.sv:
                return s.id
        return None


@dataclass(frozen=True)
class CompoundState:
    active: str
    valuation: Valuation


Binding = tuple  # ((param, value), ...) in parameter order


@dataclass(frozen=True)
class Machine:
    name: str
    universe: tuple
    variables: tuple
    init: Valuation
    invariants: tuple = ()
    variant: Optional[Expr] = None
    events: tuple = ()
    systems: tuple = ()
    selector: Optional[str] = None
    checkpoint: Optional[Expr] = None
    horizontal: Optional[Expr] = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(sorted(self.universe)))
        object.__setattr__(self, "_index", {e.name: e for e in self.events})
        validate(self)

    @property
    def atoms(self) -> frozenset:
        return frozenset(self.universe)

    @property
    def var_names(self) -> tuple:
        return tuple(d.name for d in self.variables)

    @property
    def partition(self) -> SystemsPartition:
        return SystemsPartition(self.systems)

    def decl(self, name: str) -> VarDecl:
        for d in self.variables:
            if d.name == name:
                return d
        raise MachineError(f"{self.name}: unknown variable {name}")

    def event(self, name: str) -> GuardedEvent:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownEvent(f"{self.name}: no event named {name!r}") from None

    def system(self, system_id: str) -> SystemDef:
        return self.partition.get(system_id)

    def sorts(self) -> dict:
        return {d.name: d.kind for d in self.variables}

    def eval(self, e: Expr, env: Mapping[str, Value]) -> Value:
        return E.evaluate(e, env, self.atoms)


# --- well-formedness -------------------------------------------------------


def atom_literals(e) -> set:
    """All atom names written literally inside an expression or domain."""
    match e:
        case E.Atom(name):
            return {name}
        case E.Atoms(names):
            return set(names)
        case E.SetOf(elems) | E.Junction(_, elems):
            return set().union(*(atom_literals(x) for x in elems))
        case E.Card(arg) | E.Not(arg):
            return atom_literals(arg)
        case E.Bin(_, left, right):
            return atom_literals(left) | atom_literals(right)
        case E.Quant(_, _, domain, body):
            return atom_literals(domain) | atom_literals(body)
        case E.AtomsIn(of):
            return atom_literals(of)
    return set()


def in_domain(decl: VarDecl, value: Value, universe: frozenset) -> bool:
    if decl.kind is Sort.BOOL:
        return isinstance(value, bool)
    if decl.kind is Sort.NAT:
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            return False
        return decl.bound is None or value <= decl.bound
    return isinstance(value, frozenset) and value <= universe


def domain_of(decl: VarDecl, universe: Iterable[str]) -> list:
    """Every value of a variable's domain, in canonical order."""
    if decl.kind is Sort.BOOL:
        return [False, True]
    if decl.kind is Sort.NAT:
        if decl.bound is None:
            raise DomainError(f"nat variable {decl.name} has no bound; its domain is not enumerable")
        return list(range(decl.bound + 1))
    atoms = sorted(universe)
    subsets = [
        frozenset(c) for r in range(len(atoms) + 1) for c in itertools.combinations(atoms, r)
    ]
    return sorted(subsets, key=value_key)


def _check(m: Machine, e: Expr, env: Mapping[str, Sort], want: Sort, what: str):
    try:
        got = E.sort_of(e, env)
    except SortError as exc:
        raise MachineError(f"{m.name}: {what}: {exc}") from exc
    except E.UnboundVariable as exc:
        raise MachineError(f"{m.name}: {what}: undeclared name {exc}") from exc
    if got is not want:
        raise MachineError(f"{m.name}: {what} has sort {got.value}, expected {want.value}")
    stray = atom_literals(e) - set(m.universe)
    if stray:
        raise MachineError(f"{m.name}: {what} mentions atoms outside the universe: {sorted(stray)}")


def validate(m: Machine) -> None:
    """Raise MachineError unless ``m`` is structurally well formed.

    Invariant satisfaction by the initial state is not checked here; see
    :func:`initialize`.
    """
    if not m.name:
        raise MachineError("machine needs a name")
    for a in m.universe:
        if not _TOKEN.match(a):
            raise MachineError(f"{m.name}: bad atom name {a!r}")
    if len(set(m.universe)) != len(m.universe):
        raise MachineError(f"{m.name}: duplicate atoms in universe")
    names = [d.name for d in m.variables]
    if len(set(names)) != len(names):
        raise MachineError(f"{m.name}: duplicate variable declarations")
    for d in m.variables:
        if not _TOKEN.match(d.name):
            raise MachineError(f"{m.name}: bad variable name {d.name!r}")
        if d.kind not in VAR_KINDS:
            raise MachineError(f"{m.name}: variable {d.name} has unsupported kind {d.kind}")
        if d.bound is not None and (d.kind is not Sort.NAT or d.bound < 0):
            raise MachineError(f"{m.name}: bad bound on {d.name}")
    if set(m.init) != set(names):
        missing = set(names) - set(m.init)
        extra = set(m.init) - set(names)
        raise MachineError(f"{m.name}: init not total (missing {sorted(missing)}, extra {sorted(extra)})")
    for d in m.variables:
        if not in_domain(d, m.init[d.name], m.atoms):
            raise MachineError(f"{m.name}: init value of {d.name} outside its domain")

    env = m.sorts()
    for i, inv in enumerate(m.invariants):
        _check(m, inv, env, Sort.BOOL, f"invariant {i}")
    if m.variant is not None:
        _check(m, m.variant, env, Sort.NAT, "variant")
    for label, pred in (("checkpoint", m.checkpoint), ("horizontal invariant", m.horizontal)):
        if pred is not None:
            _check(m, pred, env, Sort.BOOL, label)

    partition = m.partition
    for s in m.systems:
        if not _TOKEN.match(s.id):
            raise MachineError(f"{m.name}: bad system id {s.id!r}")
        stray = set(s.sv) - set(names)
        if stray:
            raise MachineError(f"{m.name}: system {s.id} owns undeclared variables {sorted(stray)}")
        _check(m, s.variant, {n: env[n] for n in s.sv}, Sort.NAT, f"variant of {s.id}")
    system_ids = {s.id for s in m.systems}

    if m.selector is not None:
        d = m.decl(m.selector) if m.selector in names else None
        if d is None or d.kind is not Sort.NAT:
            raise MachineError(f"{m.name}: selector {m.selector} must be a declared nat variable")
        if partition.owner(m.selector) is not None:
            raise MachineError(f"{m.name}: selector {m.selector} may not belong to a system")
        if d.bound is None or d.bound >= len(m.systems):
            raise MachineError(f"{m.name}: selector bound must index the systems list")

    event_names = [e.name for e in m.events]
    if len(set(event_names)) != len(event_names):
        raise MachineError(f"{m.name}: duplicate event names")
    for ev in m.events:
        where = f"event {ev.name}"
        if not _TOKEN.match(ev.name):
            raise MachineError(f"{m.name}: bad event name {ev.name!r}")
        local = dict(env)
        for p in ev.params:
            if p.name in local:
                raise MachineError(f"{m.name}: {where}: parameter {p.name} shadows another name")
            try:
                local[p.name] = E.domain_sort(p.domain, env)
            except SortError as exc:
                raise MachineError(f"{m.name}: {where}: {exc}") from exc
            if isinstance(p.domain, E.AtomsIn):
                stray = atom_literals(p.domain) - set(m.universe)
                if stray:
                    raise MachineError(f"{m.name}: {where}: atoms outside universe {sorted(stray)}")
        _check(m, ev.guard, local, Sort.BOOL, f"{where} guard")
        targets = ev.assigned()
        if len(set(targets)) != len(targets):
            raise MachineError(f"{m.name}: {where} assigns a variable twice")
        for target, rhs in ev.assigns:
            if target not in env:
                raise MachineError(f"{m.name}: {where} assigns undeclared variable {target}")
            _check(m, rhs, local, env[target], f"{where} assignment to {target}")
        if ev.system is not None and ev.system not in system_ids:
            raise MachineError(f"{m.name}: {where} belongs to unknown system {ev.system}")
        if ev.convergent and m.variant is None and ev.system is None:
            raise MachineError(f"{m.name}: convergent {where} but no variant is declared")


# --- operations ------------------------------------------------------------


def initialize(m: Machine) -> Valuation:
    """Return the initial valuation after re-checking every invariant on it."""
    v = m.init
    for inv in m.invariants:
        if not m.eval(inv, v):
            raise InitViolatesInvariant(m.name, E.show(inv))
    return v


def bindings(m: Machine, ev: GuardedEvent, v: Mapping[str, Value]) -> list:
    """All parameter bindings of ``ev`` in lexicographic order."""
    domains = [E.domain_values(p.domain, v, m.atoms) for p in ev.params]
    names = [p.name for p in ev.params]
    return [tuple(zip(names, combo)) for combo in itertools.product(*domains)]


def _env(v: Mapping[str, Value], binding: Binding) -> dict:
    env = dict(v)
    env.update(binding)
    return env


def guard_holds(m: Machine, ev: GuardedEvent, v: Mapping[str, Value], binding: Binding) -> bool:
    return bool(m.eval(ev.guard, _env(v, binding)))


def enabled(m: Machine, v: Mapping[str, Value]) -> list:
    """Enabled (event name, binding) pairs in declaration then binding order."""
    out = []
    for ev in m.events:
        for b in bindings(m, ev, v):
            if guard_holds(m, ev, v, b):
                out.append((ev.name, b))
    return out


def normalize_binding(ev: GuardedEvent, binding) -> Binding:
    if binding is None:
        binding = ()
    given = dict(binding)
    names = [p.name for p in ev.params]
    if set(given) != set(names):
        raise GuardFalse(f"event {ev.name} expects parameters {names}, got {sorted(given)}")
    return tuple((n, given[n]) for n in names)


def step(m: Machine, v: Valuation, event: str, binding=None) -> Valuation:
    """Fire ``event`` under ``binding``: evaluate every right-hand side in ``v``, then write."""
    ev = m.event(event)
    b = normalize_binding(ev, binding)
    for p, value in b:
        dom = next(q.domain for q in ev.params if q.name == p)
        if value not in E.domain_values(dom, v, m.atoms):
            raise GuardFalse(f"{event}: {p}={value!r} outside its parameter domain")
    if not guard_holds(m, ev, v, b):
        raise GuardFalse(f"{m.name}: guard of {event}{dict(b)} is false")
    env = _env(v, b)
    changes = {target: m.eval(rhs, env) for target, rhs in ev.assigns}
    for target, value in changes.items():
        if not in_domain(m.decl(target), value, m.atoms):
            raise DomainError(
                f"{m.name}: {event} sets {target} to {format_value(value)}, outside its domain"
            )
    return v.update(changes)


def variant_value(m: Machine, s: SystemDef | str, v: Mapping[str, Value]) -> int:
    if isinstance(s, str):
        s = m.system(s)
    return m.eval(s.variant, {n: v[n] for n in s.sv})


def active_system(m: Machine, v: Mapping[str, Value]) -> Optional[str]:
    """Id of the running system, or None for machines without systems."""
    if not m.systems:
        return None
    if m.selector is None:
        return m.systems[0].id
    return m.systems[v[m.selector]].id


def compound_state(m: Machine, v: Valuation) -> CompoundState:
    return CompoundState(active_system(m, v), v)
