"""Exhaustive proof-obligation checking over finite state spaces.

Each check explores the reachable states breadth-first from the initial
valuation, so the first violation found is reached by a shortest path and
every failing report carries a counterexample that can be replayed step by
step with :func:`swapcheck.kernel.step`.
"""

from __future__ import annotations

import json
import os
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

from . import expr as E
from . import kernel as K
from .errors import (
    DomainError,
    GluingIllSorted,
    InitViolatesInvariant,
    MachineError,
    StateCapExceeded,
    SwapError,
    UnboundVariable,
)
from .kernel import Machine, SystemDef, Valuation

DEFAULT_STATE_CAP = 1_000_000
STUTTER = "stutter"


def default_cap() -> int:
    raw = os.environ.get("SUBST_STATE_CAP")
    return int(raw) if raw else DEFAULT_STATE_CAP


def binding_dict(b) -> dict:
    return {k: K.format_value(v) if isinstance(v, frozenset) else v for k, v in b}


def valuation_dict(v) -> dict:
    return {k: sorted(x) if isinstance(x, frozenset) else x for k, x in v.items()}


@dataclass(frozen=True)
class Counterexample:
    path: tuple  # ((event, binding), ...) leading from the initial state to `state`
    state: Valuation
    violated: str
    event: Optional[str] = None
    binding: tuple = ()
    post: Optional[Valuation] = None
    abstract: Optional[Valuation] = None

    def to_dict(self) -> dict:
        out = {
            "path": [{"event": e, "binding": binding_dict(b)} for e, b in self.path],
            "state": valuation_dict(self.state),
            "violated": self.violated,
        }
        if self.event is not None:
            out["event"] = self.event
            out["binding"] = binding_dict(self.binding)
        if self.post is not None:
            out["post"] = valuation_dict(self.post)
        if self.abstract is not None:
            out["abstract"] = valuation_dict(self.abstract)
        return out


@dataclass(frozen=True)
class ObligationReport:
    kind: str
    machine: str
    verdict: str
    states: int
    counterexample: Optional[Counterexample] = None
    subject: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "machine": self.machine, "verdict": self.verdict, "states": self.states}
        if self.subject is not None:
            out["subject"] = self.subject
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _pass(kind, m, states, subject=None):
    return ObligationReport(kind, m.name, "pass", states, None, subject)


def _fail(kind, m, states, cx, subject=None):
    return ObligationReport(kind, m.name, "fail", states, cx, subject)


# --- exploration -----------------------------------------------------------


class StateGraph:
    """BFS tree over reachable valuations, with parent links for path recovery."""

    def __init__(self, init: Valuation):
        self.init = init
        self.order: list[Valuation] = [init]
        self.parent: dict[Valuation, tuple] = {init: (None, None, ())}

    def __len__(self):
        return len(self.order)

    def __contains__(self, v):
        return v in self.parent

    def add(self, v, pre, event, binding) -> bool:
        if v in self.parent:
            return False
        self.parent[v] = (pre, event, binding)
        self.order.append(v)
        return True

    def path_to(self, v: Valuation) -> tuple:
        steps = []
        while True:
            pre, event, binding = self.parent[v]
            if pre is None:
                break
            steps.append((event, binding))
            v = pre
        return tuple(reversed(steps))


EdgeCheck = Callable[[Valuation, str, tuple, Valuation], Optional[str]]


def explore(m: Machine, cap: int | None = None, on_edge: EdgeCheck | None = None):
    """Breadth-first reachability from ``m.init``.

    ``on_edge(pre, event, binding, post)`` may return a violation message to
    stop the search. Returns ``(graph, None)`` at the fixpoint, or
    ``(graph, Counterexample)`` when a check fails.
    """
    cap = default_cap() if cap is None else cap
    if cap <= 0:
        raise ValueError("state cap must be positive")
    graph = StateGraph(m.init)
    queue = deque([m.init])
    while queue:
        pre = queue.popleft()
        for event, binding in K.enabled(m, pre):
            try:
                post = K.step(m, pre, event, binding)
            except DomainError as exc:
                cx = Counterexample(graph.path_to(pre), pre, str(exc), event, binding)
                return graph, cx
            if on_edge is not None:
                problem = on_edge(pre, event, binding, post)
                if problem is not None:
                    cx = Counterexample(graph.path_to(pre), pre, problem, event, binding, post)
                    return graph, cx
            if graph.add(post, pre, event, binding):
                if len(graph) > cap:
                    raise StateCapExceeded(cap, len(queue) + 1)
                queue.append(post)
    return graph, None


def reachable(m: Machine, cap: int | None = None) -> tuple:
    """All reachable valuations, sorted canonically."""
    graph, cx = explore(m, cap)
    if cx is not None:
        raise DomainError(cx.violated)
    names = m.var_names
    return tuple(sorted(graph.order, key=lambda v: K.canonical_key(v, names)))


# --- individual obligations ------------------------------------------------


def violated_invariant(m: Machine, v: Valuation) -> Optional[str]:
    for inv in m.invariants:
        if not m.eval(inv, v):
            return E.show(inv)
    return None


def check_invariants(m: Machine, cap: int | None = None) -> ObligationReport:
    try:
        K.initialize(m)
    except InitViolatesInvariant as exc:
        cx = Counterexample((), m.init, exc.predicate)
        return _fail("invariants", m, 1, cx)

    def on_edge(pre, event, binding, post):
        return violated_invariant(m, post)

    graph, cx = explore(m, cap, on_edge)
    if cx is not None:
        return _fail("invariants", m, len(graph), cx)
    return _pass("invariants", m, len(graph))


def _variant_events(m: Machine, s: Optional[SystemDef]) -> set:
    if s is None:
        return {ev.name for ev in m.events if ev.convergent}
    return {ev.name for ev in m.events if ev.convergent and ev.system in (None, s.id)}


def check_variant(m: Machine, s: SystemDef | str | None = None, cap: int | None = None) -> ObligationReport:
    """Every convergent event strictly decreases the variant; the variant stays a natural.

    ``s`` selects a system's variant; ``None`` uses the machine-level variant.
    The switch event is never convergent, so it is exempt.
    """
    if isinstance(s, str):
        s = m.system(s)
    subject = s.id if s is not None else None
    if s is None and m.variant is None:
        raise MachineError(f"{m.name}: no machine variant declared")
    convergent = _variant_events(m, s)

    def measure(v):
        if s is None:
            return m.eval(m.variant, v)
        return K.variant_value(m, s, v)

    def on_edge(pre, event, binding, post):
        if event not in convergent:
            return None
        before, after = measure(pre), measure(post)
        if not (0 <= after < before):
            return f"variant {before} -> {after} is not a strict decrease"
        return None

    if not convergent:
        # vacuous, but still confirm the variant is a natural on every reachable state
        graph, cx = explore(m, cap)
    else:
        graph, cx = explore(m, cap, on_edge)
    if cx is not None:
        return _fail("variant", m, len(graph), cx, subject)
    for v in graph.order:
        if measure(v) < 0:
            return _fail("variant", m, len(graph), Counterexample(graph.path_to(v), v, "negative variant"), subject)
    return _pass("variant", m, len(graph), subject)


@dataclass(frozen=True)
class RefinementLink:
    """Concrete machine refining an abstract one under a gluing predicate.

    Variables declared in both machines are identified: their values must
    agree in every glued pair, on top of the gluing predicate itself.
    """

    abstract: Machine
    concrete: Machine
    gluing: E.Expr
    event_map: tuple  # (concrete event, abstract event | "stutter") pairs

    def __post_init__(self):
        mapping = dict(self.event_map)
        for ev in self.concrete.events:
            if ev.name not in mapping:
                raise MachineError(f"concrete event {ev.name} is not mapped")
        for c, a in mapping.items():
            if c not in {ev.name for ev in self.concrete.events}:
                raise MachineError(f"event map names unknown concrete event {c}")
            if a != STUTTER:
                self.abstract.event(a)

    def mapped(self, concrete_event: str) -> str:
        return dict(self.event_map)[concrete_event]

    def shared(self) -> tuple:
        return tuple(n for n in self.concrete.var_names if n in set(self.abstract.var_names))

    def glued(self, va: Valuation, vc: Valuation) -> bool:
        if any(va[n] != vc[n] for n in self.shared()):
            return False
        env = dict(va)
        env.update(vc)
        return bool(E.evaluate(self.gluing, env, self.abstract.atoms | self.concrete.atoms))


def _check_gluing_sorts(link: RefinementLink):
    env = dict(link.abstract.sorts())
    for name, sort in link.concrete.sorts().items():
        if env.get(name, sort) is not sort:
            raise GluingIllSorted(f"{name} has different kinds in the two machines")
        env[name] = sort
    try:
        got = E.sort_of(link.gluing, env)
    except (E.SortError, UnboundVariable) as exc:
        raise GluingIllSorted(str(exc)) from exc
    if got is not E.Sort.BOOL:
        raise GluingIllSorted("gluing predicate is not boolean")


def check_refinement(link: RefinementLink, cap: int | None = None) -> ObligationReport:
    """Forward simulation over reachable glued (abstract, concrete) pairs."""
    _check_gluing_sorts(link)
    cap = default_cap() if cap is None else cap
    a_m, c_m = link.abstract, link.concrete
    kind = "refinement"
    subject = a_m.name
    va0, vc0 = K.initialize(a_m), K.initialize(c_m)
    if not link.glued(va0, vc0):
        cx = Counterexample((), vc0, "initial states are not glued", abstract=va0)
        return _fail(kind, c_m, 1, cx, subject)

    start = (va0, vc0)
    parent = {start: None}
    queue = deque([start])

    def path_to(pair):
        steps = []
        while parent[pair] is not None:
            pair, event, binding = parent[pair]
            steps.append((event, binding))
        return tuple(reversed(steps))

    while queue:
        pair = queue.popleft()
        va, vc = pair
        for event, binding in K.enabled(c_m, vc):
            vc2 = K.step(c_m, vc, event, binding)
            target = link.mapped(event)
            if target == STUTTER:
                successors = [va] if link.glued(va, vc2) else []
                why = "stuttering step breaks the gluing invariant"
            else:
                ev = a_m.event(target)
                successors = []
                for ab in K.bindings(a_m, ev, va):
                    if K.guard_holds(a_m, ev, va, ab):
                        va2 = K.step(a_m, va, target, ab)
                        if link.glued(va2, vc2):
                            successors.append(va2)
                why = f"no step of abstract event {target} re-establishes the gluing invariant"
            if not successors:
                cx = Counterexample(path_to(pair), vc, why, event, binding, vc2, abstract=va)
                return _fail(kind, c_m, len(parent), cx, subject)
            for va2 in successors:
                nxt = (va2, vc2)
                if nxt not in parent:
                    parent[nxt] = (pair, event, binding)
                    if len(parent) > cap:
                        raise StateCapExceeded(cap, len(queue) + 1)
                    queue.append(nxt)
    return _pass(kind, c_m, len(parent), subject)


# --- counterexample replay -------------------------------------------------


def replay(m: Machine, cx: Counterexample) -> tuple:
    """Re-execute a counterexample with kernel.step.

    Returns ``(state, post)`` as reproduced; raises SwapError if the path does
    not lead to the recorded state or the final step does not yield the
    recorded post-state.
    """
    v = m.init
    for event, binding in cx.path:
        v = K.step(m, v, event, binding)
    if v != cx.state:
        raise SwapError(f"replay reached {v!r}, counterexample recorded {cx.state!r}")
    post = None
    if cx.event is not None and cx.post is not None:
        post = K.step(m, v, cx.event, cx.binding)
        if post != cx.post:
            raise SwapError(f"replayed step gave {post!r}, counterexample recorded {cx.post!r}")
    return v, post
