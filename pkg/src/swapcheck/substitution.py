"""Switching a running system for its substitute.

A substitution moves control from a *source* system to a *target* system of
the same machine. Cold start resets the target variables to their initial
values. Hot start searches the target domains for the least valuation (in
canonical order) that satisfies the horizontal invariant, matches the source
variant and keeps every machine invariant. Warm start does the same but only
accepts checkpoint states; when none matches it falls back to the closest
checkpoint that claims less progress than the source had made.

The source is fail-stop: after the switch its variables are frozen.
"""

from __future__ import annotations

import enum
import itertools
import json
import random
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Optional, Union

from . import expr as E
from . import kernel as K
from .errors import ConfigError, MaxStepsExceeded, SwapError, Unrecoverable, WrongActiveSystem
from .kernel import CompoundState, Machine, SystemDef, Valuation
from .obligations import (
    Counterexample,
    ObligationReport,
    binding_dict,
    explore,
    valuation_dict,
    violated_invariant,
)


class Policy(str, enum.Enum):
    COLD = "cold"
    WARM = "warm"
    HOT = "hot"


@dataclass(frozen=True)
class AtStep:
    """Fire once this many events have run on the source system."""

    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ConfigError("AtStep index must be >= 0")


@dataclass(frozen=True)
class WhenPred:
    pred: E.Expr


@dataclass(frozen=True)
class Manual:
    pass


Trigger = Union[AtStep, WhenPred, Manual]

RecoveryFn = Callable[[Valuation], Mapping]


@dataclass(frozen=True)
class SubstitutionConfig:
    machine: Machine
    source: SystemDef
    target: SystemDef
    policy: Policy
    hinv: Optional[E.Expr] = None
    trigger: Trigger = Manual()
    recovery: Optional[RecoveryFn] = field(default=None, compare=False)

    def __post_init__(self):
        m = self.machine
        object.__setattr__(self, "policy", Policy(self.policy))
        if m.selector is None:
            raise ConfigError(f"{m.name} has no selector variable recording the active system")
        if self.source.id == self.target.id:
            raise ConfigError("source and target must be different systems")
        ids = {s.id for s in m.systems}
        for s in (self.source, self.target):
            if s.id not in ids or m.system(s.id) != s:
                raise ConfigError(f"system {s.id} is not part of machine {m.name}")
        if self.policy is not Policy.COLD and self.hinv is None:
            raise ConfigError(f"{self.policy.value} start needs a horizontal invariant")
        linked = set(self.source.sv) | set(self.target.sv)
        if self.hinv is not None:
            stray = E.free_vars(self.hinv) - linked
            if stray:
                raise ConfigError(f"horizontal invariant mentions unlinked variables {sorted(stray)}")
            if E.sort_of(self.hinv, m.sorts()) is not E.Sort.BOOL:
                raise ConfigError("horizontal invariant must be boolean")
        if isinstance(self.trigger, WhenPred):
            stray = E.free_vars(self.trigger.pred) & set(self.target.sv)
            if stray:
                raise ConfigError(f"trigger reads target variables {sorted(stray)}")
            if E.sort_of(self.trigger.pred, m.sorts()) is not E.Sort.BOOL:
                raise ConfigError("trigger predicate must be boolean")


def config_for(
    m: Machine,
    policy: Policy | str,
    trigger: Trigger = Manual(),
    hinv: Optional[E.Expr] = None,
    source: str | None = None,
    target: str | None = None,
) -> SubstitutionConfig:
    """Config for a two-system machine; the horizontal invariant defaults to the machine's."""
    if len(m.systems) < 2:
        raise ConfigError(f"{m.name} declares fewer than two systems")
    src = m.system(source) if source else m.systems[0]
    tgt = m.system(target) if target else m.systems[1]
    policy = Policy(policy)
    if hinv is None and policy is not Policy.COLD:
        hinv = m.horizontal
    return SubstitutionConfig(m, src, tgt, policy, hinv, trigger)


def variant_match(m: Machine, source: SystemDef, vs: Mapping, target: SystemDef, vt: Mapping) -> bool:
    return K.variant_value(m, source, vs) == K.variant_value(m, target, vt)


# --- recovery --------------------------------------------------------------


def _joined(cfg: SubstitutionConfig, current: Valuation, assignment: Mapping) -> Valuation:
    m = cfg.machine
    changes = dict(assignment)
    if m.selector is not None:
        changes[m.selector] = [s.id for s in m.systems].index(cfg.target.id)
    return current.update(changes)


def target_assignments(cfg: SubstitutionConfig):
    """Every valuation of the target variables, in canonical order."""
    m = cfg.machine
    names = cfg.target.sv
    domains = [K.domain_of(m.decl(n), m.universe) for n in names]
    for combo in itertools.product(*domains):
        yield Valuation(zip(names, combo))


def _conditions(cfg: SubstitutionConfig, current: Valuation, assignment: Mapping) -> dict:
    m = cfg.machine
    full = _joined(cfg, current, assignment)
    return {
        "horizontal invariant": bool(m.eval(cfg.hinv, full)),
        "variant match": variant_match(m, cfg.source, current, cfg.target, full),
        "machine invariants": violated_invariant(m, full) is None,
    }


def _checkpoint(cfg: SubstitutionConfig, current: Valuation, assignment: Mapping) -> bool:
    m = cfg.machine
    if m.checkpoint is None:
        return True
    return bool(m.eval(m.checkpoint, _joined(cfg, current, assignment)))


def _unrecoverable(cfg, current, extra=()) -> Unrecoverable:
    # name the constraints no single candidate can meet, or all of them if only the conjunction fails
    seen = {k: False for k in ("horizontal invariant", "variant match", "machine invariants")}
    for a in target_assignments(cfg):
        for k, ok in _conditions(cfg, current, a).items():
            seen[k] = seen[k] or ok
    failing = tuple(k for k, ok in seen.items() if not ok) or tuple(seen)
    failing += tuple(extra)
    return Unrecoverable(
        f"no {cfg.target.id} state satisfies {' and '.join(failing)} for {current!r}", failing
    )


def recover_state(cfg: SubstitutionConfig, current: Valuation) -> Valuation:
    """Target valuation (over ``cfg.target.sv``) resuming from ``current``."""
    if cfg.policy is Policy.COLD:
        raise ConfigError("cold start does not recover state")
    m = cfg.machine

    if cfg.recovery is not None:
        proposed = Valuation(cfg.recovery(current)).restrict(cfg.target.sv)
        if set(proposed) != set(cfg.target.sv):
            raise Unrecoverable("registered recovery function did not cover the target variables")
        for n in cfg.target.sv:
            if not K.in_domain(m.decl(n), proposed[n], m.atoms):
                raise Unrecoverable(f"registered recovery function put {n} outside its domain")
        failed = tuple(k for k, ok in _conditions(cfg, current, proposed).items() if not ok)
        if failed:
            raise Unrecoverable(f"registered recovery function violates {', '.join(failed)}", failed)
        return proposed

    warm = cfg.policy is Policy.WARM
    wanted = K.variant_value(m, cfg.source, current)
    for a in target_assignments(cfg):
        full = _joined(cfg, current, a)
        if (
            m.eval(cfg.hinv, full)
            and K.variant_value(m, cfg.target, full) == wanted
            and violated_invariant(m, full) is None
            and (not warm or _checkpoint(cfg, current, a))
        ):
            return a
    if not warm:
        raise _unrecoverable(cfg, current)

    # roll back to the nearest checkpoint with less progress than the source reached
    reached = K.variant_value(m, cfg.source, current)
    best, best_key = None, None
    for a in target_assignments(cfg):
        if not _checkpoint(cfg, current, a):
            continue
        full = _joined(cfg, current, a)
        if violated_invariant(m, full) is not None:
            continue
        v = K.variant_value(m, cfg.target, full)
        if v <= reached:
            continue
        key = (v, K.canonical_key(a, cfg.target.sv))
        if best_key is None or key < best_key:
            best, best_key = a, key
    if best is None:
        raise _unrecoverable(cfg, current, ("checkpoint",))
    return best


@dataclass(frozen=True)
class SwitchRecord:
    policy: Policy
    source: str
    target: str
    pre_variant: int
    post_variant: int
    hinv_holds: Optional[bool]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.value,
            "source": self.source,
            "target": self.target,
            "pre_variant": self.pre_variant,
            "post_variant": self.post_variant,
            "hinv_holds": self.hinv_holds,
        }


def perform_switch(cfg: SubstitutionConfig, state: CompoundState) -> tuple[CompoundState, SwitchRecord]:
    if state.active != cfg.source.id:
        raise WrongActiveSystem(f"switch expects {cfg.source.id} active, found {state.active}")
    m = cfg.machine
    current = state.valuation
    if cfg.policy is Policy.COLD:
        assignment = m.init.restrict(cfg.target.sv)
    else:
        assignment = recover_state(cfg, current)
    post = _joined(cfg, current, assignment)
    hinv = cfg.hinv if cfg.hinv is not None else m.horizontal
    record = SwitchRecord(
        cfg.policy,
        cfg.source.id,
        cfg.target.id,
        K.variant_value(m, cfg.source, current),
        K.variant_value(m, cfg.target, post),
        bool(m.eval(hinv, post)) if hinv is not None else None,
    )
    return CompoundState(cfg.target.id, post), record


def switch(cfg: SubstitutionConfig, state: CompoundState) -> CompoundState:
    return perform_switch(cfg, state)[0]


# --- scenarios -------------------------------------------------------------


@dataclass
class Trace:
    records: list
    final: CompoundState
    switch_step: Optional[int] = None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def driver_choices(m: Machine, state: CompoundState) -> list:
    """Enabled (event, binding) pairs belonging to the active system."""
    pairs = K.enabled(m, state.valuation)
    if not m.systems:
        return pairs
    return [(e, b) for e, b in pairs if m.event(e).system == state.active]


def _record(m: Machine, step: int, state: CompoundState, event=None, binding=None, sw=None) -> dict:
    rec = {
        "step": step,
        "active": state.active,
        "valuation": valuation_dict(state.valuation),
        "variants": {s.id: K.variant_value(m, s, state.valuation) for s in m.systems},
    }
    if event is not None:
        rec["event"] = event
        rec["binding"] = binding_dict(binding or ())
    if sw is not None:
        rec["switch"] = sw.to_dict()
    return rec


def _fires(cfg: SubstitutionConfig, state: CompoundState, events_run: int) -> bool:
    trig = cfg.trigger
    if isinstance(trig, AtStep):
        return events_run == trig.index
    if isinstance(trig, WhenPred):
        return bool(cfg.machine.eval(trig.pred, state.valuation))
    return False


def run_scenario(
    m: Machine,
    cfg: Optional[SubstitutionConfig] = None,
    driver: str = "random",
    seed: int = 0,
    max_steps: int = 10_000,
) -> Trace:
    """Drive ``m`` from its initial state, switching systems when the trigger fires.

    The trigger is only consulted while the source system still has work to
    do: a finished system cannot fail mid-run. The run ends at quiescence of
    the active system; MaxStepsExceeded carries the partial trace otherwise.
    """
    if driver not in ("random", "first"):
        raise ConfigError(f"unknown driver policy {driver!r}")
    if cfg is not None and cfg.machine is not m:
        if cfg.machine != m:
            raise ConfigError("substitution config belongs to another machine")
    rng = random.Random(seed)
    state = K.compound_state(m, K.initialize(m))
    records = [_record(m, 0, state)]
    events_run = 0
    switched_at = None
    frozen: tuple = ()

    while True:
        choices = driver_choices(m, state)
        if (
            cfg is not None
            and switched_at is None
            and state.active == cfg.source.id
            and choices
            and _fires(cfg, state, events_run)
        ):
            state, sw = perform_switch(cfg, state)
            switched_at = len(records)
            frozen = tuple((n, state.valuation[n]) for n in cfg.source.sv)
            records.append(_record(m, switched_at, state, "switch", (), sw))
            continue
        if not choices:
            break
        if len(records) - 1 >= max_steps:
            raise MaxStepsExceeded(max_steps, Trace(records, state, switched_at))
        event, binding = rng.choice(choices) if driver == "random" else choices[0]
        post = K.step(m, state.valuation, event, binding)
        if any(post[n] != v for n, v in frozen):
            raise SwapError(f"event {event} wrote a variable of the stopped system {cfg.source.id}")
        state = CompoundState(K.active_system(m, post), post)
        events_run += 1
        records.append(_record(m, len(records), state, event, binding))
    return Trace(records, state, switched_at)


# --- exhaustive switch obligation --------------------------------------------


def check_switch(cfg: SubstitutionConfig, cap: int | None = None) -> ObligationReport:
    """Switch from every reachable state where the source is still running.

    Hot: horizontal invariant, variant continuity and machine invariants.
    Warm: the same, except a checkpoint rollback may raise the variant.
    Cold: target equals its initial valuation and machine invariants hold.
    """
    m = cfg.machine
    graph, cx = explore(m, cap)
    subject = f"{cfg.source.id}->{cfg.target.id}:{cfg.policy.value}"
    if cx is not None:
        return ObligationReport("switch", m.name, "fail", len(graph), cx, subject)
    checked = 0
    for pre in graph.order:
        state = K.compound_state(m, pre)
        if state.active != cfg.source.id or not driver_choices(m, state):
            continue
        checked += 1
        problem, post = None, None
        try:
            new, rec = perform_switch(cfg, state)
            post = new.valuation
        except Unrecoverable as exc:
            problem = f"unrecoverable: {exc}"
        if problem is None:
            problem = violated_invariant(m, post)
            if problem is not None:
                problem = f"machine invariant {problem}"
        if problem is None and cfg.policy is Policy.COLD:
            if post.restrict(cfg.target.sv) != m.init.restrict(cfg.target.sv):
                problem = "cold start did not reset the target to its initial state"
        if problem is None and cfg.policy is Policy.HOT:
            if not rec.hinv_holds:
                problem = f"horizontal invariant {E.show(cfg.hinv)}"
            elif rec.pre_variant != rec.post_variant:
                problem = f"variant {rec.pre_variant} -> {rec.post_variant} does not match"
        if problem is None and cfg.policy is Policy.WARM:
            if rec.post_variant < rec.pre_variant:
                problem = f"warm start claims progress not made ({rec.pre_variant} -> {rec.post_variant})"
            elif rec.post_variant == rec.pre_variant and not rec.hinv_holds:
                problem = f"horizontal invariant {E.show(cfg.hinv)}"
        if problem is not None:
            cx = Counterexample(graph.path_to(pre), pre, problem, post=post)
            return ObligationReport("switch", m.name, "fail", checked, cx, subject)
    return ObligationReport("switch", m.name, "pass", checked, None, subject)
