"""Command-line driver.

Exit codes: 0 when everything checked passes, 1 on a violation (failed
obligation, unrecoverable switch, unsafe trace), 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import commerce, machinefile
from . import kernel as K
from . import obligations as O
from . import substitution as S
from .errors import ConfigError, FormatError, MachineError, MaxStepsExceeded, SwapError, Unrecoverable

log = logging.getLogger("swapcheck")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2
MAX_SEED = 2**64


@dataclass(frozen=True)
class RunConfig:
    scenario: Optional[str] = None
    machine_path: Optional[Path] = None
    products: int = 5
    purchase: Optional[tuple] = None
    policy: Optional[str] = None
    trigger: S.Trigger = S.Manual()
    seed: int = 0
    max_steps: int = 10_000
    state_cap: int = O.DEFAULT_STATE_CAP
    out: Optional[Path] = None
    mutate: Optional[str] = None
    driver: str = "random"

    def __post_init__(self):
        if (self.scenario is None) == (self.machine_path is None):
            raise ConfigError("give exactly one of --scenario or --machine")
        if not 0 <= self.seed < MAX_SEED:
            raise ConfigError("seed must fit in 64 bits")
        if self.products < 1:
            raise ConfigError("--products must be at least 1")
        if self.max_steps < 1 or self.state_cap < 1:
            raise ConfigError("--max-steps and --state-cap must be positive")
        if self.machine_path is not None and self.mutate is not None:
            raise ConfigError("--mutate only applies to registry scenarios")


def _run_config(args) -> RunConfig:
    trigger: S.Trigger = S.Manual()
    if getattr(args, "fail_at", None) is not None:
        trigger = S.AtStep(args.fail_at)
    elif getattr(args, "fail_when", None) is not None:
        trigger = S.WhenPred(machinefile.load_expr(args.fail_when))
    purchase = None
    if getattr(args, "purchase", None):
        purchase = tuple(p.strip() for p in args.purchase.split(",") if p.strip())
    cap = args.state_cap if args.state_cap is not None else O.default_cap()
    return RunConfig(
        scenario=args.scenario,
        machine_path=Path(args.machine) if args.machine else None,
        products=args.products,
        purchase=purchase,
        policy=getattr(args, "policy", None),
        trigger=trigger,
        seed=getattr(args, "seed", 0),
        max_steps=getattr(args, "max_steps", 10_000),
        state_cap=cap,
        out=Path(args.out) if args.out else None,
        mutate=getattr(args, "mutate", None),
        driver=getattr(args, "driver", "random"),
    )


def scenarios_for(cfg: RunConfig) -> list:
    """Scenarios to check or run. m13 yields one per initial system."""
    if cfg.machine_path is not None:
        m = machinefile.load(cfg.machine_path)
        sub, policies = None, ()
        if len(m.systems) >= 2:
            # same rule as the registry: a declared horizontal invariant means the machine resumes state
            policies = (S.Policy.HOT, S.Policy.WARM) if m.horizontal is not None else (S.Policy.COLD,)
            policy = cfg.policy or ("hot" if m.horizontal is not None else "cold")
            sub = S.config_for(m, policy, cfg.trigger)
        elif cfg.policy is not None or not isinstance(cfg.trigger, S.Manual):
            raise ConfigError(f"{m.name} has no substitute system to switch to")
        return [commerce.Scenario(m.name, m, None, sub, policies)]
    common = dict(n=cfg.products, purchase=cfg.purchase, mutate=cfg.mutate)
    if cfg.scenario in ("m141", "m142"):
        common.update(trigger=cfg.trigger, policy=cfg.policy)
    elif cfg.policy is not None or not isinstance(cfg.trigger, S.Manual):
        raise ConfigError(f"scenario {cfg.scenario} has no substitution; drop --policy/--fail-at/--fail-when")
    out = [commerce.build(cfg.scenario, **common)]
    if cfg.scenario == "m13":
        out.append(commerce.build("m13", start="Sys2", **common))
    return out


def check_suite(sc: commerce.Scenario, cap: int) -> list:
    m = sc.machine
    reports = [O.check_invariants(m, cap)]
    if m.variant is not None and all(m.variant != s.variant for s in m.systems):
        reports.append(O.check_variant(m, None, cap))
    reports += [O.check_variant(m, s, cap) for s in m.systems]
    if sc.refinement is not None:
        reports.append(O.check_refinement(sc.refinement, cap))
    for policy in sc.check_policies:
        if sc.config is not None and policy is sc.config.policy:
            sub = sc.config
        else:
            hinv = sc.config.hinv if sc.config is not None else None
            sub = S.config_for(m, policy, hinv=hinv if policy is not S.Policy.COLD else None)
        reports.append(S.check_switch(sub, cap))
    return reports


def _writer(path: Optional[Path]):
    return open(path, "w") if path is not None else sys.stdout


def cmd_check(cfg: RunConfig) -> int:
    reports = []
    for sc in scenarios_for(cfg):
        reports += check_suite(sc, cfg.state_cap)
    out = _writer(cfg.out)
    try:
        for r in reports:
            out.write(r.to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    failed = [r for r in reports if not r.passed]
    for r in failed:
        log.warning("%s %s on %s: %s", r.kind, r.verdict, r.machine, r.counterexample.violated)
    return EXIT_VIOLATION if failed else EXIT_OK


def trace_safety(m: K.Machine, trace: S.Trace) -> dict:
    """Re-evaluate every machine invariant on every state of a trace."""
    verdicts = {}
    for i, inv in enumerate(m.invariants):
        ok = all(m.eval(inv, K.Valuation(_decode(rec["valuation"]))) for rec in trace.records)
        verdicts[f"inv{i}"] = ok
    return verdicts


def _decode(raw: dict) -> dict:
    return {k: frozenset(v) if isinstance(v, list) else v for k, v in raw.items()}


def cmd_simulate(cfg: RunConfig) -> int:
    (sc, *_) = scenarios_for(cfg)
    try:
        trace = S.run_scenario(sc.machine, sc.config, cfg.driver, cfg.seed, cfg.max_steps)
    except Unrecoverable as exc:
        print(f"unrecoverable switch: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except MaxStepsExceeded as exc:
        print(str(exc), file=sys.stderr)
        trace = exc.trace
        _write_trace(cfg, trace)
        return EXIT_VIOLATION
    _write_trace(cfg, trace)
    safety = trace_safety(sc.machine, trace)
    final = trace.records[-1]
    summary = sys.stdout if cfg.out is not None else sys.stderr
    print(f"scenario: {sc.name} ({sc.machine.name})", file=summary)
    print(f"steps: {len(trace.records) - 1}", file=summary)
    print(f"switch step: {trace.switch_step if trace.switch_step is not None else '-'}", file=summary)
    if trace.switch_step is not None:
        sw = trace.records[trace.switch_step]["switch"]
        print(
            f"switch: {sw['policy']} {sw['source']}->{sw['target']} variant {sw['pre_variant']}->{sw['post_variant']}"
            f" hinv_holds={sw['hinv_holds']}",
            file=summary,
        )
    print(f"active: {final['active']}", file=summary)
    print(f"final variants: {final['variants']}", file=summary)
    bad = [k for k, ok in safety.items() if not ok]
    print(f"safety: {'ok' if not bad else 'VIOLATED ' + ', '.join(bad)}", file=summary)
    return EXIT_VIOLATION if bad else EXIT_OK


def _write_trace(cfg: RunConfig, trace: S.Trace):
    text = trace.to_jsonl()
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)


def cmd_export(cfg: RunConfig) -> int:
    (sc, *_) = scenarios_for(cfg)
    text = machinefile.dumps(sc.machine)
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)
    return EXIT_OK


def cmd_import(cfg: RunConfig) -> int:
    if cfg.machine_path is None:
        raise ConfigError("import needs --machine")
    m = machinefile.load(cfg.machine_path)
    K.initialize(m)
    if cfg.out is not None:
        cfg.out.write_text(machinefile.dumps(m))
    print(
        f"{m.name}: {len(m.variables)} variables, {len(m.events)} events, "
        f"{len(m.invariants)} invariants, systems {[s.id for s in m.systems]}"
    )
    return EXIT_OK


def cmd_list(_cfg=None) -> int:
    for name, text in commerce.REGISTRY.items():
        print(f"{name:6} {text}")
    print("mutants:")
    for name, text in commerce.MUTANTS.items():
        print(f"  {name:24} {text}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swapcheck", description="System substitution checker and simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mutate=True):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--scenario", help="registry scenario (m1, m11, m12, m13, m141, m142)")
        src.add_argument("--machine", help="machine-definition JSON file")
        sp.add_argument("--products", type=int, default=5, help="number of products (default 5)")
        sp.add_argument("--purchase", help="comma-separated purchase set P (default: all products)")
        sp.add_argument("--state-cap", type=int, default=None, help="state cap (env SUBST_STATE_CAP)")
        sp.add_argument("--out", help="output path")
        if mutate:
            sp.add_argument("--mutate", choices=sorted(commerce.MUTANTS))

    sp = sub.add_parser("check", help="run every proof obligation for a machine")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="run a seeded scenario and write its trace")
    common(sp)
    sp.add_argument("--policy", choices=[x.value for x in S.Policy])
    trig = sp.add_mutually_exclusive_group()
    trig.add_argument("--fail-at", type=int, help="fail the source after K events")
    trig.add_argument("--fail-when", help="JSON expression file; fail when it holds")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-steps", type=int, default=10_000)
    sp.add_argument("--driver", choices=["random", "first"], default="random")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("export", help="write a machine in the JSON format")
    common(sp)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("import", help="read and validate a JSON machine file")
    common(sp, mutate=False)
    sp.set_defaults(func=cmd_import)

    sp = sub.add_parser("list", help="list registry scenarios and mutants")
    sp.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "list":
        return cmd_list()
    try:
        cfg = _run_config(args)
        return args.func(cfg)
    except (ConfigError, FormatError, MachineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SwapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
