"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import functools
import itertools
import json
import time

from conftest import ACCEPTANCE_LINES

from swapcheck import commerce, machinefile
from swapcheck import expr as E
from swapcheck import kernel as K
from swapcheck import obligations as O
from swapcheck import substitution as S
from swapcheck.cli import main


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            verdict = "FAIL"
            try:
                fn(*args, **kwargs)
                verdict = "PASS"
            finally:
                took = time.perf_counter() - start
                line = f"[{verdict}] criterion {number}: {title} ({took:.1f}s)"
                ACCEPTANCE_LINES.append(line)
                print(line)

        return run

    return wrap


def subsets(items):
    return [frozenset(c) for r in range(len(items) + 1) for c in itertools.combinations(items, r)]


def pre_switch_states(m):
    for v in O.reachable(m):
        state = K.compound_state(m, v)
        if state.active == "Sys1" and S.driver_choices(m, state):
            yield state


@criterion(1, "obligation suite passes for every scenario at N=5 in under 60 s, state counts exact")
def test_obligation_suite(tmp_path):
    start = time.perf_counter()
    for name in commerce.REGISTRY:
        out = tmp_path / f"{name}.jsonl"
        assert main(["check", "--scenario", name, "--out", str(out)]) == 0, name
        assert all(json.loads(line)["verdict"] == "pass" for line in out.read_text().splitlines())
    elapsed = time.perf_counter() - start
    assert elapsed < 60, elapsed

    m11, _ = commerce.build_m11()
    m12, _ = commerce.build_m12()
    assert len({v["C1"] for v in O.reachable(m11)}) == 2 ** 5 == 32
    assert len({(v["C2a"], v["C2b"]) for v in O.reachable(m12)}) == 3 ** 5 == 243


@criterion(2, "refinement of M1 by M11 and M12 holds; gluing abstract = C2a fails with a replayable counterexample")
def test_refinement():
    for name in ("m11", "m12"):
        assert O.check_refinement(commerce.build(name).refinement).passed, name
    good = commerce.build("m12").refinement
    bad = O.RefinementLink(good.abstract, good.concrete, E.eq(E.var("cart"), E.var("C2a")), good.event_map)
    report = O.check_refinement(bad)
    assert not report.passed
    state, post = O.replay(bad.concrete, report.counterexample)
    assert post is not None


@criterion(3, "hot switch on m142 preserves no-loss, horizontal invariant, variant and disjointness from all 32 states")
def test_hot_switch_exhaustive():
    start = time.perf_counter()
    m, cfg = commerce.build_m142(policy="hot")
    checked = 0
    for state in pre_switch_states(m):
        new, rec = S.perform_switch(cfg, state)
        pre, post = state.valuation, new.valuation
        union = post["C2a"] | post["C2b"]
        assert pre["C1"] <= union
        assert post["C1"] == union
        assert rec.pre_variant == rec.post_variant
        assert K.variant_value(m, "Sys1", pre) == K.variant_value(m, "Sys2", post)
        assert not post["C2a"] & post["C2b"]
        assert O.violated_invariant(m, post) is None
        checked += 1
    assert checked == 32
    assert S.check_switch(cfg).passed
    assert time.perf_counter() - start < 10


@criterion(4, "cold switch resets Sys2 exactly; runs with fail-at 0..5 finish with the whole purchase selected")
def test_cold_switch():
    m, cfg = commerce.build_m141()
    init = m.init.restrict(cfg.target.sv)
    checked = 0
    for state in pre_switch_states(m):
        assert S.switch(cfg, state).valuation.restrict(cfg.target.sv) == init
        checked += 1
    assert checked == 32
    everything = set(commerce.products(5))
    for k in range(6):
        m, cfg = commerce.build_m141(trigger=S.AtStep(k))
        trace = S.run_scenario(m, cfg, seed=k)
        final = trace.final.valuation
        assert final["selection_done"] is True
        assert final["C2a"] | final["C2b"] == everything
        assert trace.switch_step is not None


@criterion(5, "each documented mutant flips its check to fail with a counterexample that replays")
def test_mutants():
    checks = {
        "drop-disjointness-guard": lambda mut: O.check_invariants(commerce.build_m12(mutate=mut)[0]),
        "non-decreasing-select": lambda mut: O.check_variant(commerce.build_m11(mutate=mut)[0], "Sys1"),
        "hinv-false": lambda mut: S.check_switch(commerce.build_m142(mutate=mut)[1]),
    }
    machines = {
        "drop-disjointness-guard": lambda: commerce.build_m12(mutate="drop-disjointness-guard")[0],
        "non-decreasing-select": lambda: commerce.build_m11(mutate="non-decreasing-select")[0],
        "hinv-false": lambda: commerce.build_m142(mutate="hinv-false")[0],
    }
    assert set(checks) == set(commerce.MUTANTS)
    for mutant, check in checks.items():
        assert check(None).passed, mutant
        report = check(mutant)
        assert not report.passed, mutant
        cx = report.counterexample
        state, post = O.replay(machines[mutant](), cx)
        assert state == cx.state
        if cx.event is not None:
            assert post == cx.post


def oracle_recovery(c1, universe, purchase):
    best = None
    for a in subsets(universe):
        for b in subsets(universe):
            if a & b or (a | b) != c1 or not (a | b) <= purchase:
                continue
            key = (tuple(p not in a for p in universe), tuple(p not in b for p in universe))
            if best is None or key < best[0]:
                best = (key, {"C2a": a, "C2b": b})
    return best[1]


@criterion(6, "recover_state equals the brute-force minimum on every source state for N <= 5")
def test_recover_state_oracle():
    inputs = 0
    for n in range(1, 6):
        universe = commerce.products(n)
        for purchase in subsets(universe):
            m, cfg = commerce.build_m142(n, purchase=purchase)
            for c1 in subsets(sorted(purchase)):
                for done in (False, True) if c1 == purchase else (False,):
                    current = m.init.update({"C1": c1, "selection_done": done})
                    assert S.recover_state(cfg, current) == oracle_recovery(c1, universe, purchase)
                    inputs += 1
    # every source state with C1 ⊆ P, plus the finished state per purchase set
    assert inputs == sum(3 ** n + 2 ** n for n in range(1, 6))


@criterion(7, "simulate is byte-identical for equal seeds; export/import is the identity")
def test_determinism(tmp_path):
    commands = [
        ["--scenario", "m1"],
        ["--scenario", "m11"],
        ["--scenario", "m12"],
        ["--scenario", "m13"],
        ["--scenario", "m141", "--fail-at", "2"],
        ["--scenario", "m142", "--policy", "hot", "--fail-at", "3"],
        ["--scenario", "m142", "--policy", "warm", "--fail-at", "1"],
    ]
    for i, argv in enumerate(commands):
        for seed in ("0", "1", str(2**64 - 1)):
            a, b = tmp_path / f"{i}-{seed}-a", tmp_path / f"{i}-{seed}-b"
            assert main(["simulate", *argv, "--seed", seed, "--out", str(a)]) == 0
            assert main(["simulate", *argv, "--seed", seed, "--out", str(b)]) == 0
            assert a.read_bytes() == b.read_bytes()
    for name in commerce.REGISTRY:
        exported, again = tmp_path / f"{name}.json", tmp_path / f"{name}-again.json"
        assert main(["export", "--scenario", name, "--out", str(exported)]) == 0
        assert main(["import", "--machine", str(exported), "--out", str(again)]) == 0
        assert exported.read_text() == again.read_text()
        assert machinefile.load(exported) == commerce.build(name).machine
