import json
import subprocess
import sys

import pytest

from swapcheck import machinefile
from swapcheck.cli import main


def run(*argv):
    return main(list(argv))


@pytest.mark.parametrize("name", ["m1", "m11", "m12"])
def test_check_passes(name, tmp_path):
    out = tmp_path / "reports.jsonl"
    assert run("check", "--scenario", name, "--out", str(out)) == 0
    reports = [json.loads(line) for line in out.read_text().splitlines()]
    assert reports and all(r["verdict"] == "pass" for r in reports)


def test_check_reports_counterexample(tmp_path):
    out = tmp_path / "reports.jsonl"
    assert run("check", "--scenario", "m12", "--mutate", "drop-disjointness-guard", "--out", str(out)) == 1
    failed = [json.loads(line) for line in out.read_text().splitlines() if '"fail"' in line]
    assert failed[0]["counterexample"]["path"]


def test_unknown_scenario_and_bad_flags():
    assert run("check", "--scenario", "nosuch") == 2
    assert run("check") == 2
    assert run("simulate", "--scenario", "m11", "--fail-at", "2") == 2
    assert run("simulate", "--scenario", "m142", "--seed", str(2**64)) == 2
    assert run("check", "--scenario", "m11", "--products", "0") == 2
    assert run("check", "--machine", "/nonexistent/machine.json") == 2


def test_bad_choice_exits_through_argparse():
    with pytest.raises(SystemExit) as info:
        run("check", "--scenario", "m12", "--mutate", "bogus")
    assert info.value.code == 2


def test_state_cap_flag_and_environment(monkeypatch, tmp_path):
    assert run("check", "--scenario", "m12", "--state-cap", "10", "--out", str(tmp_path / "a")) == 1
    monkeypatch.setenv("SUBST_STATE_CAP", "10")
    assert run("check", "--scenario", "m12", "--out", str(tmp_path / "b")) == 1
    assert run("check", "--scenario", "m12", "--state-cap", "1000", "--out", str(tmp_path / "c")) == 0


def test_simulate_hot(tmp_path, capsys):
    out = tmp_path / "trace.jsonl"
    code = run("simulate", "--scenario", "m142", "--policy", "hot", "--fail-at", "3", "--seed", "1", "--out", str(out))
    assert code == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    sw = [r for r in records if r.get("event") == "switch"]
    assert len(sw) == 1 and sw[0]["switch"]["pre_variant"] == sw[0]["switch"]["post_variant"]
    assert records[-1]["valuation"]["selection_done"] is True
    assert "safety: ok" in capsys.readouterr().out


def test_simulate_unrecoverable():
    assert run("simulate", "--scenario", "m142", "--mutate", "hinv-false", "--fail-at", "1") == 1


def test_simulate_max_steps(tmp_path):
    out = tmp_path / "t.jsonl"
    assert run("simulate", "--scenario", "m11", "--max-steps", "2", "--out", str(out)) == 1
    assert len(out.read_text().splitlines()) == 3


def test_fail_when(tmp_path):
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps({"op": "eq", "args": [{"op": "card", "arg": {"var": "C1"}}, {"nat": 2}]}))
    out = tmp_path / "trace.jsonl"
    assert run("simulate", "--scenario", "m142", "--fail-when", str(pred), "--out", str(out)) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    (sw,) = [r for r in records if r.get("event") == "switch"]
    assert len(sw["valuation"]["C1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"op": "eq", "args": [{"var": "C2a"}, {"atoms": []}]}))
    assert run("simulate", "--scenario", "m142", "--fail-when", str(bad)) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ("--scenario", "m11"),
        ("--scenario", "m142", "--policy", "warm", "--fail-at", "2"),
        ("--scenario", "m141", "--fail-at", "4", "--products", "3"),
    ],
)
def test_simulate_is_deterministic(tmp_path, argv):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("simulate", *argv, "--seed", "42", "--out", str(a)) == 0
    assert run("simulate", *argv, "--seed", "42", "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_export_import_round_trip(tmp_path, capsys):
    exported = tmp_path / "m142.json"
    again = tmp_path / "again.json"
    assert run("export", "--scenario", "m142", "--out", str(exported)) == 0
    assert run("import", "--machine", str(exported), "--out", str(again)) == 0
    assert exported.read_text() == again.read_text()
    assert "M142" in capsys.readouterr().out
    assert run("check", "--machine", str(exported), "--out", str(tmp_path / "r.jsonl")) == 0


def test_import_rejects_unknown_field(tmp_path):
    exported = tmp_path / "m11.json"
    assert run("export", "--scenario", "m11", "--out", str(exported)) == 0
    data = json.loads(exported.read_text())
    data["events"][0]["weight"] = 3
    exported.write_text(json.dumps(data))
    assert run("import", "--machine", str(exported)) == 2


def test_list(capsys):
    assert run("list") == 0
    out = capsys.readouterr().out
    assert "m142" in out and "hinv-false" in out


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "swapcheck", "check", "--scenario", "m11"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert all(json.loads(line)["verdict"] == "pass" for line in proc.stdout.splitlines())
