import json
import subprocess
import sys

import pytest

from helpers import SCENARIOS
from sagaqnet.cli import EXIT_DIAG, EXIT_OK, EXIT_RUNTIME, main

PURIFY_LINE = str(SCENARIOS / "purify_line.scn")
PRESHARED_LINE = str(SCENARIOS / "preshared_line.scn")


def test_run_purify_line(tmp_path, capsys):
    trace, metrics = tmp_path / "t.txt", tmp_path / "m.txt"
    assert main(["run", "--scenario", PURIFY_LINE, "--seed", "1", "--trace", str(trace),
                 "--metrics", str(metrics)]) == EXIT_OK
    lines = trace.read_text().splitlines()
    assert lines and all(ln.startswith("t=") for ln in lines)
    assert "metric=objectives.completed value=1" in metrics.read_text()
    assert capsys.readouterr().out == ""


def test_run_to_stdout(capsys):
    assert main(["run", "--scenario", PURIFY_LINE, "--seed", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("t=0.0 node=1 kind=ObjectiveSubmit")
    assert "metric=messages.total" in out


def test_seed_from_environment(monkeypatch, capsys):
    main(["run", "--scenario", PURIFY_LINE, "--seed", "4"])
    explicit = capsys.readouterr().out
    monkeypatch.setenv("SAGAQNET_SEED", "4")
    main(["run", "--scenario", PURIFY_LINE])
    assert capsys.readouterr().out == explicit


def test_bad_seed_env(monkeypatch):
    monkeypatch.setenv("SAGAQNET_SEED", "-1")
    assert main(["run", "--scenario", PURIFY_LINE]) == EXIT_DIAG


@pytest.mark.parametrize("seed", ["-1", str(2**64), "x"])
def test_seed_must_be_u64(seed):
    with pytest.raises(SystemExit):
        main(["run", "--scenario", PURIFY_LINE, "--seed", seed])


def test_mode_override_changes_messages(capsys):
    main(["run", "--scenario", PURIFY_LINE, "--seed", "1", "--mode", "choreography"])
    out = capsys.readouterr().out
    assert "kind=TaskStart" not in out and "mode=choreography" in out


def test_plan_preshared_line(capsys):
    assert main(["plan", "--scenario", PRESHARED_LINE, "--objective", "bell15"]) == EXIT_OK
    out = capsys.readouterr().out
    kinds = [ln.split()[1].split("(")[0] for ln in out.splitlines() if ln.startswith("  t")]
    assert kinds == ["Purify", "Purify", "Swap"]
    assert "Midpoint" not in out


def test_plan_is_stable(capsys):
    main(["plan", "--scenario", PURIFY_LINE, "--objective", "bell15", "--json"])
    a = capsys.readouterr().out
    main(["plan", "--scenario", PURIFY_LINE, "--objective", "bell15", "--json"])
    assert capsys.readouterr().out == a
    assert [t["kind"] for t in json.loads(a)["tasks"]].count("Midpoint") == 4


def test_plan_unknown_objective():
    assert main(["plan", "--scenario", PURIFY_LINE, "--objective", "nope"]) == EXIT_DIAG


def test_plan_failure_is_runtime(tmp_path):
    bad = tmp_path / "x.scn"
    bad.write_text((SCENARIOS / "purify_line.scn").read_text().replace("min_fidelity=0.9", "min_fidelity=0.999"))
    assert main(["plan", "--scenario", str(bad), "--objective", "bell15"]) == EXIT_RUNTIME


def test_validate(capsys):
    assert main(["validate", "--scenario", PRESHARED_LINE]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_validate_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("[nodes]\nid=1\n[objectives]\nid=o kind=EstablishBell targets=1,9\n")
    assert main(["validate", "--scenario", str(bad)]) == EXIT_DIAG
    assert f"{bad}:4:" in capsys.readouterr().err


def test_missing_file():
    assert main(["validate", "--scenario", "/nonexistent.scn"]) == EXIT_DIAG


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "sagaqnet", "validate", "--scenario", PURIFY_LINE],
                       capture_output=True, text=True)
    assert p.returncode == 0
