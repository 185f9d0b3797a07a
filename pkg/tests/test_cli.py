import json
import subprocess
import sys

from priority_sim.cli import main
from priority_sim.config import RunConfig
from priority_sim.poset import PosetSpec


def test_scenarios_verb(capsys):
    assert main(["scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("single-N", "single-R", "section25", "fake-elder", "antichain-minimal"):
        assert name in out


def test_run_writes_trace_and_audit_reloads(tmp_path, capsys):
    out = tmp_path / "n.jsonl"
    assert main(["run", "--scenario", "single-N", "--out", str(out)]) == 0
    first = capsys.readouterr().out
    assert '"status":"pass"' in first
    assert main(["audit", str(out), "--summary"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all(json.loads(line)["status"] == "pass" for line in lines)


def test_report_single_n(capsys):
    assert main(["report", "--scenario", "single-N"]) == 0
    out = capsys.readouterr().out
    assert "N(0,p): satisfied (diagonalized at stage 5)" in out
    assert "L=1: s since stage 5 (stable)" in out


def test_report_fix_disabled_surfaces_failure(capsys):
    assert main(["report", "--scenario", "section25", "--disable-use-lifting"]) == 1
    out = capsys.readouterr().out
    head = out.split("requirements")[0]
    assert "FAILURES" in head and "checkUseDominance" in head


def test_config_file_and_stage_override(tmp_path, capsys):
    cfg = RunConfig(PosetSpec.build(["p"], partition0=["p"]), 3, [])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_json()))
    assert main(["report", "--config", str(path), "--stages", "7"]) == 0
    out = capsys.readouterr().out
    assert "stages 1..7, audits PASS" in out


def test_bad_config_lists_errors(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"poset": {"elements": ["p"], "partition0": ["p"]}, "stages": 5,
                                "roster": [{"req": "R", "e": 0, "p": "p", "script": {"name": "x"}}]}))
    assert main(["run", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "partition1" in err and "unknown script" in err
    assert main(["run"]) == 2
    assert main(["run", "--scenario", "nope"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "priority_sim", "scenarios"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "single-R" in proc.stdout
