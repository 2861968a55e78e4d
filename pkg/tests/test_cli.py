import json
import subprocess
import sys

import pytest

from msscatter import cli

QUICK = """
[times]
profile_times = [4.0]
remainder_samples = 9

[outputs]
formats = ["csv", "json", "msfld"]
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict({"grid": {"points": 32}})
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict({"solvers": {}})
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict({"data": {"magnetic": {"width": 1.0}}})
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict({"suites": {"checks": ["nonsense"]}})
    assert cli.main(["profile", "--config", str(write(tmp_path, "[grid]\npoints = 3\n"))]) == 2


def test_bad_values_are_rejected():
    for bad in ({"times": {"T": 8.0, "t0": 4.0}}, {"budget": {"C": [1.0] * 6}}, {"budget": {"mode": "guess"}},
                {"data": {"magnetic": {"family": "plasma"}}}, {"grid": {"n": 31}}):
        with pytest.raises(cli.ConfigError):
            cli.RunConfig.from_dict(bad)


def test_toml_round_trip():
    cfg = cli.RunConfig.from_toml(QUICK)
    back = cli.RunConfig.from_toml(cfg.to_toml())
    assert back.values == cfg.values
    assert back.digest() == cfg.digest()
    assert cli.RunConfig().digest() != cfg.digest()


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "demos" / "configs"
    names = sorted(p.name for p in root.glob("*.toml"))
    assert names
    for p in root.glob("*.toml"):
        cli.RunConfig.load(p)


def test_empty_suites_exit_zero(tmp_path):
    cfg = write(tmp_path, '[suites]\nenabled = []\n')
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["assertions"] == [] and m["passed"] and m["stages"] == []


def test_runs_are_deterministic(tmp_path):
    cfg = write(tmp_path, QUICK)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cli.main(["run", "--config", str(cfg), "--out", str(out), "--suite", "profile,remainder", "--seed", "3"])
        outs.append(out)
    a, b = (json.loads((o / "manifest.json").read_text()) for o in outs)
    for m in (a, b):
        m.pop("wall_clock")
    assert a == b
    assert a["seed"] == 3 and a["stages"] == ["profile", "remainder"]
    assert (outs[0] / "remainder_traces.csv").read_bytes() == (outs[1] / "remainder_traces.csv").read_bytes()
    assert "profile_w_plus.msfld" in a["files"]
    assert (outs[0] / "profile_w_plus.msfld").read_bytes()[:6] == b"MSFLD1"


def test_suite_selects_check_groups(tmp_path, capsys):
    code = cli.main(["check", "--suite", "hartree", "--out", str(tmp_path), "--seed", "1"])
    assert code == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert {a["stage"] for a in m["assertions"]} == {"check:hartree"}
    assert "PASS" in capsys.readouterr().out
    assert cli.main(["check", "--suite", "bogus", "--out", str(tmp_path)]) == 2


def test_failed_assertion_exits_one(tmp_path):
    cfg = write(tmp_path, "[budget]\nc3 = 1.5\n")
    assert cli.main(["budget", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    b = json.loads((tmp_path / "o" / "budget.json").read_text())
    assert b["feasible"] is False


def test_budget_stage_reports_norms(tmp_path):
    assert cli.main(["budget", "--out", str(tmp_path)]) == 0
    b = json.loads((tmp_path / "budget.json").read_text())
    assert b["feasible"] and set(b["N"]) == {str(i) for i in range(7)}
    assert b["T_min"] >= 1


def test_stage_error_exits_three(tmp_path):
    # the taper must fit inside the xi-box half-width 1.5 after one dilation step
    cfg = write(tmp_path, "[times]\nT = 4.0\nt0 = 8.0\n[solver]\nwindow = [1.1, 1.45]\n")
    assert cli.main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["error"].startswith("solve:") and not m["passed"]


def test_short_run_fails_the_energy_fit(tmp_path):
    # half a decade is too short for the energy decay fit: a failed assertion, not a crash
    cfg = write(tmp_path, "[times]\nT = 4.0\nt0 = 8.0\nratio = 1.0905077326652577\n")
    assert cli.main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    bad = [a["name"] for a in m["assertions"] if not a["passed"]]
    assert "energy trace slope" in bad and m["error"] is None


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, '[suites]\nenabled = []\n')
    r = subprocess.run([sys.executable, "-m", "msscatter", "run", "--config", str(cfg), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "0/0 assertions passed" in r.stdout
