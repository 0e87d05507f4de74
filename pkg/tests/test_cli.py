import json

import pytest

from doubleraman.cli import main


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_averaging_check(tmp_path, capsys):
    assert main(["averaging-check", "--out", str(tmp_path), "--set", "averaging.amplitudes=0.1,0.2"]) == 0
    result = _stdout_json(capsys)
    assert result["command"] == "averaging-check"
    report = json.loads((tmp_path / "averaging.json").read_text())
    assert report["passed"] and report["config_hash"] == result["config_hash"]


def test_errors_are_reported_as_json(tmp_path, capsys):
    code = main(["sequence", "--out", str(tmp_path), "--set", "run.jobs=0"])
    assert code != 0
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError" and err["command"] == "sequence"


def test_bad_set_syntax(tmp_path, capsys):
    assert main(["optimize", "--out", str(tmp_path), "--set", "nonsense"]) == 1
    assert "SECTION.KEY=VALUE" in capsys.readouterr().err


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_seedless_efficiency_map(tmp_path, capsys):
    args = ["efficiency-map", "--out", str(tmp_path), "--seedless",
            "--set", "efficiency_map.durations_us=6,12", "--set", "efficiency_map.points_per_decade=4",
            "--set", "efficiency_map.widths=0.01,0.1,2"]
    assert main(args) == 0
    result = _stdout_json(capsys)
    files = set(result["files"])
    assert {"first_order_bs.csv", "first_order_bs.json", "first_order_bs.svg"} <= files
    csv_text = (tmp_path / "first_order_bs.csv").read_text()
    assert csv_text.startswith(f"# config_hash={result['config_hash']}")
    summary = json.loads((tmp_path / "first_order_bs.json").read_text())
    assert summary["config_hash"] == result["config_hash"]
    assert b"config_hash" in (tmp_path / "first_order_bs.svg").read_bytes()
