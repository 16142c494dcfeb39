import json
from pathlib import Path

import pytest

from groupteach.cli import main
from groupteach.config import StudyConfig, load_config, normalize_composition

ROOT = Path(__file__).resolve().parents[1]


def test_default_toml_matches_defaults():
    assert load_config(ROOT / "configs" / "default.toml") == StudyConfig()


def test_json_config_and_round_trip(tmp_path):
    cfg = StudyConfig(replicates=3, compositions=("N,N,P",), n_particles=120)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    got = load_config(path)
    assert got == cfg
    assert got.compositions == ("NNP",)


def test_bad_configs_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"particles": 10}))
    with pytest.raises(ValueError, match="particles"):
        load_config(path)
    with pytest.raises(ValueError):
        StudyConfig(strategies=("baseline", "random"))
    with pytest.raises(ValueError):
        StudyConfig(compositions=("NNX",))
    with pytest.raises(ValueError):
        StudyConfig(period_cap=0)


def test_normalize_composition():
    assert normalize_composition("[n, n, p]") == "NNP"
    assert normalize_composition(["P", "P", "P"]) == "PPP"


def test_session_command_writes_trace(tmp_path, capsys):
    trace = tmp_path / "trace.json"
    code = main(["session", "--config", str(ROOT / "configs" / "quick.toml"), "--strategy", "joint",
                 "--composition", "N,N,P", "--trace", str(trace)])
    assert code == 0
    out = capsys.readouterr().out
    assert "N_i=" in out and "period  1" in out
    rec = json.loads(trace.read_text())
    assert rec["composition"] == "NNP" and len(rec["snapshots"]) == rec["n_interactions"]


def test_simulate_command_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["simulate", "--config", str(ROOT / "configs" / "quick.toml"), "--out", str(out),
                 "--strategies", "joint", "--compositions", "PPP", "--replicates", "1"])
    assert code == 0
    assert (out / "study.csv").read_text().count("\n") == 2
    assert json.loads((out / "config.json").read_text())["strategies"] == ["joint"]
    assert (out / "sessions" / "joint_PPP_000.json").exists()


def test_cli_errors_exit_with_code_two(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--strategies", "random"]) == 2
    assert "unknown strategies" in capsys.readouterr().err
    assert main(["session", "--config", str(tmp_path / "missing.toml"), "--strategy", "joint",
                 "--composition", "NNN"]) == 2


def test_validate_command(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 11 and "FAIL" not in out
