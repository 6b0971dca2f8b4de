import json
import subprocess
import sys

import pytest

from clarkmodel.cli import build_parser, config_from_args, main


def test_sharp3_command(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sharp3_max_exponent": 10}))
    assert main(["counterexample", "sharp3", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("counterexample-sharp3: PASS")
    assert (tmp_path / "growth.csv").exists()


def test_verify_defaults_to_random_cases():
    args = build_parser().parse_args(["verify-hs-identity", "--seed", "3"])
    cfg = config_from_args(args)
    assert cfg.kind == "verify" and cfg.random_cases == 20 and cfg.seed == 3


def test_verify_alias(capsys):
    assert main(["verify-eq4", "--random-cases", "2"]) == 0
    assert "verify: PASS" in capsys.readouterr().out


def test_synthesize_default_target():
    cfg = config_from_args(build_parser().parse_args(["synthesize", "--tol", "1e-9"]))
    assert cfg.tol == 1e-9
    assert [a["multiplicity"] for a in cfg.target] == [2, 1]


def test_analyze_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"blocks": [{"atoms": [{"angle_over_pi": 1.0, "weight": 1.0}]}],
                               "t_grid": [1.0], "p_list": [1, 2, "inf"]}))
    assert main(["analyze", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.strip() == "analyze: PASS"


def test_kind_mismatch_is_an_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kind": "sweep"}))
    assert main(["analyze", "--config", str(cfg)]) == 2
    assert "does not match" in capsys.readouterr().err


def test_invalid_config_is_an_error(capsys):
    assert main(["analyze"]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["nope"])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "clarkmodel", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for name in ("analyze", "verify-hs-identity", "sweep", "counterexample", "synthesize"):
        assert name in out
