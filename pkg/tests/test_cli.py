import json
import subprocess
from pathlib import Path

import pytest

from mtdlms.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main

DATA = Path(__file__).parent / "data"


def test_golden_single_step(tmp_path):
    out = tmp_path / "g"
    assert main(["validate", "--runs", "1", "--horizon", "1", "--seed", "42", "--out", str(out),
                 "--no-plots"]) == EXIT_OK
    for name in ("curves.csv", "summary.csv"):
        assert (out / name).read_bytes() == (DATA / "golden_validate" / name).read_bytes()


@pytest.mark.parametrize("cmd", ["validate", "flow", "poisson", "sweep"])
def test_reruns_are_byte_identical(tmp_path, cmd):
    args = {"validate": ["--runs", "3", "--horizon", "300"],
            "flow": ["--runs", "2", "--horizon", "400"],
            "poisson": ["--runs", "2", "--horizon", "200"],
            "sweep": []}[cmd]
    for d in ("a", "b"):
        assert main([cmd, *args, "--seed", "9", "--out", str(tmp_path / d)]) == EXIT_OK
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_config_file(tmp_path):
    cfg = {"experiment": "validate", "scenario": {"kind": "validation", "seed": 2, "sigma": 0.5},
           "algorithms": ["cpc"], "mu": 0.02, "runs": 2, "horizon": 50}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    assert main(["validate", "--config", str(p), "--out", str(tmp_path / "o"),
                 "--no-plots"]) == EXIT_OK
    text = (tmp_path / "o" / "curves.csv").read_text()
    assert "diffusion-cpc|w_star|theory" in text and "simulation:2" in text


@pytest.mark.parametrize("argv", [
    ["validate", "--runs", "0"],
    ["validate", "--algo", "bogus"],
    ["validate", "--seed", "-1"],
    ["validate", "--mu", "-0.1"],
    ["validate", "--config", "/nonexistent/cfg.json"],
    ["frobnicate"],
    ["validate", "--runs", "many"],
])
def test_configuration_errors_exit_2(tmp_path, argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main([*argv, "--out", str(tmp_path / "o")])
        raise SystemExit(code)
    assert exc.value.code == EXIT_CONFIG


def test_unknown_config_field(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"runz": 3}))
    assert main(["validate", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_divergence_exits_3(tmp_path):
    assert main(["validate", "--algo", "apc", "--mu", "5", "--runs", "1", "--horizon", "3000",
                 "--out", str(tmp_path / "o"), "--no-plots"]) == EXIT_DIVERGED


def test_console_script(tmp_path):
    r = subprocess.run(["simctl", "validate", "--runs", "1", "--horizon", "1", "--seed", "42",
                        "--out", str(tmp_path / "o"), "--no-plots"], capture_output=True)
    assert r.returncode == 0
    assert (tmp_path / "o" / "curves.csv").read_bytes() == \
        (DATA / "golden_validate" / "curves.csv").read_bytes()
    r = subprocess.run(["simctl", "validate", "--runs", "0"], capture_output=True, text=True)
    assert r.returncode == 2 and "configuration error" in r.stderr
