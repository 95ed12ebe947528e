import csv
import io
import json
import subprocess
import sys

import pytest

from cutofflab.cli import load_config, run
from cutofflab.errors import ConfigError

SWEEP = ["sweep", "--family", "ou", "--rho", "1", "--c", "1", "--dims", "100,10000", "--eps", "0.2",
         "--kinds", "w2,tv"]


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_sweep_example(tmp_path):
    assert run(SWEEP + ["--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "profile.csv")
    assert len(rows) == 8
    assert {r["epsilon"] for r in rows} == {"-0.2", "0.2"}
    assert (tmp_path / "profile.svg").exists()
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert set(man["outputs"]) == {"profile.csv", "profile.svg"}
    assert man["seed"] == 0 and man["command"] == "sweep"


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(SWEEP + ["--out", str(a), "--svg", "off", "--threads", "1"]) == 0
    assert run(SWEEP + ["--out", str(b), "--svg", "off", "--threads", "2"]) == 0
    assert (a / "profile.csv").read_bytes() == (b / "profile.csv").read_bytes()
    ma, mb = (json.loads((p / "manifest.json").read_text()) for p in (a, b))
    assert ma["outputs"] == mb["outputs"] and ma["config_digest"] == mb["config_digest"]
    assert not (a / "profile.svg").exists()


def test_unknown_flag_exits_2(capsys):
    assert run(["sweep", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run([]) == 2
    assert run(["sweep", "--family", "banana"]) == 2


def test_config_precedence_and_env_seed(tmp_path, monkeypatch):
    cfg = tmp_path / "run.ini"
    cfg.write_text("family = ou\nd = 3\nparticles = 50\nt = 0.1\nseed = 5\n")
    assert load_config(cfg)["d"] == 3
    out = tmp_path / "o1"
    assert run(["simulate", "--config", str(cfg), "--seed", "9", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 9 and man["config"]["d"] == 3
    cfg.write_text("family = ou\nd = 3\nparticles = 50\nt = 0.1\n")
    monkeypatch.setenv("CUTOFFLAB_SEED", "17")
    out2 = tmp_path / "o2"
    assert run(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
    assert json.loads((out2 / "manifest.json").read_text())["seed"] == 17
    cfg.write_text("colour = red\n")
    with pytest.raises(ConfigError):
        load_config(cfg)
    assert run(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o3")]) == 2


def test_subcommands(tmp_path):
    assert run(["sample-stationary", "--family", "dyson", "--d", "4", "--particles", "100",
                "--out", str(tmp_path / "s")]) == 0
    assert len(_rows(tmp_path / "s" / "samples.csv")) == 100
    assert run(["bounds", "--family", "ou", "--d", "10", "--eta", "0.25", "--out", str(tmp_path / "b")]) == 0
    rows = _rows(tmp_path / "b" / "sandwich.csv")
    assert all("upper" not in r["violated_flags"] for r in rows)
    assert json.loads((tmp_path / "b" / "mixing_time.json").read_text())["value"] > 0
    assert run(["factorize", "--family", "quadratic", "--d", "6", "--particles", "10000",
                "--out", str(tmp_path / "f")]) == 0
    assert run(["factorize", "--family", "quadratic", "--d", "6", "--particles", "100",
                "--out", str(tmp_path / "f2")]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cutofflab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "cutofflab" in res.stdout


@pytest.mark.slow
def test_verify_fast_exit_code(tmp_path):
    # the suite includes criteria that do not hold at the stated thresholds; see the README
    res = subprocess.run([sys.executable, "-m", "cutofflab", "verify", "--fast", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    report = json.loads((tmp_path / "verify.json").read_text())
    assert res.returncode == (0 if report["passed"] else 1)
    assert res.returncode == 0, res.stdout
