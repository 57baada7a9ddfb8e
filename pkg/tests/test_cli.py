import json
import subprocess
import sys

import pytest

from kakutani import closed_forms as cf
from kakutani.cli import main


def test_simulate_json(capsys):
    assert main(["simulate", "--n", "1000", "--thresholds", "0.01,0.001", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["n"] == 1000 and 0 < d["m_n"] <= d["M_n"] < 0.01


def test_simulate_deterministic(capsys):
    main(["simulate", "--n", "500", "--seed", "3"])
    a = capsys.readouterr().out
    main(["simulate", "--n", "500", "--seed", "3"])
    assert capsys.readouterr().out == a


def test_thresholds(capsys):
    assert main(["thresholds", "--t", "0.5,0.1", "--samples", "2000", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["t=0.5"]["mu"] == 3.0
    assert main(["thresholds", "--t", "0.5"]) == 0


def test_moments(capsys):
    assert main(["moments", "--t", "0.75", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["table"][0]["v"] == pytest.approx(0.624164, abs=1e-6)
    assert d["constants"]["s0"] == cf.S0
    assert main(["moments", "--t", "-1"]) == 2


def test_embeddings(capsys):
    assert main(["embeddings", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert {"T_tau", "P_0x", "brw_leftmost", "brw_rightmost"} <= set(d)
    assert main(["embeddings", "--samples", "500"]) == 0
    assert main(["embeddings", "--x", "-1"]) == 2


def test_figure1_writes_files(tmp_path, capsys):
    assert main(["figure1", "--samples", "200", "--reps", "2", "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["figure1.csv", "figure1_left.json", "figure1_left.tsv",
                     "figure1_right.json", "figure1_right.tsv"]
    assert "slope" in capsys.readouterr().out


def test_verify_groups(capsys):
    assert main(["verify", "--groups", "constants,appendix", "--quick"]) == 0
    assert "[PASS] constants" in capsys.readouterr().out
    assert main(["verify", "--groups", "bogus"]) == 2


def test_usage_errors():
    assert main([]) == 2
    assert main(["simulate"]) == 2
    assert main(["simulate", "--n", "-5"]) == 2
    assert main(["simulate", "--n", "10", "--threads", "0"]) == 2
    assert main(["thresholds", "--t", "abc"]) == 2


def test_domain_error_exit_code(capsys):
    assert main(["thresholds", "--t", "0"]) == 2
    assert "error" in capsys.readouterr().err


def test_env_threads(monkeypatch):
    monkeypatch.setenv("KAKUTANI_THREADS", "bad")
    assert main(["moments"]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "kakutani", "moments", "--t", "0.5"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "sigma2" in out.stdout
