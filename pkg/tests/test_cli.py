import json
import subprocess
import sys

import pytest

from percolab.cli import main


def _spec(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


def test_oracle_exact_fixtures(tmp_path, capsys):
    s = _spec(tmp_path, {"instance": {"kind": "one_arm", "R": 1}, "p": "1/2"})
    code, out = _run(capsys, ["oracle", "--spec", s])
    assert code == 0
    assert json.loads(out.out)["results"][0]["probability_exact"] == "15/16"
    s = _spec(tmp_path, {"instance": {"kind": "rect", "a": 2, "b": 1}, "p": ["1/2"]})
    code, out = _run(capsys, ["oracle", "--spec", s])
    assert json.loads(out.out)["results"][0]["probability_exact"] == "1/2"


def test_oracle_resource_limit(tmp_path, capsys):
    s = _spec(tmp_path, {"instance": {"kind": "all_open", "n_edges": 25}})
    code, out = _run(capsys, ["oracle", "--spec", s])
    assert code == 3 and "resource limit" in out.err


def test_usage_errors(tmp_path, capsys):
    assert _run(capsys, ["simulate", "--spec", str(tmp_path / "missing.json")])[0] == 2
    s = _spec(tmp_path, {"params": {"p": 0.5, "bogus": 1}})
    assert _run(capsys, ["verify", "ubb1", "--spec", s])[0] == 2
    assert _run(capsys, ["verify", "no-such-check", "--spec", s])[0] == 2
    s = _spec(tmp_path, {"model": {"model": "bernoulli", "p": 0.5}, "event": {"kind": "one_arm", "R": 2},
                         "n": 10, "extra": 1})
    assert _run(capsys, ["simulate", "--spec", s])[0] == 2
    assert _run(capsys, ["fit", str(tmp_path / "none.csv")])[0] == 2
    assert _run(capsys, ["simulate", "--spec", s, "--workers", "0"])[0] == 2


def test_simulate_then_fit(tmp_path, capsys):
    spec = {"model": {"model": "bernoulli", "p": 0.5}, "event": {"kind": "one_arm"}, "R": [2, 4, 8, 16],
            "n": 3000}
    s = _spec(tmp_path, spec)
    csv_path = tmp_path / "arm.csv"
    assert main(["simulate", "--spec", s, "--seed", "5", "--out", str(csv_path)]) == 0
    text = csv_path.read_text()
    assert text.startswith("# percolab simulate seed=5 spec_sha256=")
    assert len(text.strip().splitlines()) == 6
    # same seed, same bytes, whatever the worker count
    again = tmp_path / "arm2.csv"
    assert main(["simulate", "--spec", s, "--seed", "5", "--workers", "2", "--out", str(again)]) == 0
    assert again.read_bytes() == csv_path.read_bytes()
    capsys.readouterr()
    code, out = _run(capsys, ["fit", str(csv_path)])
    doc = json.loads(out.out)
    assert code == 0 and doc["n_points"] == 4 and 0 < doc["rate"] < 0.5 and doc["seeds"] == [5]


def test_seed_precedence(tmp_path, capsys, monkeypatch):
    spec = {"model": {"model": "bernoulli", "p": 0.5}, "event": {"kind": "one_arm", "R": 3}, "n": 50, "seed": 9}
    s = _spec(tmp_path, spec)
    _, out = _run(capsys, ["simulate", "--spec", s])
    assert "seed=9 " in out.out
    monkeypatch.setenv("PERCOLAB_SEED", "4")
    _, out = _run(capsys, ["simulate", "--spec", s])
    assert "seed=4 " in out.out
    _, out = _run(capsys, ["simulate", "--spec", s, "--seed", "1"])
    assert "seed=1 " in out.out


def test_verify_reports_verdict(tmp_path, capsys):
    s = _spec(tmp_path, {"params": {"p": 0.5, "q": 0.55, "R": 8, "n": 2000}})
    code, out = _run(capsys, ["verify", "ubb1", "--spec", s])
    doc = json.loads(out.out)
    assert code == 0 and doc["verdict"] is True and {"lhs", "rhs"} <= set(doc["terms"])
    s = _spec(tmp_path, {"params": {}})
    code, out = _run(capsys, ["verify", "pinsker", "--spec", s])
    assert code == 0


def test_revealments_with_bound(tmp_path, capsys):
    s = _spec(tmp_path, {"model": {"model": "bernoulli", "p": 0.5},
                         "algorithm": {"name": "interface", "R": 4}, "n": 1000, "bound": True})
    code, out = _run(capsys, ["revealments", "--spec", s])
    doc = json.loads(out.out)
    assert code == 0 and doc["bound"]["verdict"] and len(doc["rev"]) == 144


def test_console_script(tmp_path):
    s = _spec(tmp_path, {"instance": {"kind": "rect", "a": 3, "b": 2}, "p": "1/2"})
    r = subprocess.run([sys.executable, "-m", "percolab.cli", "oracle", "--spec", s],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert json.loads(r.stdout)["results"][0]["probability_exact"] == "1/2"
