import csv
import io
import json
from pathlib import Path

import pytest

from resistnet.cli import main

DATA = Path(__file__).resolve().parent.parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", DATA / "k3.net")
    assert code == 0
    assert all(r["passed"] == "true" for r in rows(out))
    code, out, _ = run(capsys, "validate", DATA / "disconnected.net")
    assert code == 1
    assert any(r["invariant"] == "connected" and r["passed"] == "false" for r in rows(out))


def test_resistance_csv_and_json(capsys):
    code, out, err = run(capsys, "resistance", DATA / "k3.net", "--pairs", "a,b")
    assert code == 0
    (row,) = rows(out)
    assert float(row["resistance"]) == pytest.approx(2 / 3, rel=1e-11)
    assert err.startswith("manifest: ")
    code, out, _ = run(capsys, "resistance", "path:3", "--pairs", "0,2", "--json", "--report")
    obj = json.loads(out)
    assert code == 0 and len(obj["rows"]) >= 1


def test_full_precision(capsys):
    _, out, _ = run(capsys, "resistance", DATA / "k3.net", "--pairs", "a,b", "--full-precision")
    assert rows(out)[0]["resistance"] == "0.66666666666666663"


def test_limits_exit_codes(capsys):
    code, out, _ = run(capsys, "limits", "geometric-z:2", "0", "1", "--metric", "free", "--radii", "1..30")
    assert code == 0
    assert "0.5" in out
    code, _, _ = run(capsys, "limits", "geometric-z:2", "0", "1", "--radii", "1..3")
    assert code == 2


def test_reduce(capsys):
    code, out, _ = run(capsys, "reduce", DATA / "fig1.net", "--keep", "x,y")
    assert code == 0
    assert "x y 1" in out
    code, out, _ = run(capsys, "reduce", DATA / "p3.net", "--transform", "series:1")
    assert code == 0


def test_walk_is_reproducible(capsys, tmp_path):
    manifest = tmp_path / "m.json"
    args = ["walk", DATA / "p3.net", "escape", "0", "2", "--seed", "7", "--episodes", "5000"]
    code, first, _ = run(capsys, *args, "--manifest", manifest)
    assert code == 0
    code, again, _ = run(capsys, "replay", manifest)
    assert code == 0 and again == first
    _, threaded, _ = run(capsys, *args, "--threads", "3")
    assert threaded == first


def test_walk_exact_tasks(capsys):
    code, out, _ = run(capsys, "walk", DATA / "k3.net", "path-integral", "a", "b", "--episodes", "2000")
    assert code == 0
    code, out, _ = run(capsys, "walk", "geometric-z:2", "wired-identity", "1", "--radii", "1..10")
    assert code == 0


def test_embed(capsys, tmp_path):
    target = tmp_path / "coords.csv"
    code, out, _ = run(capsys, "embed", DATA / "k3.net", "--out", target)
    assert code == 0 and target.read_text().startswith("vertex,")
    code, out, _ = run(capsys, "embed", "geometric-z:2", "--metric", "wired", "--radii", "3..12")
    assert code in (0, 2)


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", DATA / "k3.net", "--pairs", "a,b")
    assert code == 0 and rows(out)


def test_usage_errors(capsys):
    assert run(capsys, "resistance")[0] == 64
    assert run(capsys, "resistance", "missing/file.net")[0] == 64
    assert run(capsys, "resistance", DATA / "k3.net", "--pairs", "a")[0] == 64
    assert run(capsys, "replay", "/nonexistent.json")[0] == 64
    assert run(capsys, "frobnicate")[0] == 64
