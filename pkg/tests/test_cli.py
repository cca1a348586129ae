import json

import numpy as np
import pytest

from kruppa import fileio
from kruppa.cli import run
from kruppa.geometry import Intrinsics
from kruppa.synth import SceneSpec, generate_scene
from kruppa.types import Correspondences, direction_angle, model_distance, rotation_angle


def synth(tmp_path, seed=7, n=5, name="c.jsonl", extra=()):
    out, truth = tmp_path / name, tmp_path / (name + ".truth.json")
    assert run(["synth", "--seed", str(seed), "--n", str(n), "--out", str(out), "--truth", str(truth), *extra]) == 0
    return out, json.loads(truth.read_text())


def pose_error(rec, truth):
    r = np.array(rec["rotation"]).reshape(3, 3)
    t = np.array(rec["translation"])
    tr = np.array(truth["pose"]["rotation"]).reshape(3, 3)
    tt = np.array(truth["pose"]["translation"])
    return max(rotation_angle(r, tr), direction_angle(t, tt))


@pytest.mark.parametrize("cmd", ["solve5pt-kruppa", "solve5pt-modern"])
def test_synth_then_five_point(tmp_path, cmd):
    c, truth = synth(tmp_path)
    out = tmp_path / "r.json"
    assert run([cmd, str(c), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["count"] == len(doc["models"]) <= 10
    e = np.array(truth["essential"]).reshape(3, 3)
    assert min(model_distance(np.array(m["matrix"]).reshape(3, 3), e) for m in doc["models"]) < 1e-6
    assert min(pose_error(m["pose"], truth) for m in doc["models"] if "pose" in m) < 1e-8
    residuals = [m["residual"] for m in doc["models"]]
    assert residuals == sorted(residuals)


def test_synth_matches_generator(tmp_path):
    c, truth = synth(tmp_path, seed=3, n=6)
    s = generate_scene(SceneSpec(seed=3, n_points=6))
    back = fileio.read_correspondences(c)
    assert np.array_equal(back.x1, s.correspondences.x1)
    assert np.allclose(np.array(truth["points3d"]), s.points3d, rtol=0, atol=0)


def test_solve7pt_and_arity(tmp_path, capsys):
    c7, truth = synth(tmp_path, n=7)
    out = tmp_path / "r.json"
    assert run(["solve7pt", str(c7), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert 1 <= doc["count"] <= 3
    f = np.array(truth["fundamental"]).reshape(3, 3)
    assert min(model_distance(np.array(m["matrix"]).reshape(3, 3), f) for m in doc["models"]) < 1e-8
    c6, _ = synth(tmp_path, n=6, name="six.jsonl")
    capsys.readouterr()
    assert run(["solve7pt", str(c6)]) == 2
    err = capsys.readouterr().err
    assert "exactly 7" in err and "got 6" in err


def test_five_point_arity(tmp_path, capsys):
    c, _ = synth(tmp_path, n=6)
    capsys.readouterr()
    assert run(["solve5pt-kruppa", str(c)]) == 2
    assert "exactly 5" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert run(["solve7pt", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run([]) == 2
    assert run(["synth", "--focal", "-3"]) == 2
    assert run(["solve7pt", str(tmp_path / "missing.jsonl")]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"x1": 1, "y1": 2, "x2": 3, "y2": 4}\n{"x1": NaN, "y1": 2, "x2": 3, "y2": 4}\n')
    capsys.readouterr()
    assert run(["solve7pt", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_no_solution_exit(tmp_path):
    # pure translation of the essential configuration: the focal length is
    # unconstrained for every seven-point model, so no focal is reported
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(-1, 1, 7), rng.uniform(-1, 1, 7), rng.uniform(4, 8, 7)])
    k = Intrinsics.from_focal(800.0, (320.0, 240.0))
    x1 = X @ k.k.T
    x2 = (X - [0.3, 0.1, 0.2]) @ k.k.T
    c = Correspondences(x1[:, :2] / x1[:, 2:], x2[:, :2] / x2[:, 2:])
    p = tmp_path / "t.jsonl"
    fileio.write_correspondences(p, c)
    out = tmp_path / "r.json"
    assert run(["selfcal", str(p), "--out", str(out)]) == 1
    assert json.loads(out.read_text())["count"] == 0


def test_selfcal_recovers_focal(tmp_path):
    c, _ = synth(tmp_path, seed=5, n=7, extra=("--focal", "640"))
    out = tmp_path / "r.json"
    assert run(["selfcal", str(c), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    focals = [f for m in doc["models"] if isinstance(m["focal"], list) for f in m["focal"]]
    assert min(abs(f - 640) / 640 for f in focals) < 1e-6


def test_thm2(tmp_path):
    c, truth = synth(tmp_path, seed=2, n=7)
    out = tmp_path / "r.json"
    assert run(["thm2", str(c), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["orientations"] == 2 * doc["count"] <= 24
    pp = [np.array(s["principal_point2"]) for s in doc["solutions"]]
    assert min(np.linalg.norm(p - [320, 240]) for p in pp) < 1e-6


def test_ransac_cli(tmp_path):
    c, truth = synth(tmp_path, seed=4, n=60)
    out = tmp_path / "r.json"
    assert run(["ransac", str(c), "--seed", "3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["inlier_count"] == 60
    assert pose_error(doc["model"]["pose"], truth) < 1e-6


def test_bench_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["bench", "--instances", "20", "--seed", "1", "--out", str(a)]) == 0
    assert run(["bench", "--instances", "20", "--seed", "1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "kruppa-classic,20,20" in text and "modern-5pt,20,20" in text
    assert "ms/instance" in capsys.readouterr().err
    assert run(["bench", "--instances", "0"]) == 2


def test_stdin_and_stdout(tmp_path, monkeypatch, capsys):
    import io

    c, _ = synth(tmp_path)
    monkeypatch.setattr("sys.stdin", io.StringIO(c.read_text()))
    capsys.readouterr()
    assert run(["solve5pt-modern", "-"]) == 0
    assert json.loads(capsys.readouterr().out)["command"] == "solve5pt-modern"
