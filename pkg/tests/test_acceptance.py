"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are printed in the terminal summary (see conftest).
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_rotation
from test_robust_refine import contaminated, gradient_check
from kruppa.geometry import Intrinsics, dual_of
from kruppa.poly import vanishing_order
from kruppa.reconstruction import cheirality_count, decompose_essential
from kruppa.robust_refine import RansacConfig, ransac_pose
from kruppa.selfcal import focal_from_f
from kruppa.solvers import solve_7pt, solve_kruppa_5pt, solve_modern_5pt, solve_thm2
from kruppa.synth import SceneSpec, generate_scene
from kruppa.system import bezout_audit, build_context, intersect, solve_epipole_pairs
from kruppa.types import RelativePose, direction_angle, model_distance, rotation_angle


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


@pytest.fixture(scope="module")
def five_point_runs():
    """Both five-point solvers on 1000 seeded instances, solver time only."""
    runs = []
    t_classic = t_modern = 0.0
    for seed in range(1000):
        s = generate_scene(SceneSpec(seed=seed))
        c = s.correspondences
        t0 = time.perf_counter()
        a = solve_kruppa_5pt(c, s.iac1, s.iac2)
        t1 = time.perf_counter()
        b = solve_modern_5pt(c, s.k1, s.k2)
        t2 = time.perf_counter()
        t_classic += t1 - t0
        t_modern += t2 - t1
        runs.append((s, a, b))
    return runs, t_classic, t_modern


def test_criterion_01_solution_bound(five_point_runs):
    runs, tc, tm = five_point_runs
    worst = max(max(len(a), len(b)) for _, a, b in runs)
    over = sum(len(a) > 10 or len(b) > 10 for _, a, b in runs)
    ok = over == 0 and tc + tm < 60
    record(1, ok, f"max {worst} solutions, {over}/1000 over 10, solver time {tc:.1f} s + {tm:.1f} s")


def test_criterion_02_recovery(five_point_runs):
    runs, _, _ = five_point_runs
    hit_a = sum(min((m.distance(s.essential) for m in a), default=np.inf) < 1e-6 for s, a, _ in runs)
    hit_b = sum(min((m.distance(s.essential) for m in b), default=np.inf) < 1e-6 for s, _, b in runs)
    record(2, hit_a == hit_b == 1000, f"classic {hit_a}/1000, modern {hit_b}/1000 within 1e-6")


def test_criterion_03_cross_solver(five_point_runs):
    runs, _, _ = five_point_runs
    matched = 0
    for _, a, b in runs[:200]:
        same = len(a) == len(b) and all(min(m.distance(n) for n in b) < 1e-6 for m in a)
        same = same and all(min(n.distance(m) for m in a) < 1e-6 for n in b)
        matched += same
    record(3, matched == 200, f"{matched}/200 instances with matching solution sets")


@pytest.fixture(scope="module")
def contexts():
    """Sextic systems of 50 instances in the frames chosen by the solver."""
    out = []
    for seed in range(50):
        s = generate_scene(SceneSpec(seed=seed))
        c = s.correspondences
        sol = solve_epipole_pairs(c.x1, c.x2, s.iac1, s.iac2)
        f1, f2 = sol.frame1, sol.frame2
        out.append(build_context(f1, f2, dual_of(f1.iac_t), dual_of(f2.iac_t)))
    return out


def test_criterion_04_bezout(contexts):
    bad = []
    for n, ctx in enumerate(contexts):
        audit = bezout_audit(ctx, intersect(ctx))
        if not (audit.degree_a == audit.degree_b == 6 and audit.eliminant_roots == 36 and audit.total == 36):
            bad.append((n, audit.degree_a, audit.degree_b, audit.eliminant_roots, audit.total))
    record(4, not bad, f"{50 - len(bad)}/50 instances: degree 6, eliminant 36, spurious + solutions 36; failures {bad}")


def test_criterion_05_multiplicities(contexts):
    ea, eb, ec = np.eye(3)
    good = 0
    for ctx in contexts:
        a = ctx.a_n * (1 / ctx.a_n.norm())
        b = ctx.b_n * (1 / ctx.b_n.norm())
        oa = [vanishing_order(a, p, 1e-7) for p in (ea, eb, ec)]
        ob = [vanishing_order(b, p, 1e-7) for p in (ea, eb, ec)]
        good += oa == [3, 1, 1] and ob == [1, 3, 1]
    record(5, good == 50, f"{good}/50 instances with orders A 3/1/1 and B 1/3/1")


def test_criterion_06_twisted_pair():
    twisted_ok = unique_ok = 0
    for seed in range(1000):
        s = generate_scene(SceneSpec(seed=seed, n_points=8))
        cands = decompose_essential(s.essential)
        fa = s.k2.inv.T @ cands[0].essential @ s.k1.inv
        fb = s.k2.inv.T @ cands[2].essential @ s.k1.inv
        twisted_ok += len(cands) == 4 and model_distance(fa, fb) < 1e-9
        passing = [p for p in cands if cheirality_count(p, s.correspondences, s.k1, s.k2)[0] == 8]
        unique_ok += len(passing) == 1 and rotation_angle(passing[0].rotation, s.pose.rotation) < 1e-8
    record(6, twisted_ok == unique_ok == 1000,
           f"4 poses with equal twisted F {twisted_ok}/1000, unique valid pose {unique_ok}/1000")


def test_criterion_07_seven_point():
    over = hit = 0
    for seed in range(200):
        s = generate_scene(SceneSpec(seed=seed, n_points=7))
        models = solve_7pt(s.correspondences)
        over += not 1 <= len(models) <= 3
        hit += min(m.distance(s.fundamental) for m in models) < 1e-8
    record(7, over == 0 and hit == 200, f"{over}/200 outside 1..3 solutions, true F recovered {hit}/200")


def test_criterion_08_principal_point():
    k2 = Intrinsics.from_focal(650.0, (290.0, 262.0))
    per_branch = orientations = 0
    errs = []
    for seed in range(50):
        s = generate_scene(SceneSpec(seed=seed, n_points=7, intrinsics2=k2))
        sols = solve_thm2(s.correspondences, s.iac1, 650.0)
        branches = {}
        for sol in sols:
            branches.setdefault(id(sol.fundamental), []).append(sol)
        per_branch = max(per_branch, max(len(v) for v in branches.values()))
        orientations = max(orientations, 2 * len(sols))
        true = [x for x in sols if x.fundamental.distance(s.fundamental) < 1e-8]
        errs.append(min(np.linalg.norm(x.principal_point2 - k2.principal) for x in true))
    ok = per_branch <= 4 and orientations <= 24 and max(errs) < 1e-6
    record(8, ok, f"max {per_branch} per branch, max {orientations} orientations, principal point error {max(errs):.1e} px")


def test_criterion_09_focal():
    worst = 0.0
    for seed in range(100):
        focal = 400.0 + 10.0 * seed
        k = Intrinsics.from_focal(focal, (320.0, 240.0))
        s = generate_scene(SceneSpec(seed=seed, intrinsics1=k, intrinsics2=k))
        found = focal_from_f(s.fundamental, (320.0, 240.0), (320.0, 240.0))
        worst = max(worst, min(abs(f - focal) / focal for f in found))
    record(9, worst < 1e-6, f"worst relative focal error {worst:.1e} over 100 pairs")


def test_criterion_10_refinement_and_ransac():
    rng = np.random.default_rng(10)
    worst = 0.0
    for i in range(100):
        s = generate_scene(SceneSpec(seed=i, n_points=20, noise_sigma=0.5))
        pose = RelativePose(random_rotation(rng, 0.5), rng.normal(size=3))
        worst = max(worst, gradient_check(pose, s.correspondences, s.k1, s.k2))
    rot = trans = 0.0
    for seed in range(10):
        s, c, _ = contaminated(seed)
        res = ransac_pose(c, s.k1, s.k2, RansacConfig(seed=seed))
        rot = max(rot, np.degrees(rotation_angle(res.pose.rotation, s.pose.rotation)))
        trans = max(trans, np.degrees(direction_angle(res.pose.translation, s.pose.translation)))
    ok = worst < 1e-5 and rot < 0.1 and trans < 0.1
    record(10, ok, f"gradient relative error {worst:.1e} on 100 states; RANSAC 30% outliers: rotation {rot:.1e} deg, translation {trans:.1e} deg")


def cli(*args, cwd):
    p = subprocess.run([sys.executable, "-m", "kruppa.cli", *args], cwd=cwd, capture_output=True)
    return p.returncode, p.stdout


def test_criterion_11_determinism(tmp_path):
    outputs = []
    for run in range(2):
        d = tmp_path / f"run{run}"
        d.mkdir()
        results = [cli("synth", "--seed", "7", "--n", "5", "--out", "c5.jsonl", "--truth", "t.json", cwd=d)]
        results.append(cli("synth", "--seed", "7", "--n", "7", "--out", "c7.jsonl", cwd=d))
        results.append(cli("synth", "--seed", "7", "--n", "60", "--noise", "0.3", "--out", "c60.jsonl", cwd=d))
        for cmd, f in [("solve5pt-kruppa", "c5.jsonl"), ("solve5pt-modern", "c5.jsonl"), ("solve7pt", "c7.jsonl"),
                       ("thm2", "c7.jsonl"), ("selfcal", "c7.jsonl"), ("ransac", "c60.jsonl")]:
            results.append(cli(cmd, f, "--seed", "7", cwd=d) if cmd == "ransac" else cli(cmd, f, cwd=d))
        results.append(cli("bench", "--instances", "30", "--seed", "1", cwd=d))
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        outputs.append((results, files))
    (ra, fa), (rb, fb) = outputs
    codes = [r[0] for r in ra]
    ok = ra == rb and fa == fb and all(code == 0 for code in codes)
    record(11, ok, f"{len(ra)} CLI invocations and {len(fa)} files byte-identical across two runs, exit codes {codes}")
