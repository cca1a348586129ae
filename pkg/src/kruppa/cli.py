"""Command line front end.

Exit status: 0 success, 1 when a solver finds no solution, 2 for usage or
input errors.
"""
from __future__ import annotations

import argparse
import sys
import time
from collections import Counter

import numpy as np

from . import fileio
from .errors import (
    DegenerateConfigurationError,
    EstimationFailure,
    GeneralPositionError,
    KruppaError,
    NoSolutionError,
    ParseError,
)
from .geometry import Intrinsics, iac_from_intrinsics
from .reconstruction import decompose_essential, select_pose
from .robust_refine import RansacConfig, ransac_pose
from .selfcal import focal_from_f
from .solvers import REAL_TOL, solve_7pt, solve_kruppa_5pt, solve_modern_5pt, solve_thm2
from .synth import DEFAULT_K, SceneSpec, generate_scene

ARITY = {"solve5pt-kruppa": 5, "solve5pt-modern": 5, "solve7pt": 7, "thm2": 7, "selfcal": 7}


class UsageError(Exception):
    pass


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kruppa", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def camera_flags(sp):
        sp.add_argument("--focal", type=_positive, default=DEFAULT_K.focal, help="focal length in pixels")
        sp.add_argument("--principal", type=_pair, default=tuple(DEFAULT_K.principal), help="principal point cx,cy")
        sp.add_argument("--intrinsics", help="JSON intrinsics file (overrides --focal/--principal)")

    def common(sp, tolerance_help="real-root tolerance"):
        sp.add_argument("--out", default="-", help="output path (default: standard output)")
        sp.add_argument("--tolerance", type=_positive, default=None, help=tolerance_help)

    sp = sub.add_parser("synth", help="write a synthetic correspondence file")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--noise", type=float, default=0.0, help="pixel noise sigma")
    sp.add_argument("--truth", help="also write the ground truth (JSON) here")
    camera_flags(sp)
    common(sp)

    for name, what in [
        ("solve5pt-kruppa", "five-point poses through the epipoles"),
        ("solve5pt-modern", "five-point poses through the essential-matrix constraints"),
        ("solve7pt", "fundamental matrices from seven points"),
    ]:
        sp = sub.add_parser(name, help=what)
        sp.add_argument("input", help="correspondence file (- for standard input)")
        camera_flags(sp)
        common(sp)

    sp = sub.add_parser("thm2", help="seven points, calibrated first view, known second focal length")
    sp.add_argument("input")
    camera_flags(sp)
    sp.add_argument("--focal2", type=_positive, default=None, help="second camera focal length (default --focal)")
    common(sp)

    sp = sub.add_parser("selfcal", help="common focal length from seven points and the principal points")
    sp.add_argument("input")
    sp.add_argument("--principal", type=_pair, default=tuple(DEFAULT_K.principal))
    common(sp)

    sp = sub.add_parser("ransac", help="robust pose from many correspondences")
    sp.add_argument("input")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--iterations", type=int, default=1000)
    camera_flags(sp)
    common(sp, "inlier threshold on the Sampson error (pixels^2)")

    sp = sub.add_parser("bench", help="solution-count histograms of both five-point solvers")
    sp.add_argument("--instances", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    return p


def _camera(args) -> Intrinsics:
    if getattr(args, "intrinsics", None):
        return fileio.read_intrinsics(args.intrinsics)[0]
    return Intrinsics.from_focal(args.focal, args.principal)


def _load(args):
    corrs = fileio.read_correspondences(args.input)
    need = ARITY.get(args.command)
    if need is not None and len(corrs) != need:
        raise UsageError(f"{args.command} needs exactly {need} correspondences, got {len(corrs)}")
    if args.command == "ransac" and len(corrs) < 5:
        raise UsageError(f"ransac needs at least 5 correspondences, got {len(corrs)}")
    return corrs


def _tol(args):
    return args.tolerance if args.tolerance is not None else REAL_TOL


def _pose_or_none(model, corrs, k1, k2):
    try:
        return select_pose(decompose_essential(model), corrs, k1, k2)
    except KruppaError:
        return None


def cmd_synth(args):
    k = _camera(args)
    spec = SceneSpec(seed=args.seed, n_points=args.n, noise_sigma=args.noise, intrinsics1=k, intrinsics2=k)
    scene = generate_scene(spec)
    fileio.write_correspondences(args.out, scene.correspondences)
    if args.truth:
        doc = {
            "seed": args.seed,
            "pose": fileio.pose_record(scene.pose),
            "essential": fileio.floats(scene.essential / np.linalg.norm(scene.essential)),
            "fundamental": fileio.floats(scene.fundamental / np.linalg.norm(scene.fundamental)),
            "intrinsics1": fileio.intrinsics_record(scene.k1, spec.image_size),
            "intrinsics2": fileio.intrinsics_record(scene.k2, spec.image_size),
            "points3d": [fileio.floats(x) for x in scene.points3d],
        }
        fileio.write_result(args.truth, doc)
    return 0


def cmd_solve5pt(args):
    corrs = _load(args)
    k = _camera(args)
    if args.command == "solve5pt-kruppa":
        iac = iac_from_intrinsics(k)
        models = solve_kruppa_5pt(corrs, iac, iac, real_tol=_tol(args))
    else:
        models = solve_modern_5pt(corrs, k, k, real_tol=_tol(args))
    records = [fileio.model_record(m, _pose_or_none(m, corrs, k, k)) for m in models]
    return _emit(args, {"command": args.command, "count": len(records), "models": records})


def cmd_solve7pt(args):
    corrs = _load(args)
    models = solve_7pt(corrs, real_tol=_tol(args))
    return _emit(args, {"command": args.command, "count": len(models), "models": [fileio.model_record(m) for m in models]})


def cmd_thm2(args):
    corrs = _load(args)
    k1 = _camera(args)
    focal2 = args.focal2 if args.focal2 is not None else args.focal
    sols = solve_thm2(corrs, iac_from_intrinsics(k1), focal2, real_tol=_tol(args))
    recs = []
    for s in sols:
        rec = fileio.model_record(s.fundamental)
        rec["principal_point2"] = fileio.floats(s.principal_point2)
        rec["focal2"] = float(s.focal2)
        recs.append(rec)
    recs.sort(key=lambda r: r["residual"])
    doc = {"command": "thm2", "count": len(recs), "orientations": 2 * len(recs), "solutions": recs}
    return _emit(args, doc)


def cmd_selfcal(args):
    corrs = _load(args)
    out = []
    for m in solve_7pt(corrs, real_tol=_tol(args)):
        rec = fileio.model_record(m)
        try:
            rec["focal"] = focal_from_f(m, args.principal, args.principal)
        except NoSolutionError:
            rec["focal"] = []
        except DegenerateConfigurationError:
            rec["focal"] = "continuum"
        out.append(rec)
    count = sum(len(r["focal"]) for r in out if isinstance(r["focal"], list))
    return _emit(args, {"command": "selfcal", "count": count, "models": out})


def cmd_ransac(args):
    corrs = _load(args)
    k = _camera(args)
    cfg = RansacConfig(
        threshold=args.tolerance if args.tolerance is not None else 1.0,
        max_iterations=args.iterations,
        seed=args.seed,
    )
    try:
        res = ransac_pose(corrs, k, k, cfg)
    except EstimationFailure as exc:
        raise NoSolutionError(str(exc)) from exc
    doc = {
        "command": "ransac",
        "count": 1,
        "model": fileio.model_record(res.model, res.pose),
        "inliers": [int(v) for v in res.inlier_mask],
        "inlier_count": int(res.inlier_mask.sum()),
        "iterations": int(res.iterations_run),
    }
    return _emit(args, doc)


def bench_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def cmd_bench(args):
    if args.instances < 1:
        raise UsageError("--instances must be at least 1")
    hist = {"kruppa-classic": Counter(), "modern-5pt": Counter()}
    recovered = Counter()
    timing = Counter()
    for i in range(args.instances):
        scene = generate_scene(SceneSpec(seed=bench_seed(args.seed, i)))
        c = scene.correspondences
        for name, run in [
            ("kruppa-classic", lambda: solve_kruppa_5pt(c, scene.iac1, scene.iac2, real_tol=_tol(args))),
            ("modern-5pt", lambda: solve_modern_5pt(c, scene.k1, scene.k2, real_tol=_tol(args))),
        ]:
            t0 = time.perf_counter()
            try:
                models = run()
            except KruppaError:
                models = []
            timing[name] += time.perf_counter() - t0
            hist[name][len(models)] += 1
            if any(m.distance(scene.essential) < 1e-6 for m in models):
                recovered[name] += 1
    lines = ["solver,solutions,instances"]
    for name, h in hist.items():
        for k in sorted(h):
            lines.append(f"{name},{k},{h[k]}")
    lines.append("solver,recovered,instances")
    for name in hist:
        lines.append(f"{name},{recovered[name]},{args.instances}")
    fileio.write_text(args.out, "".join(l + "\n" for l in lines))
    for name in hist:
        # timing goes to stderr so that the output itself is reproducible
        print(f"{name}: {timing[name]:.3f} s total, {1e3 * timing[name] / args.instances:.2f} ms/instance", file=sys.stderr)
    return 0


def _emit(args, doc) -> int:
    fileio.write_result(args.out, doc)
    return 0 if doc.get("count", 1) > 0 else 1


COMMANDS = {
    "synth": cmd_synth,
    "solve5pt-kruppa": cmd_solve5pt,
    "solve5pt-modern": cmd_solve5pt,
    "solve7pt": cmd_solve7pt,
    "thm2": cmd_thm2,
    "selfcal": cmd_selfcal,
    "ransac": cmd_ransac,
    "bench": cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParseError, OSError) as exc:
        print(f"kruppa {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (NoSolutionError, DegenerateConfigurationError, GeneralPositionError) as exc:
        print(f"kruppa {args.command}: no solution: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"kruppa {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
