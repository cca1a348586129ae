"""Sampson error, RANSAC over five-point samples and pose refinement."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateConfigurationError, EstimationFailure, NoValidPoseError
from .geometry import Intrinsics, hom, skew
from .reconstruction import decompose_essential, select_pose
from .solvers import solve_modern_5pt
from .types import Correspondences, EssentialModel, RelativePose


@dataclass(frozen=True)
class RansacConfig:
    threshold: float = 1.0
    max_iterations: int = 1000
    confidence: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class RobustResult:
    model: EssentialModel
    pose: RelativePose
    inlier_mask: np.ndarray
    iterations_run: int
    total_error: float = 0.0


def pixel_fundamental(model, k1: Intrinsics | None = None, k2: Intrinsics | None = None) -> np.ndarray:
    m = model.matrix if isinstance(model, EssentialModel) else np.asarray(model, dtype=float)
    if k1 is not None and k2 is not None:
        m = k2.inv.T @ m @ k1.inv
    return m


def sampson_errors(f, x1, x2) -> np.ndarray:
    """First-order geometric error (x2^T F x1)^2 / |grad|^2 for every pair."""
    x1 = hom(np.atleast_2d(x1))
    x2 = hom(np.atleast_2d(x2))
    fx1 = x1 @ f.T
    ftx2 = x2 @ f
    num = np.sum(x2 * fx1, axis=1) ** 2
    den = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    return num / np.maximum(den, 1e-300)


def sampson_error(model, c, k1=None, k2=None) -> float:
    """Sampson error of one correspondence (pixels^2 when k1, k2 are given)."""
    x1, x2 = c
    return float(sampson_errors(pixel_fundamental(model, k1, k2), [x1], [x2])[0])


def _iterations_needed(inlier_ratio, confidence, sample_size=5):
    good = inlier_ratio ** sample_size
    if good <= 0:
        return math.inf
    if good >= 1:
        return 1
    return math.ceil(math.log(1 - confidence) / math.log(1 - good))


def ransac_pose(corrs, k1: Intrinsics, k2: Intrinsics, cfg: RansacConfig = RansacConfig()) -> RobustResult:
    """Best-consensus essential matrix from minimal five-point samples.

    Trial i draws its sample from the generator seeded by (seed, i), so
    trials are independent of evaluation order. Ties in consensus go to
    the lower total error, then the earlier trial.
    """
    if not isinstance(corrs, Correspondences):
        corrs = Correspondences(*corrs)
    n = len(corrs)
    if n < 5:
        raise ValueError(f"RANSAC needs at least 5 correspondences, got {n}")
    best = None  # (-count, error, trial, model, mask)
    needed = cfg.max_iterations
    trial = 0
    while trial < min(needed, cfg.max_iterations):
        rng = np.random.default_rng([cfg.seed, trial])
        idx = np.sort(rng.choice(n, 5, replace=False))
        try:
            models = solve_modern_5pt(corrs[idx], k1, k2)
        except DegenerateConfigurationError:
            models = []
        for m in models:
            err = sampson_errors(pixel_fundamental(m, k1, k2), corrs.x1, corrs.x2)
            mask = err <= cfg.threshold
            key = (-int(mask.sum()), float(err[mask].sum()), trial)
            if best is None or key < best[:3]:
                best = key + (m, mask)
        if best is not None:
            needed = _iterations_needed(-best[0] / n, cfg.confidence)
        trial += 1
    if best is None or -best[0] < 5:
        raise EstimationFailure("no model reached a consensus of five correspondences")
    _, total, _, model, mask = best
    try:
        pose = select_pose(decompose_essential(model), corrs[mask], k1, k2)
    except NoValidPoseError as exc:
        raise EstimationFailure("best model has no physically valid pose") from exc
    return RobustResult(model, pose, mask, trial, total)


# --- refinement -------------------------------------------------------------


def tangent_basis(t) -> np.ndarray:
    """Orthonormal 3x2 basis of the plane perpendicular to t."""
    t = np.asarray(t, dtype=float)
    t = t / np.linalg.norm(t)
    helper = np.eye(3)[np.argmin(np.abs(t))]
    b1 = np.cross(t, helper)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(t, b1)
    return np.column_stack([b1, b2])


def chart(pose: RelativePose, p) -> RelativePose:
    """Local 5-parameter update: rotation vector (3) and tangent step (2)."""
    p = np.asarray(p, dtype=float)
    r = pose.rotation @ Rotation.from_rotvec(p[:3]).as_matrix()
    t = pose.translation + tangent_basis(pose.translation) @ p[3:]
    return RelativePose(r, t)


def sampson_residuals(pose: RelativePose, x1, x2, k1, k2) -> np.ndarray:
    """Signed square roots of the Sampson errors (pixels)."""
    f = k2.inv.T @ pose.essential @ k1.inv
    x1 = hom(x1)
    x2 = hom(x2)
    fx1 = x1 @ f.T
    ftx2 = x2 @ f
    e = np.sum(x2 * fx1, axis=1)
    g = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    return e / np.sqrt(g)


def sampson_jacobian(pose: RelativePose, x1, x2, k1, k2):
    """Residuals and their Jacobian (N, 5) at the origin of the chart."""
    a, c = k2.inv.T, k1.inv
    r0, t = pose.rotation, pose.translation
    f = a @ r0 @ skew(t) @ c
    x1 = hom(x1)
    x2 = hom(x2)
    fx1 = x1 @ f.T
    ftx2 = x2 @ f
    e = np.sum(x2 * fx1, axis=1)
    g = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    sg = np.sqrt(g)
    # d e / d F = x2 x1^T; d g / d F_ab = 2 (F x1)_a x1_b [a < 2] + 2 x2_a (F^T x2)_b [b < 2]
    de = np.einsum("na,nb->nab", x2, x1)
    m1 = fx1.copy()
    m1[:, 2] = 0
    m2 = ftx2.copy()
    m2[:, 2] = 0
    dg = 2 * np.einsum("na,nb->nab", m1, x1) + 2 * np.einsum("na,nb->nab", x2, m2)
    dr = de / sg[:, None, None] - (e / (2 * g * sg))[:, None, None] * dg
    basis = tangent_basis(t)
    dfs = [a @ r0 @ skew(np.eye(3)[k]) @ skew(t) @ c for k in range(3)]
    dfs += [a @ r0 @ skew(basis[:, j]) @ c for j in range(2)]
    jac = np.stack([np.einsum("nab,ab->n", dr, df) for df in dfs], axis=1)
    return e / sg, jac


def objective(pose, x1, x2, k1, k2) -> float:
    return float(np.sum(sampson_residuals(pose, x1, x2, k1, k2) ** 2))


def objective_gradient(pose, x1, x2, k1, k2) -> np.ndarray:
    """Gradient of the total Sampson error with respect to the chart at pose."""
    r, jac = sampson_jacobian(pose, x1, x2, k1, k2)
    return 2 * jac.T @ r


@dataclass
class RefineResult:
    pose: RelativePose
    cost: float
    initial_cost: float
    iterations: int
    converged: bool


def refine_pose_full(initial: RelativePose, corrs, k1, k2, iterations: int = 50, tol: float = 1e-14) -> RefineResult:
    """Levenberg-Marquardt on the Sampson residuals over the 5-dof chart."""
    if not isinstance(corrs, Correspondences):
        corrs = Correspondences(*corrs)
    x1, x2 = corrs.x1, corrs.x2
    pose = initial
    cost0 = cost = objective(pose, x1, x2, k1, k2)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, iterations + 1):
        r, jac = sampson_jacobian(pose, x1, x2, k1, k2)
        grad = jac.T @ r
        if np.linalg.norm(grad) <= tol * max(1.0, cost):
            converged = True
            break
        h = jac.T @ jac
        accepted = False
        for _ in range(12):
            step = np.linalg.solve(h + lam * np.diag(np.diag(h) + 1e-12), -grad)
            trial = chart(pose, step)
            c = objective(trial, x1, x2, k1, k2)
            if c <= cost:
                small = cost - c <= tol * max(cost, 1e-300) or np.linalg.norm(step) < 1e-15
                pose, cost = trial, c
                lam = max(lam / 10, 1e-12)
                accepted = True
                break
            lam *= 10
        if not accepted:
            break
        if small:
            converged = True
            break
    return RefineResult(pose, cost, cost0, it, converged)


def refine_pose(initial: RelativePose, corrs, k1, k2, iterations: int = 50) -> RelativePose:
    """Pose minimizing the total Sampson error near ``initial``."""
    return refine_pose_full(initial, corrs, k1, k2, iterations).pose
