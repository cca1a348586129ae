"""Poses from an essential matrix, midpoint triangulation and cheirality."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidModelError, NoValidPoseError, PointAtInfinityError
from .geometry import Intrinsics, hom
from .types import EssentialModel, RelativePose

_W = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])


def decompose_essential(e, tol: float = 1e-7):
    """The four poses (R, t) with R [t]_x proportional to E.

    Order: (Ra, t), (Ra, -t), (Rb, t), (Rb, -t) with Rb = Ra (2 t t^T - I),
    i.e. the second camera first turned half way round the baseline. Both
    rotations give the same epipolar geometry (the twisted pair).
    """
    m = e.matrix if isinstance(e, EssentialModel) else np.asarray(e, dtype=float)
    u, s, vt = np.linalg.svd(m)
    if abs(s[0] - s[1]) > tol * s[0] or s[2] > tol * s[0]:
        raise InvalidModelError("matrix is not essential: singular values %s" % np.array2string(s / s[0]))
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    # E t = 0, so t is the right null vector
    t = vt[2]
    ra = u @ _W @ vt
    half_turn = 2 * np.outer(t, t) - np.eye(3)
    rb = ra @ half_turn
    return [RelativePose(ra, t), RelativePose(ra, -t), RelativePose(rb, t), RelativePose(rb, -t)]


@dataclass
class TriangulatedPoint:
    position: np.ndarray
    depths: np.ndarray
    reprojection_errors: np.ndarray


def _rays(pose: RelativePose, k1: Intrinsics, k2: Intrinsics, x1, x2):
    """Ray directions in camera-1 coordinates, (N, 3) each."""
    d1 = hom(x1) @ k1.inv.T
    d2 = hom(x2) @ k2.inv.T @ pose.rotation
    return d1, d2


def _reproject(pose, k1, k2, X):
    p1 = X @ k1.k.T
    p2 = pose.to_camera2(X) @ k2.k.T
    with np.errstate(divide="ignore", invalid="ignore"):
        return p1[..., :2] / p1[..., 2:3], p2[..., :2] / p2[..., 2:3]


def triangulate_many(pose: RelativePose, k1: Intrinsics, k2: Intrinsics, x1, x2, parallel_tol: float = 1e-12):
    """Midpoints of the common perpendiculars; returns (X, depths, errors).

    Rows whose rays are parallel come back as NaN.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    d1, d2 = _rays(pose, k1, k2, x1, x2)
    d1 = d1 / np.linalg.norm(d1, axis=1, keepdims=True)
    d2 = d2 / np.linalg.norm(d2, axis=1, keepdims=True)
    t = pose.translation
    # minimize |l1 d1 - (t + l2 d2)|
    b = np.einsum("ni,ni->n", d1, d2)
    denom = 1 - b * b
    p = d1 @ t
    q = d2 @ t
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = (p - b * q) / denom
        l2 = (b * p - q) / denom
    X = 0.5 * (l1[:, None] * d1 + t + l2[:, None] * d2)
    X[denom <= parallel_tol] = np.nan
    depth1 = X[:, 2]
    depth2 = pose.to_camera2(X)[:, 2]
    r1, r2 = _reproject(pose, k1, k2, X)
    err = np.column_stack([np.linalg.norm(r1 - x1, axis=1), np.linalg.norm(r2 - x2, axis=1)])
    return X, np.column_stack([depth1, depth2]), err


def triangulate(pose: RelativePose, k1: Intrinsics, k2: Intrinsics, c) -> TriangulatedPoint:
    x1, x2 = c
    X, depths, err = triangulate_many(pose, k1, k2, [x1], [x2])
    if not np.all(np.isfinite(X)):
        raise PointAtInfinityError("viewing rays are parallel")
    return TriangulatedPoint(X[0], depths[0], err[0])


def cheirality_count(pose, corrs, k1, k2):
    """(points in front of both cameras, total reprojection error)."""
    X, depths, err = triangulate_many(pose, k1, k2, corrs.x1, corrs.x2)
    ok = np.all(depths > 0, axis=1) & np.all(np.isfinite(X), axis=1)
    return int(ok.sum()), float(np.nansum(err))


def select_pose(candidates, corrs, k1: Intrinsics, k2: Intrinsics) -> RelativePose:
    """Candidate with the most points in front of both cameras.

    Ties go to the smaller total reprojection error, then the earlier
    candidate.
    """
    if len(corrs) < 1:
        raise ValueError("need at least one correspondence")
    scored = []
    for n, pose in enumerate(candidates):
        count, err = cheirality_count(pose, corrs, k1, k2)
        scored.append((-count, err, n))
    best = min(scored)
    if best[0] == 0:
        raise NoValidPoseError("no candidate pose puts any point in front of both cameras")
    return candidates[best[2]]


def pose_from_essential(e, corrs, k1, k2) -> RelativePose:
    return select_pose(decompose_essential(e), corrs, k1, k2)
