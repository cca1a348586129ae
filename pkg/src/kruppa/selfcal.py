"""Calibration from known epipolar geometry.

Corresponding epipolar lines must cut tangent pairs on corresponding
conics: the tangent-pair quadratic of the second image and the pulled-back
quadratic of the first image are proportional on the pencil of epipolar
lines. For a shared unknown focal length this is a low-degree polynomial
problem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, NoSolutionError
from .geometry import DualConic
from .types import EssentialModel


@dataclass
class KruppaResidual:
    values: np.ndarray
    degenerate: bool = False


def _dual_matrix(d):
    return d.m if isinstance(d, DualConic) else np.asarray(d, dtype=float)


def _pencil_quadratics(f, diac1, diac2):
    """Binary quadratics (coefficients of a^2, 2ab, b^2) on the epipolar pencil.

    A point x = a u1 + b u2 of image 2 (u1, u2 orthogonal to the epipole
    u3) has epipolar lines u3 x x = a u2 - b u1 in image 2 and
    F^T x = a s1 v1 + b s2 v2 in image 1.
    """
    u, s, vt = np.linalg.svd(f)
    l1 = np.column_stack([s[0] * vt[0], s[1] * vt[1]])
    l2 = np.column_stack([u[:, 1], -u[:, 0]])
    q1 = l1.T @ diac1 @ l1
    q2 = l2.T @ diac2 @ l2
    return np.array([q1[0, 0], q1[0, 1], q1[1, 1]]), np.array([q2[0, 0], q2[0, 1], q2[1, 1]])


def _precondition(d) -> np.ndarray:
    """Similarity moving the centre of a dual conic to the origin and its
    size to about one, so that both images are compared in balanced units.
    """
    if abs(d[2, 2]) <= 1e-12 * np.max(np.abs(d)):
        return np.eye(3)
    c = d[:2, 2] / d[2, 2]
    shifted = d[:2, :2] / d[2, 2] - np.outer(c, c)
    size = np.sqrt(max(abs(shifted[0, 0] + shifted[1, 1]) / 2, 1e-300))
    t = np.eye(3)
    t[:2, :2] /= size
    t[:2, 2] = -c / size
    return t


def kruppa_residual(f, diac1, diac2, tol: float = 1e-12) -> KruppaResidual:
    """Two independent components of the cross product of the two quadratics.

    Each image is first brought to balanced units by a similarity fixed by
    its dual conic, and both quadratics are scaled to unit norm, so the
    result does not depend on the scale of F or of either dual conic.
    """
    m = f.matrix if isinstance(f, EssentialModel) else np.asarray(f, dtype=float)
    d1, d2 = _dual_matrix(diac1), _dual_matrix(diac2)
    d1, d2 = d1 / np.linalg.norm(d1), d2 / np.linalg.norm(d2)
    t1, t2 = _precondition(d1), _precondition(d2)
    m = np.linalg.inv(t2).T @ m @ np.linalg.inv(t1)
    a, b = _pencil_quadratics(m / np.linalg.norm(m), t1 @ d1 @ t1.T, t2 @ d2 @ t2.T)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= tol or nb <= tol:
        return KruppaResidual(np.zeros(2), True)
    a, b = a / na, b / nb
    # coincident tangents: the epipole lies on a conic
    degenerate = min(abs(a[1] ** 2 - a[0] * a[2]), abs(b[1] ** 2 - b[0] * b[2])) <= tol
    # the cross product is orthogonal to a; its coordinates in a fixed basis
    # of that plane are the two independent conditions
    helper = np.eye(3)[np.argmin(np.abs(a))]
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    r = np.cross(a, b)
    return KruppaResidual(np.array([r @ e1, r @ e2]), bool(degenerate))


def _shift(principal):
    c = np.eye(3)
    c[:2, 2] = principal
    return c


def _polish(coeffs, phi, iterations: int = 5):
    """Gauss-Newton on the three quadratics at phi."""
    for _ in range(iterations):
        r = coeffs @ [phi * phi, phi, 1.0]
        j = coeffs @ [2 * phi, 1.0, 0.0]
        jj = j @ j
        if jj == 0:
            break
        step = (j @ r) / jj
        if not abs(step) < abs(phi):
            break
        phi -= step
    return phi


def focal_from_f(f, principal1, principal2, tol: float = 1e-12):
    """Positive focal lengths shared by both cameras consistent with F.

    With the principal points moved to the origins the dual conics are
    diag(phi, phi, 1), phi = focal^2, so every coefficient of the two
    quadratics is affine in phi and the three proportionality conditions are
    quadratics in phi. Their common root is the null vector of the 3x3
    coefficient matrix read as (phi^2, phi, 1).

    Returns ascending focal lengths. Raises NoSolutionError when no positive
    root exists and DegenerateConfigurationError("continuum") when the
    conditions vanish identically.
    """
    m = f.matrix if isinstance(f, EssentialModel) else np.asarray(f, dtype=float)
    # F in coordinates centred on the principal points
    g = _shift(principal2).T @ m @ _shift(principal1)
    g = g / np.linalg.norm(g)
    # quadratics of diag(phi, phi, 1) = phi P + Q
    p = np.diag([1.0, 1.0, 0.0])
    q = np.diag([0.0, 0.0, 1.0])
    a_p, b_p = _pencil_quadratics(g, p, p)
    a_q, b_q = _pencil_quadratics(g, q, q)
    # cross(a_p phi + a_q, b_p phi + b_q) = phi^2 c2 + phi c1 + c0
    c2 = np.cross(a_p, b_p)
    c1 = np.cross(a_p, b_q) + np.cross(a_q, b_p)
    c0 = np.cross(a_q, b_q)
    coeffs = np.column_stack([c2, c1, c0])
    scale = np.linalg.norm(coeffs, axis=0)
    if np.max(scale) <= tol:
        raise DegenerateConfigurationError("continuum: the focal length is not constrained")
    scale = np.where(scale > 0, scale, 1.0)
    _, s, vt = np.linalg.svd(coeffs / scale)
    roots = []
    if s[1] <= 1e-9 * s[0]:
        # a single quadratic condition
        row = coeffs[np.argmax(np.linalg.norm(coeffs / scale, axis=1))]
        for r in np.roots(row):
            if abs(r.imag) <= 1e-9 * abs(r):
                roots.append(r.real)
    else:
        v = vt[2] / scale
        if abs(v[2]) > 0:
            roots.append(v[1] / v[2])
    focals = sorted(float(np.sqrt(_polish(coeffs, r))) for r in roots if r > 0)
    if not focals:
        raise NoSolutionError("no positive focal length is consistent with F")
    return focals
