"""Minimal solvers: Kruppa's five-point construction, the modern five-point
essential-matrix solver, seven points, and the seven-point variant with one
unknown principal point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, InvalidModelError
from .geometry import Conic, Intrinsics, hom, intrinsics_from_iac, skew
from .system import PencilProjectivity, is_real, solve_epipole_pairs
from .types import Correspondences, EssentialModel

REAL_TOL = 1e-8


def _as_corrs(corrs, n=None, name="solver"):
    if not isinstance(corrs, Correspondences):
        corrs = Correspondences(*corrs)
    if n is not None and len(corrs) != n:
        raise ValueError(f"{name} needs exactly {n} correspondences, got {len(corrs)}")
    return corrs


def isotropic_normalization(pts) -> np.ndarray:
    """Similarity taking the centroid to 0 and the RMS distance to sqrt(2)."""
    pts = np.asarray(pts, dtype=float)
    c = pts.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((pts - c) ** 2, axis=1)))
    if rms == 0:
        raise DegenerateConfigurationError("all points coincide")
    s = np.sqrt(2) / rms
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def epipolar_residual(m, x1, x2) -> float:
    """Largest normalized algebraic error |x2^T m x1| / (|x2| |m x1|)."""
    x1 = hom(x1)
    x2 = hom(x2)
    lines = x1 @ m.T
    num = np.abs(np.sum(x2 * lines, axis=1))
    den = np.linalg.norm(x2, axis=1) * np.linalg.norm(lines, axis=1)
    return float(np.max(num / np.maximum(den, 1e-300)))


def _dedupe(models, tol=1e-9):
    out = []
    for m in models:
        if all(m.distance(o) > tol for o in out):
            out.append(m)
    return out


# --- Kruppa ----------------------------------------------------------------


def epipoles_to_model(o, o_prime, pencil: PencilProjectivity, frames=None, source="kruppa-classic") -> EssentialModel:
    """Fundamental matrix of an epipole pair and its pencil projectivity.

    ``o`` and ``o_prime`` are frame coordinates when ``frames`` is given
    (and the result is in pixels), else everything is in frame coordinates.
    A ray from x through q meets y3 = 0 in q3 x - x3 q; the projectivity
    carries that point to view 2 where it is joined to x'.
    """
    x = np.asarray(o, dtype=float)
    xp = np.asarray(o_prime, dtype=float)
    d = np.diag([pencil.h11, pencil.h22, 0.0])
    meet = np.outer(x, [0, 0, 1.0]) - x[2] * np.eye(3)
    f = skew(xp) @ d @ meet
    if frames is not None:
        f1, f2 = frames
        f = f2.h.T @ f @ f1.h
    if not np.all(np.isfinite(f)) or np.linalg.norm(f) == 0:
        raise InvalidModelError("pencil projectivity gives no epipolar map")
    return EssentialModel(f, source)


def solve_kruppa_5pt(corrs, iac1: Conic, iac2: Conic, real_tol: float = REAL_TOL):
    """Essential matrices from five correspondences via the two epipoles.

    The epipole pairs are the common points of two plane sextics; each
    real pair, together with the pencil projectivity it forces, gives the
    epipolar geometry in pixels, which the known conics turn into an
    essential matrix (acting on normalized rays).
    """
    corrs = _as_corrs(corrs, 5, "five-point solver")
    k1 = intrinsics_from_iac(iac1)
    k2 = intrinsics_from_iac(iac2)
    sol = solve_epipole_pairs(corrs.x1, corrs.x2, iac1, iac2)
    r1 = corrs.h1 @ k1.inv.T
    r2 = corrs.h2 @ k2.inv.T
    models = []
    for o, op, _ in sol.pairs:
        if not (is_real(o, real_tol) and is_real(op, real_tol)):
            continue
        o = _real(o)
        op = _real(op)
        f = _pixel_fundamental(o, op, corrs)
        e = k2.k.T @ f @ k1.k
        m = EssentialModel(e, "kruppa-classic")
        m.residual = epipolar_residual(m.matrix, r1, r2)
        models.append(m)
    models = _dedupe(sorted(models, key=lambda m: m.residual))
    return models[:10]


def _real(v):
    v = np.asarray(v)
    v = v / v[np.argmax(np.abs(v))]
    return np.real(v)


def _pixel_fundamental(o, op, corrs: Correspondences) -> np.ndarray:
    """F with F o = 0, F^T o' = 0 mapping the rays o x1_i to o' x2_i."""
    from .geometry import canonical_frame

    f1 = canonical_frame(*corrs.x1, check_general=False)
    f2 = canonical_frame(*corrs.x2, check_general=False)
    x = f1.h @ o
    xp = f2.h @ op
    pencil = PencilProjectivity.from_epipoles(x, xp, f1, f2)
    return epipoles_to_model(x, xp, pencil, (f1, f2)).matrix


# --- modern five-point --------------------------------------------------------

# monomials x^i y^j z^k of degree <= 3, cubic ones first
_MONOS = [(i, j, 3 - i - j) for i in range(3, -1, -1) for j in range(3 - i, -1, -1)]
_MONOS += [(i, j, k) for d in (2, 1, 0) for i in range(d, -1, -1) for j in range(d - i, -1, -1) for k in [d - i - j]]
_INDEX = {m: n for n, m in enumerate(_MONOS)}


_EXPONENTS = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0]])
# (x, y, z, 1)^(a, b, c) -> column of _MONOS
_CUBE = np.zeros((64, 20))
for _n, (_a, _b, _c) in enumerate(np.ndindex(4, 4, 4)):
    _CUBE[_n, _INDEX[tuple(_EXPONENTS[_a] + _EXPONENTS[_b] + _EXPONENTS[_c])]] = 1.0
_EPS = np.zeros((3, 3, 3))
_EPS[0, 1, 2] = _EPS[1, 2, 0] = _EPS[2, 0, 1] = 1.0
_EPS[0, 2, 1] = _EPS[2, 1, 0] = _EPS[1, 0, 2] = -1.0


_MIX = np.linalg.qr(np.array([[0.8, -0.3, 0.4, 0.2], [0.1, 0.9, -0.2, 0.5],
                              [-0.5, 0.2, 0.7, 0.3], [0.3, -0.4, 0.1, 0.9]]))[0]


def _constraint_matrix(basis) -> np.ndarray:
    """The ten cubics det E = 0 and 2 E E^T E - tr(E E^T) E = 0, (10, 20).

    E is linear in v = (x, y, z, 1), so each cubic is a 4x4x4 tensor
    contracted three times with v.
    """
    e = np.moveaxis(np.asarray(basis), 0, -1)  # (3, 3, 4)
    eet = np.einsum("ika,jkb->ijab", e, e)
    tr = np.einsum("iiab->ab", eet)
    trace_eq = 2 * np.einsum("ikab,kjc->ijabc", eet, e) - np.einsum("ab,ijc->ijabc", tr, e)
    det = np.einsum("ijk,ia,jb,kc->abc", _EPS, e[0], e[1], e[2])
    cubes = np.concatenate([det.reshape(1, 64), trace_eq.reshape(9, 64)])
    return cubes @ _CUBE


def solve_modern_5pt(corrs, k1: Intrinsics, k2: Intrinsics, real_tol: float = REAL_TOL):
    """Essential matrices through the 4-dimensional null space of five
    epipolar constraints.

    With E = x X + y Y + z Z + W the ten cubic constraints are reduced so
    that each cubic monomial is a combination of the ten monomials of
    degree <= 2; multiplication by x then acts on that quotient basis and
    its eigenvectors carry the (at most ten) solutions.
    """
    corrs = _as_corrs(corrs, 5, "five-point solver")
    r1 = corrs.h1 @ k1.inv.T
    r2 = corrs.h2 @ k2.inv.T
    q = np.einsum("ni,nj->nij", r2, r1).reshape(5, 9)
    _, s, vt = np.linalg.svd(q)
    if s[4] <= 1e-12 * s[0]:
        raise DegenerateConfigurationError("epipolar constraints are linearly dependent")
    # a fixed generic rotation of the null space keeps special motions
    # (whose E has many zero entries) away from the plane at infinity of
    # the chart E = x X + y Y + z Z + W
    basis = (_MIX @ vt[5:]).reshape(4, 3, 3)
    c = _constraint_matrix(basis)
    try:
        g = np.linalg.solve(c[:, :10], c[:, 10:])
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfigurationError("cubic constraints are not independent") from exc
    lower = _MONOS[10:]
    action = np.zeros((10, 10))
    for row, (i, j, k) in enumerate(lower):
        target = (i + 1, j, k)
        if target in lower:
            action[row, lower.index(target)] = 1.0
        else:
            action[row] = -g[_INDEX[target]]
    _, vecs = np.linalg.eig(action)
    one = lower.index((0, 0, 0))
    ix, iy, iz = (lower.index(m) for m in [(1, 0, 0), (0, 1, 0), (0, 0, 1)])
    models = []
    for v in vecs.T:
        if abs(v[one]) < 1e-14 * np.max(np.abs(v)):
            continue
        v = v / v[one]
        xyz = v[[ix, iy, iz]]
        if not is_real(np.append(xyz, 1.0), real_tol):
            continue
        x, y, z = np.real(xyz)
        e = x * basis[0] + y * basis[1] + z * basis[2] + basis[3]
        m = EssentialModel(_nearest_essential(e), "modern-5pt")
        m.residual = epipolar_residual(m.matrix, r1, r2)
        models.append(m)
    return _dedupe(sorted(models, key=lambda m: m.residual))


def _nearest_essential(e):
    u, s, vt = np.linalg.svd(e)
    a = (s[0] + s[1]) / 2
    return u @ np.diag([a, a, 0]) @ vt


# --- seven-point ----------------------------------------------------------------


def solve_7pt(corrs, real_tol: float = REAL_TOL):
    """Fundamental matrices through seven correspondences (one to three)."""
    corrs = _as_corrs(corrs, 7, "seven-point solver")
    t1 = isotropic_normalization(corrs.x1)
    t2 = isotropic_normalization(corrs.x2)
    p1 = corrs.h1 @ t1.T
    p2 = corrs.h2 @ t2.T
    a = np.einsum("ni,nj->nij", p2, p1).reshape(7, 9)
    _, s, vt = np.linalg.svd(a)
    if s[6] <= 1e-10 * s[0]:
        raise DegenerateConfigurationError("seven-point constraints have a null space of dimension > 2")
    f1, f2 = vt[7].reshape(3, 3), vt[8].reshape(3, 3)
    # det(f1 + l f2) is a cubic in l; interpolate it exactly at four nodes
    nodes = np.array([-1.0, 0.0, 1.0, 2.0])
    vals = [np.linalg.det(f1 + l * f2) for l in nodes]
    coeffs = np.linalg.solve(np.vander(nodes, 4), vals)
    lams = []
    if abs(coeffs[0]) <= 1e-12 * np.max(np.abs(coeffs)):
        # leading term gone: f2 alone is singular and is a solution
        lams.append(None)
        coeffs = coeffs[1:]
    for r in np.roots(coeffs):
        if abs(r.imag) <= real_tol * (1 + abs(r.real)):
            lams.append(r.real)
    models = []
    for l in lams:
        f = f2 if l is None else f1 + l * f2
        f = t2.T @ f @ t1
        m = EssentialModel(_force_rank2(f), "seven-point")
        m.residual = epipolar_residual(m.matrix, corrs.x1, corrs.x2)
        models.append(m)
    return _dedupe(sorted(models, key=lambda m: m.residual))[:3]


def _force_rank2(f):
    u, s, vt = np.linalg.svd(f)
    return u @ np.diag([s[0], s[1], 0]) @ vt


# --- one unknown principal point -------------------------------------------------


@dataclass
class Thm2Solution:
    fundamental: EssentialModel
    principal_point2: np.ndarray
    focal2: float
    conic2: Conic
    tangents2: np.ndarray = None

    @property
    def intrinsics2(self) -> Intrinsics:
        return Intrinsics.from_focal(self.focal2, self.principal_point2)


def tangents_from_point(conic: Conic, p) -> np.ndarray:
    """The two (complex) lines through p tangent to a point conic, (2, 3)."""
    p = np.asarray(p, dtype=complex)
    dual = np.linalg.inv(conic.m)
    # lines through p: l = s u + t v with u, v spanning p's orthogonal complement
    _, _, vt = np.linalg.svd(p.reshape(1, 3))
    u, v = vt[1].conj(), vt[2].conj()
    a = u @ dual @ u
    b = u @ dual @ v
    c = v @ dual @ v
    disc = np.sqrt(b * b - a * c + 0j)
    if abs(a) > abs(c):
        ts = [(-b + disc) / a, (-b - disc) / a]
        lines = [t * u + v for t in ts]
    else:
        ss = [(-b + disc) / c, (-b - disc) / c]
        lines = [u + s * v for s in ss]
    return np.array(lines)


def principal_points_from_tangent(line, focal2: float):
    """Principal points making the DIAC of (focal2, p) tangent to ``line``.

    l^T K K^T l = f^2 (l1^2 + l2^2) + (l1 p1 + l2 p2 + l3)^2, so tangency
    means l1 p1 + l2 p2 + l3 = +-i f sqrt(l1^2 + l2^2): each sign is one
    complex linear equation, i.e. two real ones, in the real unknowns.
    The quadratic pair (real and imaginary parts) has four intersections,
    two of them real.
    """
    l = np.asarray(line, dtype=complex)
    root = 1j * focal2 * np.sqrt(l[0] ** 2 + l[1] ** 2)
    out = []
    for sign in (1, -1):
        rhs = sign * root - l[2]
        a = np.array([[l[0].real, l[1].real], [l[0].imag, l[1].imag]])
        b = np.array([rhs.real, rhs.imag])
        if abs(np.linalg.det(a)) <= 1e-14 * max(np.max(np.abs(a)) ** 2, 1e-300):
            continue
        out.append(np.linalg.solve(a, b))
    return out


def solve_thm2(corrs, iac1: Conic, focal2: float, real_tol: float = REAL_TOL):
    """Seven points, a calibrated first view and the focal length of the second.

    For each seven-point epipolar geometry the tangents from the first
    epipole to the first conic are carried to the second image by the
    epipolar line map; the second conic must touch them, which fixes the
    principal point up to a finite choice.
    """
    if focal2 <= 0:
        raise ValueError("focal length must be positive")
    corrs = _as_corrs(corrs, 7, "seven-point solver")
    out = []
    for fm in solve_7pt(corrs, real_tol):
        f = fm.matrix
        o = fm.epipole1
        try:
            tangents = tangents_from_point(iac1, o)
        except np.linalg.LinAlgError:
            continue
        # l x o (o read as a line) is a point of l other than o, as o^T o > 0
        mapped = [f @ np.cross(l, o) for l in tangents]
        seen = []
        for pp in principal_points_from_tangent(mapped[0], focal2):
            if any(np.linalg.norm(pp - q) <= 1e-9 * (1 + np.linalg.norm(q)) for q in seen):
                continue
            seen.append(pp)
            k2 = Intrinsics.from_focal(focal2, pp)
            conic2 = Conic(np.linalg.inv(k2.k).T @ np.linalg.inv(k2.k))
            out.append(Thm2Solution(fm, pp, float(focal2), conic2, np.array(mapped)))
    return out


def tangency_residual(conic: Conic, line) -> float:
    """|l^T C* l| relative to |l|^2 |C*|, zero when the line touches the conic."""
    dual = np.linalg.inv(conic.m)
    l = np.asarray(line, dtype=complex)
    return float(abs(l @ dual @ l) / (np.vdot(l, l).real * np.linalg.norm(dual)))
