"""Homogeneous primitives, conic algebra and the projective base frame.

Image points are homogeneous 3-vectors, conics are symmetric 3x3 matrices.
Everything here is scale-free: two arrays describe the same object when
they differ by a nonzero factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, GeneralPositionError, InvalidIntrinsicsError

EPS = 1e-12


def hom(p) -> np.ndarray:
    """Lift a 2-vector (or stack of them) to homogeneous coordinates."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] == 3:
        return p
    return np.concatenate([p, np.ones(p.shape[:-1] + (1,))], axis=-1)


def dehom(p) -> np.ndarray:
    p = np.asarray(p)
    return p[..., :2] / p[..., 2:3]


def normalize(p) -> np.ndarray:
    """Canonical representative of a homogeneous vector.

    Scaled so the largest-magnitude coordinate has modulus 1 and the first
    coordinate that is not negligible is positive (real part, for complex
    input). Works row-wise on stacks.
    """
    p = np.asarray(p)
    flat = p.reshape(-1, p.shape[-1])
    out = np.empty_like(flat, dtype=np.result_type(flat, float))
    for n, v in enumerate(flat):
        m = np.max(np.abs(v))
        if m == 0:
            raise GeneralPositionError("zero vector has no projective representative")
        w = v / m
        k = int(np.argmax(np.abs(w) > 1e-9))
        if np.iscomplexobj(w):
            w = w * (np.conj(w[k]) / abs(w[k]))
        elif w[k] < 0:
            w = -w
        out[n] = w
    return out.reshape(p.shape)


def projective_distance(p, q) -> float:
    """Sine of the angle between two homogeneous vectors (0 when p ~ q)."""
    p = np.asarray(p)
    q = np.asarray(q)
    p = p / np.linalg.norm(p)
    q = q / np.linalg.norm(q)
    # component of q orthogonal to p; avoids the cancellation in 1 - cos^2
    return float(min(1.0, np.linalg.norm(q - p * np.vdot(p, q))))


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=np.result_type(v, float))


def bracket(d, x) -> np.ndarray:
    """Cyclic bracket (d x)_i = d_{i+1} x_{i+2} - d_{i+2} x_{i+1}."""
    d = np.asarray(d)
    x = np.asarray(x)
    return np.array(
        [d[1] * x[2] - d[2] * x[1], d[2] * x[0] - d[0] * x[2], d[0] * x[1] - d[1] * x[0]]
    )


@dataclass(frozen=True)
class Intrinsics:
    k: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.shape != (3, 3):
            raise InvalidIntrinsicsError("calibration matrix must be 3x3")
        if abs(k[2, 2]) < EPS:
            raise InvalidIntrinsicsError("k[2][2] must be nonzero")
        k = k / k[2, 2]
        if np.any(np.abs(np.tril(k, -1)) > 1e-12):
            raise InvalidIntrinsicsError("calibration matrix must be upper triangular")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise InvalidIntrinsicsError("focal lengths must be positive")
        object.__setattr__(self, "k", k)

    @classmethod
    def from_focal(cls, focal: float, principal=(0.0, 0.0), aspect: float = 1.0, skew: float = 0.0):
        return cls(np.array([[focal, skew, principal[0]], [0, focal * aspect, principal[1]], [0, 0, 1.0]]))

    @property
    def inv(self) -> np.ndarray:
        return np.linalg.inv(self.k)

    @property
    def focal(self) -> float:
        return float(self.k[0, 0])

    @property
    def principal(self) -> np.ndarray:
        return self.k[:2, 2].copy()

    def normalize_points(self, pts) -> np.ndarray:
        """Pixel coordinates -> normalized homogeneous rays."""
        return hom(pts) @ self.inv.T


@dataclass(frozen=True)
class Conic:
    """Point conic y^T m y = 0."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("conic matrix must be 3x3")
        scale = np.max(np.abs(m))
        if scale == 0:
            raise ValueError("zero conic")
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise ValueError("conic matrix must be symmetric")
        object.__setattr__(self, "m", 0.5 * (m + m.T))

    def __call__(self, y):
        y = np.asarray(y)
        return np.einsum("...i,ij,...j->...", y, self.m, y)

    def transformed(self, h) -> "Conic":
        """Image of the conic under the point map y -> h y."""
        hi = np.linalg.inv(h)
        return Conic(hi.T @ self.m @ hi)

    def scaled(self, lam: float) -> "Conic":
        return Conic(lam * self.m)


@dataclass(frozen=True)
class DualConic:
    """Line conic built from a point conic.

    ``m`` is the plain adjugate, ``m_layout`` the same matrix in the sign
    arrangement [[-d23, d3, d2], [d3, -d13, d1], [d2, d1, -d12]] (= -adjugate)
    that the tangent-pair coefficients are written in.
    """

    m: np.ndarray
    m_layout: np.ndarray
    d12: float
    d13: float
    d23: float
    d1: float
    d2: float
    d3: float
    degenerate: bool = False

    @property
    def delta_pairs(self):
        return self.d12, self.d13, self.d23

    @property
    def delta_singles(self):
        return self.d1, self.d2, self.d3

    def scaled(self, lam: float) -> "DualConic":
        return DualConic(
            lam * self.m,
            lam * self.m_layout,
            *(lam * v for v in (self.d12, self.d13, self.d23, self.d1, self.d2, self.d3)),
            degenerate=self.degenerate,
        )

    @classmethod
    def from_matrix(cls, adj) -> "DualConic":
        """Wrap a symmetric line-conic matrix (e.g. K K^T) as δ-symbols."""
        adj = 0.5 * (np.asarray(adj, dtype=float) + np.asarray(adj, dtype=float).T)
        d23, d13, d12 = adj[0, 0], adj[1, 1], adj[2, 2]
        d3, d2, d1 = -adj[0, 1], -adj[0, 2], -adj[1, 2]
        det = np.linalg.det(adj)
        return cls(adj, -adj, d12, d13, d23, d1, d2, d3, abs(det) <= EPS * np.max(np.abs(adj)) ** 3)


def iac_from_intrinsics(k: Intrinsics) -> Conic:
    """Image of the absolute conic, K^-T K^-1."""
    kk = np.asarray(k.k if isinstance(k, Intrinsics) else k, dtype=float)
    if abs(np.linalg.det(kk)) <= EPS * max(1.0, np.max(np.abs(kk))) ** 3:
        raise InvalidIntrinsicsError("singular calibration matrix")
    ki = np.linalg.inv(kk)
    return Conic(ki.T @ ki)


def intrinsics_from_iac(iac: Conic) -> Intrinsics:
    """Inverse of iac_from_intrinsics (upper-triangular factor of the DIAC)."""
    w = iac.m / iac.m[2, 2] if iac.m[2, 2] != 0 else iac.m
    if np.any(np.linalg.eigvalsh(w) <= 0):
        w = -w
    dual = np.linalg.inv(w)
    # K K^T = dual; flip to get an upper-triangular Cholesky factor
    p = np.eye(3)[::-1]
    l = np.linalg.cholesky(p @ dual @ p)
    k = p @ l @ p
    return Intrinsics(k / k[2, 2])


def dual_of(c: Conic) -> DualConic:
    a = c.m
    d12 = a[0, 0] * a[1, 1] - a[0, 1] ** 2
    d13 = a[0, 0] * a[2, 2] - a[0, 2] ** 2
    d23 = a[1, 1] * a[2, 2] - a[1, 2] ** 2
    d1 = a[0, 0] * a[2, 1] - a[2, 0] * a[0, 1]
    d2 = a[1, 1] * a[0, 2] - a[0, 1] * a[1, 2]
    d3 = a[2, 2] * a[1, 0] - a[1, 2] * a[2, 0]
    layout = np.array([[-d23, d3, d2], [d3, -d13, d1], [d2, d1, -d12]])
    det = np.linalg.det(a)
    degenerate = abs(det) <= EPS * np.max(np.abs(a)) ** 3
    return DualConic(-layout, layout, d12, d13, d23, d1, d2, d3, bool(degenerate))


def tangent_pair_coeffs(delta: DualConic, x):
    """Binary quadratic A11 y1^2 + 2 A12 y1 y2 + A22 y2^2 cut on the line y3 = 0
    by the two tangents from x to the conic."""
    x1, x2, x3 = x
    a11 = delta.d12 * x2 * x2 + delta.d13 * x3 * x3 + 2 * delta.d1 * x2 * x3
    a12 = delta.d3 * x3 * x3 - delta.d12 * x1 * x2 - delta.d1 * x1 * x3 - delta.d2 * x2 * x3
    a22 = delta.d12 * x1 * x1 + delta.d23 * x3 * x3 + 2 * delta.d2 * x1 * x3
    return a11, a12, a22


@dataclass(frozen=True)
class CanonicalFrame:
    """Projective frame with a, b, c as the reference triangle.

    ``h`` sends pixel-homogeneous points to frame coordinates; ``d`` and ``e``
    are the remaining two points and ``iac_t`` the conic, both expressed in
    the new frame.
    """

    h: np.ndarray
    d: np.ndarray
    e: np.ndarray
    iac_t: Conic | None = None
    points: np.ndarray = field(default=None, repr=False)

    def to_frame(self, p) -> np.ndarray:
        return np.asarray(p) @ self.h.T

    def from_frame(self, p) -> np.ndarray:
        return np.asarray(p) @ np.linalg.inv(self.h).T


def canonical_frame(a, b, c, d, e, iac: Conic | None = None, *, check_general: bool = True) -> CanonicalFrame:
    """Change of basis taking a, b, c to the unit points.

    The three columns are rescaled so that d becomes (1, 1, 1) whenever that
    is possible; this is only a choice of representative and keeps the frame
    coordinates of order one.
    """
    pts = np.array([hom(p) for p in (a, b, c, d, e)], dtype=float)
    basis = pts[:3].T
    scale = np.max(np.abs(basis))
    if abs(np.linalg.det(basis / scale)) < 1e-12:
        raise DegenerateConfigurationError("reference points a, b, c are collinear")
    h = np.linalg.inv(basis)
    dt = h @ pts[3]
    if check_general and np.min(np.abs(dt)) <= 1e-12 * np.max(np.abs(dt)):
        raise GeneralPositionError("fourth point lies on a side of the reference triangle")
    if np.all(np.abs(dt) > 0):
        h = np.diag(1.0 / dt) @ h
    h = h / np.max(np.abs(h))
    dt = h @ pts[3]
    et = h @ pts[4]
    if check_general and np.min(np.abs(et)) <= 1e-12 * np.max(np.abs(et)):
        raise GeneralPositionError("fifth point lies on a side of the reference triangle")
    iac_t = None
    if iac is not None:
        iac_t = iac.transformed(h)
        iac_t = Conic(iac_t.m / np.max(np.abs(iac_t.m)))
    return CanonicalFrame(h, dt, et, iac_t, pts)
