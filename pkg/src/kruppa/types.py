"""Value types shared between the solvers, reconstruction and I/O."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import normalize

SOURCES = ("kruppa-classic", "modern-5pt", "seven-point", "theorem-2")


@dataclass(frozen=True)
class Correspondences:
    """Matched image points, ``x1[i] <-> x2[i]`` (pixels, shape (N, 2))."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        x1 = np.atleast_2d(np.asarray(self.x1, dtype=float))
        x2 = np.atleast_2d(np.asarray(self.x2, dtype=float))
        if x1.shape != x2.shape or x1.shape[-1] != 2:
            raise ValueError("correspondences need two (N, 2) arrays of equal shape")
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise ValueError("non-finite coordinate in correspondences")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    def __len__(self):
        return len(self.x1)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return self.x1[idx], self.x2[idx]
        return Correspondences(self.x1[idx], self.x2[idx])

    @property
    def h1(self):
        return np.hstack([self.x1, np.ones((len(self), 1))])

    @property
    def h2(self):
        return np.hstack([self.x2, np.ones((len(self), 1))])


def canonical_matrix(m) -> np.ndarray:
    """Unit Frobenius norm, sign fixed by the largest-magnitude entry.

    Ties for the largest entry are broken by the first one in row-major
    order that is within 1e-9 of the maximum.
    """
    m = np.asarray(m, dtype=float)
    m = m / np.linalg.norm(m)
    flat = m.ravel()
    mags = np.abs(flat)
    k = int(np.argmax(mags >= mags.max() - 1e-9))
    return m if flat[k] > 0 else -m


def model_distance(a, b) -> float:
    """Frobenius distance between two 3x3 matrices, sign- and scale-free."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


@dataclass
class EssentialModel:
    """Rank-2 epipolar matrix with its epipoles.

    ``matrix`` maps view-1 points to view-2 epipolar lines:
    x2^T matrix x1 = 0. For the calibrated solvers it acts on normalized
    rays (an essential matrix); for the seven-point and principal-point solvers it
    acts on pixels (a fundamental matrix).
    """

    matrix: np.ndarray
    source: str
    epipole1: np.ndarray = None
    epipole2: np.ndarray = None
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown model source {self.source!r}")
        self.matrix = canonical_matrix(self.matrix)
        if self.epipole1 is None or self.epipole2 is None:
            u, _, vt = np.linalg.svd(self.matrix)
            self.epipole1 = normalize(vt[2])
            self.epipole2 = normalize(u[:, 2])

    @property
    def singular_values(self):
        return np.linalg.svd(self.matrix, compute_uv=False)

    def is_essential(self, tol: float = 1e-7) -> bool:
        s = self.singular_values
        return abs(s[0] - s[1]) <= tol * s[0] and s[2] <= 1e-9 * s[0]

    def fundamental(self, k1, k2) -> np.ndarray:
        """Pixel-space fundamental matrix for an essential model."""
        return canonical_matrix(np.linalg.inv(k2.k).T @ self.matrix @ np.linalg.inv(k1.k))

    def distance(self, other) -> float:
        m = other.matrix if isinstance(other, EssentialModel) else other
        return model_distance(self.matrix, m)


@dataclass(frozen=True)
class RelativePose:
    """Second camera relative to the first.

    ``translation`` is the unit vector from the first projection centre to
    the second, in first-camera coordinates; a world point X in camera-1
    coordinates is ``rotation @ (X - translation)`` in camera-2 coordinates.
    The essential matrix is rotation @ [translation]_x.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        n = np.linalg.norm(t)
        if n == 0:
            raise ValueError("zero baseline")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t / n)

    @property
    def essential(self) -> np.ndarray:
        from .geometry import skew

        return self.rotation @ skew(self.translation)

    def to_camera2(self, X) -> np.ndarray:
        return (np.asarray(X) - self.translation) @ self.rotation.T


def rotation_angle(r1, r2) -> float:
    """Angle (radians) of the relative rotation r1^T r2."""
    # chord form: accurate for small angles where arccos of the trace is not
    d = np.linalg.norm(np.asarray(r1) - np.asarray(r2))
    return float(2 * np.arcsin(min(d / (2 * np.sqrt(2)), 1.0)))


def direction_angle(t1, t2) -> float:
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    return float(np.arctan2(np.linalg.norm(np.cross(t1, t2)), t1 @ t2))
