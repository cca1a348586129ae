"""Synthetic two-view scenes with exact ground truth."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import KruppaError
from .geometry import Conic, Intrinsics, iac_from_intrinsics
from .types import Correspondences, RelativePose

DEFAULT_K = Intrinsics.from_focal(800.0, (320.0, 240.0))
IMAGE_SIZE = (640, 480)


class PoseInfeasibleError(KruppaError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    n_points: int = 5
    depth_range: tuple = (4.0, 10.0)
    rotation_magnitude: float = 0.3
    noise_sigma: float = 0.0
    intrinsics1: Intrinsics = DEFAULT_K
    intrinsics2: Intrinsics = DEFAULT_K
    image_size: tuple = IMAGE_SIZE

    def __post_init__(self):
        if self.n_points < 5:
            raise ValueError("n_points must be at least 5")
        lo, hi = self.depth_range
        if not 0 < lo < hi:
            raise ValueError("depth range must satisfy 0 < min < max")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass
class SceneTruth:
    pose: RelativePose
    points3d: np.ndarray
    correspondences: Correspondences
    iac1: Conic
    iac2: Conic
    k1: Intrinsics = field(default=DEFAULT_K)
    k2: Intrinsics = field(default=DEFAULT_K)
    clean: Correspondences = None

    @property
    def essential(self) -> np.ndarray:
        return self.pose.essential

    @property
    def fundamental(self) -> np.ndarray:
        return np.linalg.inv(self.k2.k).T @ self.pose.essential @ np.linalg.inv(self.k1.k)


def project(k: Intrinsics, X) -> np.ndarray:
    x = np.asarray(X) @ k.k.T
    return x[:, :2] / x[:, 2:3]


def _random_pose(rng, magnitude):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.2, 1.0) * magnitude
    rot = Rotation.from_rotvec(axis * angle).as_matrix()
    t = rng.normal(size=3)
    t /= np.linalg.norm(t)
    return RelativePose(rot, t)


def generate_scene(spec: SceneSpec, max_pose_tries: int = 50) -> SceneTruth:
    """Random relative pose and points visible in both images.

    Points are drawn uniformly in the first camera's frustum (pixel
    uniformly in the image, depth uniformly in ``depth_range``) and kept
    when they also project inside the second image in front of the camera.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.seed)))
    w, h = spec.image_size
    k1, k2 = spec.intrinsics1, spec.intrinsics2
    n = spec.n_points
    for _ in range(max_pose_tries):
        pose = _random_pose(rng, spec.rotation_magnitude)
        pts = []
        for _ in range(200):
            m = 4 * n
            pix = rng.uniform([0, 0], [w, h], size=(m, 2))
            depth = rng.uniform(*spec.depth_range, size=m)
            rays = np.hstack([pix, np.ones((m, 1))]) @ k1.inv.T
            X = rays * depth[:, None]
            Xc = pose.to_camera2(X)
            ok = Xc[:, 2] > 0.1 * spec.depth_range[0]
            x2 = np.full((m, 2), -1.0)
            x2[ok] = project(k2, Xc[ok])
            ok &= (x2[:, 0] >= 0) & (x2[:, 0] <= w) & (x2[:, 1] >= 0) & (x2[:, 1] <= h)
            pts.extend(X[ok])
            if len(pts) >= n:
                break
        if len(pts) >= n:
            break
    else:
        raise PoseInfeasibleError("no pose with a non-empty common field of view")
    X = np.array(pts[:n])
    x1 = project(k1, X)
    x2 = project(k2, pose.to_camera2(X))
    clean = Correspondences(x1, x2)
    if spec.noise_sigma > 0:
        x1 = x1 + rng.normal(scale=spec.noise_sigma, size=x1.shape)
        x2 = x2 + rng.normal(scale=spec.noise_sigma, size=x2.shape)
    return SceneTruth(
        pose=pose,
        points3d=X,
        correspondences=Correspondences(x1, x2),
        iac1=iac_from_intrinsics(k1),
        iac2=iac_from_intrinsics(k2),
        k1=k1,
        k2=k2,
        clean=clean,
    )
