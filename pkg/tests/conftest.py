import numpy as np
import pytest

from kruppa.geometry import canonical_frame, dual_of, hom
from kruppa.synth import SceneSpec, generate_scene

# acceptance results, filled by test_acceptance and printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def true_epipoles(scene):
    """Pixel-homogeneous epipoles: the image of the other projection centre."""
    o = scene.k1.k @ scene.pose.translation
    op = scene.k2.k @ (scene.pose.rotation @ -scene.pose.translation)
    return o, op


class FrameCase:
    """A scene seen in the frames of its first three points, with the true epipoles."""

    def __init__(self, seed):
        self.scene = generate_scene(SceneSpec(seed=seed))
        c = self.scene.correspondences
        self.f1 = canonical_frame(*c.x1, self.scene.iac1)
        self.f2 = canonical_frame(*c.x2, self.scene.iac2)
        self.delta = dual_of(self.f1.iac_t)
        self.delta_p = dual_of(self.f2.iac_t)
        o, op = true_epipoles(self.scene)
        self.x = self.f1.h @ o
        self.xp = self.f2.h @ op


@pytest.fixture(scope="session")
def frame_cases():
    return [FrameCase(s) for s in range(8)]


@pytest.fixture
def scene():
    return generate_scene(SceneSpec(seed=3))


def pixel_rays(k, pts):
    return hom(pts) @ k.inv.T


def random_rotation(rng, magnitude=np.pi):
    from scipy.spatial.transform import Rotation

    axis = rng.normal(size=3)
    return Rotation.from_rotvec(axis / np.linalg.norm(axis) * rng.uniform(0, magnitude)).as_matrix()
