import numpy as np
import pytest

from conftest import random_rotation
from kruppa.errors import InvalidModelError, NoValidPoseError, PointAtInfinityError
from kruppa.geometry import Intrinsics, skew
from kruppa.reconstruction import (
    cheirality_count,
    decompose_essential,
    pose_from_essential,
    select_pose,
    triangulate,
    triangulate_many,
)
from kruppa.synth import SceneSpec, generate_scene
from kruppa.types import Correspondences, RelativePose, model_distance

IDENT = Intrinsics(np.eye(3))


def test_decompose_recomposes_and_is_proper():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = random_rotation(rng)
        t = rng.normal(size=3)
        e = r @ skew(t)
        poses = decompose_essential(e * rng.uniform(0.1, 10))
        assert len(poses) == 4
        for p in poses:
            assert model_distance(p.essential, e) < 1e-8
            assert np.allclose(p.rotation.T @ p.rotation, np.eye(3), atol=1e-10)
            assert abs(np.linalg.det(p.rotation) - 1) < 1e-10
            assert abs(np.linalg.norm(p.translation) - 1) < 1e-12


def test_twisted_pair_same_fundamental():
    rng = np.random.default_rng(1)
    k1 = Intrinsics.from_focal(700.0, (300.0, 250.0))
    k2 = Intrinsics.from_focal(900.0, (330.0, 230.0))
    for _ in range(20):
        e = random_rotation(rng) @ skew(rng.normal(size=3))
        pa, _, pb, _ = decompose_essential(e)
        fa = k2.inv.T @ pa.essential @ k1.inv
        fb = k2.inv.T @ pb.essential @ k1.inv
        assert model_distance(fa, fb) < 1e-9
        # the twist is a half turn about the baseline
        twist = pa.rotation.T @ pb.rotation
        assert np.allclose(twist @ pa.translation, pa.translation, atol=1e-10)
        assert abs(np.trace(twist) + 1) < 1e-10


def test_identity_x_translation_among_candidates():
    pose = RelativePose(np.eye(3), np.array([1.0, 0, 0]))
    cands = decompose_essential(pose.essential)
    hits = [p for p in cands if np.allclose(p.rotation, np.eye(3), atol=1e-12) and np.allclose(p.translation, [1, 0, 0])]
    assert len(hits) == 1


def test_rejects_non_essential():
    with pytest.raises(InvalidModelError):
        decompose_essential(np.diag([1.0, 0.5, 0.0]))
    with pytest.raises(InvalidModelError):
        decompose_essential(np.eye(3))


def test_triangulate_hand_example():
    pose = RelativePose(np.eye(3), np.array([1.0, 0, 0]))
    X = np.array([0.0, 0, 5])
    x2 = pose.to_camera2(X[None])[0]
    p1, p2 = X[:2] / X[2], x2[:2] / x2[2]
    assert np.allclose(p1, [0, 0]) and np.allclose(p2, [-0.2, 0])
    tp = triangulate(pose, IDENT, IDENT, (p1, p2))
    assert np.linalg.norm(tp.position - X) < 1e-10
    assert np.allclose(tp.depths, [5, 5])
    assert np.all(tp.reprojection_errors < 1e-10)


def test_triangulate_synthetic_cloud():
    for seed in range(20):
        s = generate_scene(SceneSpec(seed=seed, n_points=30))
        X, depths, err = triangulate_many(s.pose, s.k1, s.k2, s.correspondences.x1, s.correspondences.x2)
        assert np.max(np.linalg.norm(X - s.points3d, axis=1)) < 1e-8
        assert np.all(depths > 0)
        assert np.max(err) < 1e-10


def test_scale_invariance_of_images():
    s = generate_scene(SceneSpec(seed=4, n_points=10))
    lam = 3.7
    big = RelativePose(s.pose.rotation, s.pose.translation)
    # scaled scene and baseline give the same pixels
    Xs = lam * s.points3d
    x2 = (Xs - lam * big.translation) @ big.rotation.T @ s.k2.k.T
    assert np.allclose(x2[:, :2] / x2[:, 2:], s.correspondences.x2, atol=1e-9)
    # the reconstruction is the unit-baseline representative
    X, _, _ = triangulate_many(s.pose, s.k1, s.k2, s.correspondences.x1, s.correspondences.x2)
    assert np.allclose(X, s.points3d, atol=1e-8)


def test_triangulate_epipole_is_at_infinity():
    s = generate_scene(SceneSpec(seed=2))
    t = s.pose.translation
    o1 = s.k1.k @ t
    o2 = s.k2.k @ (s.pose.rotation @ -t)
    with pytest.raises(PointAtInfinityError):
        triangulate(s.pose, s.k1, s.k2, (o1[:2] / o1[2], o2[:2] / o2[2]))


def test_select_pose_1000_scenes():
    ok = 0
    for seed in range(1000):
        s = generate_scene(SceneSpec(seed=seed, n_points=8))
        cands = decompose_essential(s.essential)
        counts = [cheirality_count(p, s.correspondences, s.k1, s.k2)[0] for p in cands]
        chosen = select_pose(cands, s.correspondences, s.k1, s.k2)
        ok += (
            sorted(counts)[-1] == 8
            and sorted(counts)[-2] < 8
            and np.allclose(chosen.rotation, s.pose.rotation, atol=1e-8)
            and np.allclose(chosen.translation, s.pose.translation, atol=1e-8)
        )
    assert ok == 1000


def test_pose_from_essential_counts_all_points():
    s = generate_scene(SceneSpec(seed=11, n_points=12))
    p = pose_from_essential(s.essential, s.correspondences, s.k1, s.k2)
    assert cheirality_count(p, s.correspondences, s.k1, s.k2)[0] == 12


def test_select_pose_no_valid_candidate():
    # skew rays whose common perpendicular joins the two projection centres:
    # every candidate puts the midpoint at depth zero
    pose = RelativePose(np.eye(3), np.array([1.0, 0.0, 0.0]))
    c = Correspondences(np.array([[0.0, 0.5]]), np.array([[0.0, -0.5]]))
    cands = decompose_essential(pose.essential)
    for p in cands:
        assert cheirality_count(p, c, IDENT, IDENT)[0] == 0
    with pytest.raises(NoValidPoseError):
        select_pose(cands, c, IDENT, IDENT)


def test_select_pose_needs_correspondences():
    pose = RelativePose(np.eye(3), np.array([1.0, 0, 0]))
    empty = Correspondences(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        select_pose(decompose_essential(pose.essential), empty, IDENT, IDENT)
