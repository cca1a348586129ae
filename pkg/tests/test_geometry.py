import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kruppa.errors import DegenerateConfigurationError, GeneralPositionError, InvalidIntrinsicsError
from kruppa.geometry import (
    Conic,
    DualConic,
    Intrinsics,
    bracket,
    canonical_frame,
    dual_of,
    hom,
    iac_from_intrinsics,
    intrinsics_from_iac,
    normalize,
    projective_distance,
    tangent_pair_coeffs,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


def random_conic(rng, definite=False):
    a = rng.normal(size=(3, 3))
    m = a @ a.T + 0.5 * np.eye(3) if definite else a + a.T
    return Conic(m)


def test_iac_identity():
    assert np.allclose(iac_from_intrinsics(Intrinsics(np.eye(3))).m, np.eye(3))


def test_iac_diagonal():
    assert np.allclose(iac_from_intrinsics(Intrinsics(np.diag([2.0, 2.0, 1.0]))).m, np.diag([0.25, 0.25, 1.0]))


def test_iac_random_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = Intrinsics(np.array([[rng.uniform(300, 1500), rng.uniform(-5, 5), rng.uniform(200, 400)],
                                 [0, rng.uniform(300, 1500), rng.uniform(200, 400)], [0, 0, 1]]))
        w = iac_from_intrinsics(k).m
        assert np.allclose(k.k.T @ w @ k.k, np.eye(3), atol=1e-10)
        assert np.all(np.linalg.eigvalsh(w) > 0)


def test_iac_roundtrip():
    k = Intrinsics.from_focal(812.5, (301.0, 255.5), skew=2.0)
    assert np.allclose(intrinsics_from_iac(iac_from_intrinsics(k)).k, k.k, rtol=1e-10)


def test_invalid_intrinsics():
    with pytest.raises(InvalidIntrinsicsError):
        Intrinsics(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(InvalidIntrinsicsError):
        Intrinsics(np.array([[1.0, 0, 0], [1.0, 1, 0], [0, 0, 1]]))
    with pytest.raises(InvalidIntrinsicsError):
        iac_from_intrinsics(np.zeros((3, 3)))


def test_dual_identity():
    d = dual_of(Conic(np.eye(3)))
    assert d.delta_pairs == (1, 1, 1)
    assert d.delta_singles == (0, 0, 0)


def test_dual_diagonal_hand_values():
    d = dual_of(Conic(np.diag([4.0, 9.0, 1.0])))
    assert d.delta_pairs == (36, 4, 9)
    assert d.delta_singles == (0, 0, 0)


def test_dual_adjugate_identity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        c = random_conic(rng)
        prod = c.m @ dual_of(c).m
        det = np.linalg.det(c.m)
        assert np.linalg.norm(prod - det * np.eye(3)) <= 1e-10 * max(abs(det), 1) * 10


def test_dual_layout_sign():
    c = random_conic(np.random.default_rng(2))
    d = dual_of(c)
    assert np.allclose(d.m_layout, -d.m)
    assert np.allclose(d.m_layout[0], [-d.d23, d.d3, d.d2])


def test_dual_degenerate_flag():
    assert dual_of(Conic(np.diag([1.0, 1.0, 0.0]))).degenerate
    assert not dual_of(Conic(np.eye(3))).degenerate


def test_dual_from_matrix_roundtrip():
    c = random_conic(np.random.default_rng(3), definite=True)
    d = dual_of(c)
    e = DualConic.from_matrix(d.m)
    assert np.allclose(e.delta_pairs, d.delta_pairs)
    assert np.allclose(e.delta_singles, d.delta_singles)


def test_tangent_pair_unit():
    assert tangent_pair_coeffs(dual_of(Conic(np.eye(3))), (0, 0, 1)) == (1, 0, 1)


def test_tangent_pair_point_on_conic():
    # x on the conic: both tangents coincide, so the discriminant vanishes
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = np.diag([1.0, 1.0, -1.0])
        a = rng.normal(size=(3, 3))
        c = Conic(a.T @ m @ a)
        phi = rng.uniform(0, 2 * np.pi)
        x = np.linalg.solve(a, [np.cos(phi), np.sin(phi), 1.0])
        a11, a12, a22 = tangent_pair_coeffs(dual_of(c), x)
        scale = max(abs(a12) ** 2, abs(a11 * a22))
        assert abs(a12 * a12 - a11 * a22) <= 1e-10 * scale


def test_tangent_pair_roots_are_tangent_points():
    # the roots y on y3 = 0 span with x lines tangent to the conic
    rng = np.random.default_rng(5)
    c = random_conic(rng, definite=False)
    x = rng.normal(size=3)
    a11, a12, a22 = tangent_pair_coeffs(dual_of(c), x)
    dual = np.linalg.inv(c.m)
    for r in np.roots([a11, 2 * a12, a22]):
        y = np.array([r, 1.0, 0.0])
        line = np.cross(x, y)
        assert abs(line @ dual @ line) <= 1e-8 * np.linalg.norm(line) ** 2 * np.linalg.norm(dual)


@settings(max_examples=50, deadline=None)
@given(vec3, st.floats(0.1, 10))
def test_tangent_pair_homogeneous(x, lam):
    d = dual_of(Conic(np.array([[2.0, 0.3, 0.1], [0.3, 1.0, -0.2], [0.1, -0.2, 3.0]])))
    a = np.array(tangent_pair_coeffs(d, x))
    b = np.array(tangent_pair_coeffs(d, lam * x))
    assert np.allclose(b, lam * lam * a, atol=1e-9 * (1 + np.max(np.abs(b))))


def test_bracket_examples():
    assert np.allclose(bracket((1, 0, 0), (0, 1, 0)), (0, 0, 1))
    assert np.allclose(bracket((2, 3, 5), (2, 3, 5)), 0)


@settings(max_examples=50, deadline=None)
@given(vec3, vec3)
def test_bracket_cross_and_antisymmetry(d, x):
    assert np.allclose(bracket(d, x), np.cross(d, x))
    assert np.allclose(bracket(d, x), -bracket(x, d))


def test_canonical_frame_fixed():
    f = canonical_frame((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1), (2, 3, 5))
    assert np.allclose(f.h / f.h[0, 0], np.eye(3))
    assert projective_distance(f.d, (1, 1, 1)) < 1e-12


def test_canonical_frame_roundtrip_and_invariance():
    rng = np.random.default_rng(6)
    for _ in range(20):
        pts = rng.uniform(0, 640, size=(5, 2))
        c = random_conic(rng, definite=True)
        f = canonical_frame(*pts, c)
        hp = hom(pts)
        for i, e in enumerate(np.eye(3)):
            assert projective_distance(f.h @ hp[i], e) < 1e-10
        back = f.from_frame(f.to_frame(hp))
        for p, q in zip(back, hp):
            assert projective_distance(p, q) < 1e-10
        # the conic value at a point is preserved up to a common factor
        ratios = []
        for y in rng.normal(size=(4, 3)):
            ratios.append(f.iac_t(f.h @ y) / c(y))
        assert np.allclose(ratios, ratios[0], rtol=1e-9)


def test_canonical_frame_errors():
    with pytest.raises(DegenerateConfigurationError):
        canonical_frame((0, 0), (1, 1), (2, 2), (3, 1), (1, 4))
    with pytest.raises(GeneralPositionError):
        # d on the side through a and b
        canonical_frame((0, 0), (4, 0), (0, 4), (2, 0), (1, 1))


def test_normalize_convention():
    v = normalize(np.array([-2.0, 4.0, -1.0]))
    assert np.allclose(v, [0.5, -1.0, 0.25])
    with pytest.raises(GeneralPositionError):
        normalize(np.zeros(3))
