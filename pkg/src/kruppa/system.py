"""Kruppa's constraint system for the two epipoles.

With a, b, c as reference triangle in each image, the epipole pair
(x, x') must make the pencils x(a b c d e I) and x'(a' b' c' d' e' I')
projective. Intersecting every ray with the side y3 = 0 turns this into
four rational equations in x and x'. The reciprocal substitution
x = (u2 u3, u3 u1, u1 u2) clears them into two bilinear equations (a
quadratic birational map u -> u') and two biquadratic ones; eliminating u'
leaves two plane sextics A and B whose common points contain the
solutions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, GeneralPositionError, UndefinedImageError
from .geometry import CanonicalFrame, DualConic, dual_of, normalize, projective_distance, tangent_pair_coeffs
from .poly import Form, tangent_cone, vanishing_order

CLASSES = ("solution", "fundamental-triangle", "sigma-base-point", "conic-C-spurious", "unresolved")


@dataclass
class EpipolePairCandidate:
    o: np.ndarray
    o_prime: np.ndarray
    residuals: np.ndarray
    classification: str
    u: np.ndarray = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PencilProjectivity:
    """Diagonal map y' = diag(h11, h22) y between the points cut on y3 = 0."""

    h11: float
    h22: float
    frame1: CanonicalFrame = None
    frame2: CanonicalFrame = None

    def __post_init__(self):
        if self.h11 == 0 or self.h22 == 0:
            raise DegenerateConfigurationError("pencil projectivity must be invertible")

    @classmethod
    def from_epipoles(cls, x, xp, frame1=None, frame2=None):
        """From lambda x'_i = h_ii x_i on the rays towards c."""
        x = np.asarray(x)
        xp = np.asarray(xp)
        if min(abs(x[0]), abs(x[1]), abs(xp[0]), abs(xp[1])) == 0:
            raise GeneralPositionError("epipole on a side of the reference triangle")
        return cls(xp[0] * x[1], xp[1] * x[0], frame1, frame2)

    def apply(self, y):
        return np.array([self.h11 * y[0], self.h22 * y[1]])


def _check_general(*pts):
    for p in pts:
        p = np.asarray(p)
        if np.min(np.abs(p)) <= 1e-14 * np.max(np.abs(p)):
            raise GeneralPositionError("coordinate of an epipole vanishes")


def _cleared(n, m, n2, m2):
    """n/m = n2/m2 in cleared form, scaled to be homogeneous of degree 0."""
    denom = np.hypot(abs(n), abs(m)) * np.hypot(abs(n2), abs(m2))
    return (n * m2 - n2 * m) / denom


def residual_point_eq(x, x_prime, frame1: CanonicalFrame, frame2: CanonicalFrame):
    """The two cross-ratio conditions contributed by the points d and e."""
    _check_general(x, x_prime)
    x = np.asarray(x)
    xp = np.asarray(x_prime)
    out = []
    for p, pp in ((frame1.d, frame2.d), (frame1.e, frame2.e)):
        n = (p[2] * x[0] - p[0] * x[2]) * x[1]
        m = (p[2] * x[1] - p[1] * x[2]) * x[0]
        n2 = (pp[2] * xp[0] - pp[0] * xp[2]) * xp[1]
        m2 = (pp[2] * xp[1] - pp[1] * xp[2]) * xp[0]
        out.append(_cleared(n, m, n2, m2))
    return np.array(out)


def residual_conic_eq(x, x_prime, delta: DualConic, delta_prime: DualConic):
    """Correspondence of the tangent pairs from the epipoles to the two conics."""
    x = np.asarray(x)
    xp = np.asarray(x_prime)
    a11, a12, a22 = tangent_pair_coeffs(delta, x)
    b11, b12, b22 = tangent_pair_coeffs(delta_prime, xp)
    r1 = _cleared(a11 * x[0], a12 * x[1], b11 * xp[0], b12 * xp[1])
    r2 = _cleared(a22 * x[1], a12 * x[0], b22 * xp[1], b12 * xp[0])
    return np.array([r1, r2])


def tangency_degenerate(x, delta: DualConic, tol: float = 1e-10) -> bool:
    """True when x lies on the conic, so that its two tangents coincide."""
    a11, a12, a22 = tangent_pair_coeffs(delta, x)
    disc = a12 * a12 - a11 * a22
    scale = max(abs(a12) ** 2, abs(a11 * a22), 1e-300)
    return abs(disc) <= tol * scale


def all_residuals(x, x_prime, frame1, frame2, delta, delta_prime):
    return np.concatenate(
        [residual_point_eq(x, x_prime, frame1, frame2), residual_conic_eq(x, x_prime, delta, delta_prime)]
    )


def cremona_phi(x) -> np.ndarray:
    """Reciprocal transformation (x1, x2, x3) -> (x2 x3, x3 x1, x1 x2); an involution."""
    x = np.asarray(x)
    if np.sum(np.abs(x) <= 1e-300 + 1e-14 * np.max(np.abs(x))) >= 2:
        raise UndefinedImageError("vertex of the reference triangle has no image")
    return np.array([x[1] * x[2], x[2] * x[0], x[0] * x[1]])


def cremona_phi_inv(u) -> np.ndarray:
    return cremona_phi(u)


def _bracket_rows(p, pp):
    """Linear forms [p u]_i = p_{i+1} u_{i+1} - p_{i+2} u_{i+2}, weighted by p'_i."""
    rows = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        l = np.zeros(3)
        l[j] = p[j]
        l[k] = -p[k]
        rows.append(pp[i] * Form.linear(l))
    return rows


def sigma_forms(frame1: CanonicalFrame, frame2: CanonicalFrame):
    """The three quadratic forms of the birational map u -> u'."""
    rd = _bracket_rows(frame1.d, frame2.d)
    re = _bracket_rows(frame1.e, frame2.e)
    return [rd[(i + 1) % 3] * re[(i + 2) % 3] - rd[(i + 2) % 3] * re[(i + 1) % 3] for i in range(3)]


def sigma_rows(u, frame1, frame2):
    d, dp, e, ep = frame1.d, frame2.d, frame1.e, frame2.e
    u = np.asarray(u)
    bd = np.array([d[1] * u[1] - d[2] * u[2], d[2] * u[2] - d[0] * u[0], d[0] * u[0] - d[1] * u[1]])
    be = np.array([e[1] * u[1] - e[2] * u[2], e[2] * u[2] - e[0] * u[0], e[0] * u[0] - e[1] * u[1]])
    return dp * bd, ep * be


def sigma_map(u, frame1: CanonicalFrame, frame2: CanonicalFrame, tol: float = 1e-12) -> np.ndarray:
    rd, re = sigma_rows(u, frame1, frame2)
    out = np.cross(rd, re)
    scale = np.linalg.norm(u) ** 2 * max(np.max(np.abs(frame1.d)) * np.max(np.abs(frame2.d)), 1e-300)
    scale *= np.max(np.abs(frame1.e)) * np.max(np.abs(frame2.e))
    if np.linalg.norm(out) <= tol * scale:
        raise UndefinedImageError("base point of the birational map")
    return out


def sigma_u3_zero(u, frame1, frame2) -> np.ndarray:
    """Closed form of the map on the side u3 = 0."""
    d, e, dp, ep = frame1.d, frame1.e, frame2.d, frame2.e
    u1, u2 = u[0], u[1]
    edp = np.cross(ep, dp)
    return np.array(
        [
            u1 * (e[0] * d[0] * edp[0] * u1 + (e[1] * d[0] * ep[2] * dp[1] - e[0] * d[1] * ep[1] * dp[2]) * u2),
            u2 * (e[1] * d[1] * edp[1] * u2 + (e[1] * d[0] * ep[0] * dp[2] - e[0] * d[1] * ep[2] * dp[0]) * u1),
            u1 * u2 * (e[1] * d[0] * ep[0] * dp[1] - e[0] * d[1] * ep[1] * dp[0]),
        ]
    )


def conic_forms(delta: DualConic):
    """The quadratics M, N and C in the reduced tangent-pair equations.

    M and N are the numerators belonging to A11 and A22, C the common
    denominator belonging to A12, all rewritten in reciprocal coordinates.
    """
    m = np.zeros((3, 3))
    m[2, 2] = delta.d12
    m[1, 1] = delta.d13
    m[1, 2] = m[2, 1] = delta.d1
    n = np.zeros((3, 3))
    n[2, 2] = delta.d12
    n[0, 0] = delta.d23
    n[0, 2] = n[2, 0] = delta.d2
    c = np.zeros((3, 3))
    c[2, 2] = delta.d12
    c[1, 2] = c[2, 1] = delta.d1 / 2
    c[0, 2] = c[2, 0] = delta.d2 / 2
    c[0, 1] = c[1, 0] = -delta.d3 / 2
    return m, n, c


def reduced_residuals(u, up, frame1, frame2, delta, delta_prime):
    """The four cleared equations in reciprocal coordinates (u, u')."""
    u = np.asarray(u)
    up = np.asarray(up)
    d, e, dp, ep = frame1.d, frame1.e, frame2.d, frame2.e
    r = [
        (d[0] * u[0] - d[2] * u[2]) * (dp[1] * up[1] - dp[2] * up[2])
        - (dp[0] * up[0] - dp[2] * up[2]) * (d[1] * u[1] - d[2] * u[2]),
        (e[0] * u[0] - e[2] * u[2]) * (ep[1] * up[1] - ep[2] * up[2])
        - (ep[0] * up[0] - ep[2] * up[2]) * (e[1] * u[1] - e[2] * u[2]),
    ]
    m, n, c = conic_forms(delta)
    mp, np_, cp = conic_forms(delta_prime)
    q = lambda a, v: v @ a @ v
    r.append(q(m, u) * q(cp, up) - q(mp, up) * q(c, u))
    r.append(q(n, u) * q(cp, up) - q(np_, up) * q(c, u))
    return np.array(r)


@dataclass
class SexticSystem:
    a: Form
    b: Form
    sigma: list
    frame1: CanonicalFrame
    frame2: CanonicalFrame
    delta: DualConic
    delta_prime: DualConic


def sextic_curves(frame1: CanonicalFrame, frame2: CanonicalFrame, delta: DualConic, delta_prime: DualConic,
                  *, full: bool = False):
    """Substitute the birational map into the two conic equations.

    Returns the sextics (A, B) in the reciprocal coordinates of the first
    image, as Forms whose u3 = 1 table is the bivariate polynomial.
    """
    sig = sigma_forms(frame1, frame2)
    m, n, c = (Form.quadratic(q) for q in conic_forms(delta))
    mp, np_, cp = (Form.quadratic(q) for q in conic_forms(delta_prime))
    cp_s = cp.substitute(sig)
    a = m * cp_s - mp.substitute(sig) * c
    b = n * cp_s - np_.substitute(sig) * c
    for f in (a, b):
        if f.dehomogenized_degree() < 6:
            raise DegenerateConfigurationError("sextic degenerates below degree 6")
    if full:
        return SexticSystem(a, b, sig, frame1, frame2, delta, delta_prime)
    return a, b


def _binary_roots(coeffs):
    """Points (m1 : m2) where sum coeffs[i] m1^i m2^(n-i) vanishes."""
    coeffs = np.asarray(coeffs)
    n = len(coeffs) - 1
    scale = np.max(np.abs(coeffs))
    top = n
    while top > 0 and abs(coeffs[top]) <= 1e-13 * scale:
        top -= 1
    out = [np.array([1.0, 0.0])] * (n - top)  # roots at m2 = 0
    if top > 0:
        for s in np.roots(coeffs[: top + 1][::-1]):
            out.append(np.array([s, 1.0]))
    return out


def _conic_through(q: Form, p):
    """Rational parametrization of the conic q through its point p.

    Returns three quadratic forms in (m1, m2) (written as ternary forms that
    ignore the third variable) and the basis used; the pencil of lines
    through p is swept by m.
    """
    p = np.asarray(p, dtype=float)
    p = p / np.linalg.norm(p)
    qq, _ = np.linalg.qr(np.column_stack([p, np.eye(3)]))
    basis = np.column_stack([qq[:, 1], qq[:, 2], p])
    g = q.linear_change(basis)
    bc = g.binary_coeffs()
    quad = Form.zero(2)
    for i, v in enumerate(bc[0]):
        quad.c[i, 2 - i] = v
    lin = Form.zero(1)
    for i, v in enumerate(bc[1]):
        lin.c[i, 1 - i] = v
    m1 = Form.monomial(1, 0, 0)
    m2 = Form.monomial(0, 1, 0)
    w = [m1 * lin, m2 * lin, -1.0 * quad]
    # back to u coordinates: u = basis @ w
    comps = [sum((basis[r, s] * w[s] for s in range(1, 3)), basis[r, 0] * w[0]) for r in range(3)]
    return comps


def sigma_base_points(frame1: CanonicalFrame, frame2: CanonicalFrame, tol: float = 1e-7):
    """The three base points of the birational map: d-bar, e-bar, p-bar.

    d-bar and e-bar are the reciprocals of d and e. The third lies on all
    three brace conics; the first two braces also meet at c = (0, 0, 1), so
    p-bar is found by sweeping the first brace conic from c and picking the
    root of the second brace (a quartic in the sweep parameter) that is not
    d-bar, e-bar or c and does lie on the third brace.
    """
    d, e = frame1.d, frame1.e
    dbar = 1.0 / np.asarray(d, dtype=float)
    ebar = 1.0 / np.asarray(e, dtype=float)
    braces = sigma_forms(frame1, frame2)
    braces = [b * (1.0 / b.norm()) for b in braces]
    c_pt = np.array([0.0, 0.0, 1.0])
    comps = _conic_through(braces[0], c_pt)
    quartic = braces[1].substitute(comps)
    roots = _binary_roots(quartic.binary_coeffs()[0])
    if len(roots) != 4:
        raise DegenerateConfigurationError("brace conics share a component")
    best = None
    for m in roots:
        mm = np.array([m[0], m[1], 0.0])
        u = np.array([f(mm) for f in comps])
        if np.linalg.norm(u) == 0:
            continue
        u = u / np.linalg.norm(u)
        if min(projective_distance(u, p) for p in (dbar, ebar, c_pt)) < 1e-6:
            continue
        r3 = abs(braces[2](u))
        if best is None or r3 < best[0]:
            best = (r3, u)
    if best is None or best[0] > tol:
        raise DegenerateConfigurationError("brace conics lack a third isolated common point")
    # a simple common point of the first two braces: Newton sharpens it
    pbar = polish_common_zero(braces[0], braces[1], best[1])
    if np.max(np.abs(pbar.imag if np.iscomplexobj(pbar) else 0)) > 1e-8:
        raise DegenerateConfigurationError("third base point is not real")
    pbar = np.real(pbar)
    return dbar, ebar, normalize(pbar)


def conic_c_points(system: "SexticSystem"):
    """The six points of C whose image under the birational map lies on C'.

    C passes through a = (1, 0, 0) and b = (0, 1, 0); its image meets C'
    in 8 points of which a and b are already on the reference triangle.
    """
    _, _, c = conic_forms(system.delta)
    _, _, cp = conic_forms(system.delta_prime)
    cform = Form.quadratic(c)
    cform = cform * (1.0 / cform.norm())
    comps = _conic_through(cform, np.array([1.0, 0.0, 0.0]))
    cp_sig = Form.quadratic(cp).substitute(system.sigma)
    octic = cp_sig.substitute(comps)
    pts = []
    for m in _binary_roots(octic.binary_coeffs()[0]):
        mm = np.array([m[0], m[1], 0.0], dtype=complex)
        u = np.array([f(mm) for f in comps])
        if np.linalg.norm(u) < 1e-300:
            continue
        u = u / np.linalg.norm(u)
        if min(projective_distance(u, p) for p in ((1, 0, 0), (0, 1, 0))) < 1e-3:
            continue
        u = polish_common_zero(cform, cp_sig * (1.0 / cp_sig.norm()), u)
        if any(projective_distance(u, v) < 1e-8 for v in pts):
            continue
        pts.append(u)
    return pts


# --- intersection of the two sextics ---------------------------------------

# fixed generic rotation used to project the intersection points onto a line
_PROJ = np.array(
    [
        [0.6123724356957946, -0.3535533905932738, 0.7071067811865476],
        [0.6123724356957946, -0.3535533905932738, -0.7071067811865476],
        [0.5, 0.8660254037844386, 0.0],
    ]
)
_ROT = np.linalg.qr(np.array([[0.83, -0.31, 0.47], [0.29, 0.94, 0.18], [-0.44, 0.05, 0.89]]))[0]
PROJECTION = _ROT @ _PROJ

# multiplicity of each spurious point as a common point of A and B
SPURIOUS_MULTIPLICITY = {"a": 3, "b": 3, "c": 2, "dbar": 4, "ebar": 4, "pbar": 4}


@dataclass
class IntersectionContext:
    system: SexticSystem
    spurious: dict
    a_n: Form
    b_n: Form
    c_form: Form
    cp_form: Form
    tol: float = 1e-7

    @property
    def frame1(self):
        return self.system.frame1

    @property
    def frame2(self):
        return self.system.frame2


def build_context(frame1, frame2, delta, delta_prime, tol: float = 1e-7) -> IntersectionContext:
    system = sextic_curves(frame1, frame2, delta, delta_prime, full=True)
    dbar, ebar, pbar = sigma_base_points(frame1, frame2)
    spurious = {
        "a": np.array([1.0, 0.0, 0.0]),
        "b": np.array([0.0, 1.0, 0.0]),
        "c": np.array([0.0, 0.0, 1.0]),
        "dbar": normalize(dbar),
        "ebar": normalize(ebar),
        "pbar": pbar,
    }
    _, _, c = conic_forms(delta)
    _, _, cp = conic_forms(delta_prime)
    c_form = Form.quadratic(c)
    cp_form = Form.quadratic(cp)
    return IntersectionContext(
        system,
        spurious,
        system.a * (1.0 / system.a.norm()),
        system.b * (1.0 / system.b.norm()),
        c_form * (1.0 / c_form.norm()),
        cp_form * (1.0 / cp_form.norm()),
        tol,
    )


def _sylvester_pencil(a: Form, b: Form, q):
    """Companion pencil whose eigenvalues are the roots t of Res_w3(A, B).

    The curves are pulled back by u = q w; writing t = w1 / w2 the Sylvester
    matrix in w3 is a 12x12 matrix polynomial of degree 6 in t.
    """
    aw = a.linear_change(q).binary_coeffs()
    bw = b.linear_change(q).binary_coeffs()
    s = np.zeros((7, 12, 12))
    for k in range(7):
        for i in range(7 - k):
            for r in range(6):
                col = 11 - (k + r)
                s[i, r, col] += aw[k][i]
                s[i, 6 + r, col] += bw[k][i]
    m, d = 12, 6
    lhs = np.zeros((m * d, m * d))
    rhs = np.eye(m * d)
    lhs[: m * (d - 1), m:] = np.eye(m * (d - 1))
    for j in range(d):
        lhs[m * (d - 1):, m * j: m * (j + 1)] = -s[j]
    rhs[m * (d - 1):, m * (d - 1):] = s[d]
    return lhs, rhs


def _chart_coeffs(f: Form, q):
    """Table P with P[i, k] the coefficient of t^i w3^k of f(q (t, 1, w3))."""
    bc = f.linear_change(q).binary_coeffs()
    n = f.degree
    p = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        p[: len(bc[k]), k] = bc[k]
    return p


def _chart_eval(p, t, w):
    """Value and partial derivatives of the table polynomial at (t, w)."""
    n = p.shape[0]
    e = np.arange(n)
    tp = t[..., None] ** e
    wp = w[..., None] ** e
    dtp = np.zeros_like(tp)
    dwp = np.zeros_like(wp)
    dtp[..., 1:] = e[1:] * tp[..., :-1]
    dwp[..., 1:] = e[1:] * wp[..., :-1]
    val = np.einsum("...i,ij,...j->...", tp, p, wp)
    dt = np.einsum("...i,ij,...j->...", dtp, p, wp)
    dw = np.einsum("...i,ij,...j->...", tp, p, dwp)
    return val, dt, dw


def _chart_newton(pa, pb, t, w, iterations: int = 20):
    t = np.array(t, dtype=complex)
    w = np.array(w, dtype=complex)
    for _ in range(iterations):
        fa, at, aw = _chart_eval(pa, t, w)
        fb, bt, bw = _chart_eval(pb, t, w)
        det = at * bw - aw * bt
        ok = np.abs(det) > 1e-300
        det = np.where(ok, det, 1.0)
        st = np.where(ok, -(fa * bw - aw * fb) / det, 0.0)
        sw = np.where(ok, -(at * fb - fa * bt) / det, 0.0)
        st = np.where(np.isfinite(st), st, 0.0)
        sw = np.where(np.isfinite(sw), sw, 0.0)
        t = t + st
        w = w + sw
        last = (np.abs(st) + np.abs(sw)) / (1 + np.abs(t) + np.abs(w))
        if np.max(last, initial=0.0) < 1e-15:
            break
    return t, w, last


def eliminant_roots(a: Form, b: Form, q=PROJECTION, max_abs: float = 1e6):
    """Roots t of the degree-36 eliminant with the matching common points.

    Returns (t, u): eigenvalues of the linearized Sylvester pencil that are
    finite and, for each, the point u = q (t, 1, w3) where w3 is the root of
    A(t, w3) on which B is smallest, polished by Newton on A = B = 0.
    """
    from scipy.linalg import eig

    lhs, rhs = _sylvester_pencil(a, b, q)
    vals = eig(lhs, rhs, right=False)
    vals = vals[np.isfinite(vals) & (np.abs(vals) < max_abs)]
    pa = _chart_coeffs(a, q)
    pb = _chart_coeffs(b, q)
    # w3 roots of A(t, .) for all t at once: the w3^n coefficient is the
    # constant A(q e3), nonzero for a generic projection
    n = pa.shape[0] - 1
    coeffs = (vals[:, None] ** np.arange(n + 1)) @ pa
    comp = np.zeros((len(vals), n, n), dtype=complex)
    comp[:, 1:, :-1] = np.eye(n - 1)
    comp[:, :, -1] = -coeffs[:, :n] / coeffs[:, n:]
    roots = np.linalg.eigvals(comp)
    fb = np.abs(_chart_eval(pb, np.repeat(vals[:, None], n, axis=1), roots)[0])
    ws = roots[np.arange(len(vals)), np.argmin(fb, axis=1)]
    t, w, last = _chart_newton(pa, pb, vals, ws)
    pts = np.stack([t, np.ones_like(t), w], axis=-1) @ q.T
    pts = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
    # a step that is still large after the iterations means slow, linear
    # convergence towards a singular common point
    pts[last > 1e-7] = np.nan
    return t, pts


def polish_common_zero(a: Form, b: Form, u, iterations: int = 12, tol: float = 1e-15):
    """Newton iteration on A = B = 0 in the affine chart of the largest coordinate."""
    u = np.asarray(u, dtype=complex)
    u = u / u[np.argmax(np.abs(u))]
    k = int(np.argmax(np.abs(u)))
    free = [i for i in range(3) if i != k]
    for _ in range(iterations):
        f = np.array([a(u), b(u)])
        if np.max(np.abs(f)) < tol:
            break
        ja = a.gradient(u)
        jb = b.gradient(u)
        jac = np.array([ja[free], jb[free]])
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        u[free] += step
        if np.max(np.abs(step)) < 1e-16:
            break
    return u / np.linalg.norm(u)


_FREE = np.array([[1, 2], [0, 2], [0, 1]])


def _epipole_equations(x, xp, frame1, frame2, delta, delta_prime):
    """Cleared numerators of the four defining equations, holomorphic in (x, x').

    Works on stacks of points (N, 3); also returns the magnitudes of the two
    terms of each equation, for relative residuals.
    """
    x = np.moveaxis(x, -1, 0)
    xp = np.moveaxis(xp, -1, 0)
    out = []
    terms = []
    for p, pp in ((frame1.d, frame2.d), (frame1.e, frame2.e)):
        n = (p[2] * x[0] - p[0] * x[2]) * x[1]
        m = (p[2] * x[1] - p[1] * x[2]) * x[0]
        n2 = (pp[2] * xp[0] - pp[0] * xp[2]) * xp[1]
        m2 = (pp[2] * xp[1] - pp[1] * xp[2]) * xp[0]
        out.append(n * m2 - n2 * m)
        terms.append(np.abs(n * m2) + np.abs(n2 * m))
    a11, a12, a22 = tangent_pair_coeffs(delta, x)
    b11, b12, b22 = tangent_pair_coeffs(delta_prime, xp)
    for f, g in ((a11 * x[0] * b12 * xp[1], b11 * xp[0] * a12 * x[1]),
                 (a22 * x[1] * b12 * xp[0], b22 * xp[1] * a12 * x[0])):
        out.append(f - g)
        terms.append(np.abs(f) + np.abs(g))
    return np.stack(out, axis=-1), np.stack(terms, axis=-1)


def _central_jacobian(eq, z, rel):
    """Central differences of a batched map (m, N, 4) -> (m, N, 4); (N, 4, 4)."""
    h = rel * np.maximum(1.0, np.abs(z))
    eye = np.eye(4)
    pert = np.concatenate([z[None] + eye[:, None, :] * h[None], z[None] - eye[:, None, :] * h[None]])
    vals = eq(pert)
    return np.moveaxis((vals[:4] - vals[4:]) / (2 * h.T[:, :, None]), 0, -1)


def polish_epipoles(x, x_prime, frame1, frame2, delta, delta_prime, iterations: int = 16):
    """Newton on the original four equations in (x, x'), for stacks (N, 3).

    Each view is worked in the affine chart of its largest coordinate.
    Returns (x, x', relative residual per pair), the residual of each
    equation taken relative to the magnitude of its two terms.
    """
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    xp = np.atleast_2d(np.asarray(x_prime, dtype=complex))
    rows = np.arange(len(x))[:, None]
    k1 = np.argmax(np.abs(x), axis=1)
    k2 = np.argmax(np.abs(xp), axis=1)
    f1, f2 = _FREE[k1], _FREE[k2]
    x = x / x[rows, k1[:, None]]
    xp = xp / xp[rows, k2[:, None]]
    z = np.concatenate([x[rows, f1], xp[rows, f2]], axis=1)

    def assemble(z, idx=slice(None)):
        xx = x[idx].copy()
        yy = xp[idx].copy()
        r = np.arange(len(xx))[:, None]
        xx[r, f1[idx]] = z[:, :2]
        yy[r, f2[idx]] = z[:, 2:]
        return xx, yy

    args = (frame1, frame2, delta, delta_prime)
    f, terms = _epipole_equations(*assemble(z), *args)
    active = np.arange(len(z))
    for _ in range(iterations):
        if not len(active):
            break
        za = z[active]
        x_a, xp_a = x[active], xp[active]
        fa, fb = f1[active], f2[active]

        def eq(zz):
            # zz: (m, n_active, 4), evaluated in one batch
            m = len(zz)
            xx = np.tile(x_a, (m, 1))
            yy = np.tile(xp_a, (m, 1))
            r = np.arange(len(xx))[:, None]
            xx[r, np.tile(fa, (m, 1))] = zz[..., :2].reshape(-1, 2)
            yy[r, np.tile(fb, (m, 1))] = zz[..., 2:].reshape(-1, 2)
            return _epipole_equations(xx, yy, *args)[0].reshape(m, -1, 4)

        jac = _central_jacobian(eq, za, 1e-7)
        good = np.abs(np.linalg.det(jac)) > 1e-300
        jac[~good] = np.eye(4)
        step = np.linalg.solve(jac, -f[active][..., None])[..., 0]
        step[~good | ~np.all(np.isfinite(step), axis=1)] = 0.0
        z[active] = za + step
        f[active], terms[active] = _epipole_equations(*assemble(z[active], active), *args)
        small = np.max(np.abs(step) / np.maximum(1.0, np.abs(za)), axis=1) < 1e-13
        active = active[~small]
    x, xp = assemble(z)
    res = np.max(np.abs(f) / np.maximum(terms, 1e-300), axis=1)
    # conditioning of the row-scaled Jacobian at the final point; it
    # vanishes on the positive-dimensional components of the cleared system
    def eq_all(zz):
        m = len(zz)
        xx = np.tile(x, (m, 1))
        yy = np.tile(xp, (m, 1))
        r = np.arange(len(xx))[:, None]
        xx[r, np.tile(f1, (m, 1))] = zz[..., :2].reshape(-1, 2)
        yy[r, np.tile(f2, (m, 1))] = zz[..., 2:].reshape(-1, 2)
        return _epipole_equations(xx, yy, *args)[0].reshape(m, -1, 4)

    jac = _central_jacobian(eq_all, z, 1e-6)
    jac = jac / np.maximum(terms, 1e-300)[..., None]
    sv = np.linalg.svd(jac, compute_uv=False)
    cond = sv[:, -1] / np.maximum(sv[:, 0], 1e-300)
    return (x / np.linalg.norm(x, axis=1, keepdims=True),
            xp / np.linalg.norm(xp, axis=1, keepdims=True), res, cond)


def _near(u, p, tol):
    return projective_distance(u, p) < tol


def classify_intersection(u, ctx: IntersectionContext, tol: float | None = None, cluster_tol: float = None) -> str:
    """Tag a common zero of A and B with the reason it is (not) a solution."""
    tol = ctx.tol if tol is None else tol
    cluster_tol = tol if cluster_tol is None else cluster_tol
    u = np.asarray(u)
    u = u / np.linalg.norm(u)
    tags = []
    for name in ("a", "b", "c"):
        if _near(u, ctx.spurious[name], cluster_tol):
            tags.append("fundamental-triangle")
    for name in ("dbar", "ebar", "pbar"):
        if _near(u, ctx.spurious[name], cluster_tol):
            tags.append("sigma-base-point")
    if not tags:
        on_c = abs(ctx.c_form(u)) < tol
        try:
            up = sigma_map(u, ctx.frame1, ctx.frame2)
        except UndefinedImageError:
            return "unresolved"
        up = up / np.linalg.norm(up)
        on_cp = abs(ctx.cp_form(up)) < tol
        if on_c and on_cp:
            tags.append("conic-C-spurious")
        elif on_c != on_cp and min(abs(ctx.c_form(u)), abs(ctx.cp_form(up))) < tol:
            # exactly one side of M C' = M' C vanishes: not a clean category
            return "unresolved"
        else:
            tags.append("solution")
    if len(set(tags)) != 1:
        return "unresolved"
    return tags[0]


@dataclass
class IntersectionReport:
    """All 36 common points of A and B, grouped by category."""

    candidates: list
    multiplicities: dict
    n_finite: int
    projection_index: int
    n_c: int = 6

    @property
    def solutions(self):
        return [c for c in self.candidates if c.classification == "solution"]

    @property
    def total(self) -> int:
        return sum(self.multiplicities.values())


PROJECTIONS = [PROJECTION, np.linalg.qr(np.array([[0.2, 0.9, -0.4], [-0.7, 0.3, 0.6], [0.5, 0.1, 0.8]]))[0],
               np.linalg.qr(np.array([[-0.6, 0.5, 0.6], [0.4, 0.8, -0.1], [0.7, -0.2, 0.7]]))[0]]


COND_TOL = 1e-8


def _distances(u, pts):
    """Projective distances between each row of u and each of pts, (N, M)."""
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    pts = np.asarray(pts, dtype=complex)
    pts = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
    overlap = u @ pts.conj().T
    diff = u[:, None, :] - overlap[..., None] * pts[None, :, :]
    return np.linalg.norm(diff, axis=-1)


def _fibonacci_hemisphere(n: int):
    k = np.arange(n) + 0.5
    z = k / n
    r = np.sqrt(1 - z * z)
    phi = np.pi * (1 + 5 ** 0.5) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


_CENTRES = _fibonacci_hemisphere(96)


def choose_projections(ctx: IntersectionContext, count: int = 3):
    """Projections u = q w that keep the spurious points apart in t = w1 / w2.

    Spurious points sharing a line through the projection centre merge
    their eigenvalue clusters, whose spread grows like eps^(1/m) with the
    combined multiplicity m. Centres are ranked by the smallest angle
    between the lines joining them to the six spurious points; t = inf is
    placed in the middle of the widest gap.
    """
    pts = np.array([np.real(p) / np.linalg.norm(p) for p in ctx.spurious.values()])
    ok = (np.abs(ctx.a_n(_CENTRES)) >= 1e-8) & (np.abs(ctx.b_n(_CENTRES)) >= 1e-8)
    c = _CENTRES[ok]
    if not len(c):
        return PROJECTIONS
    helper = np.eye(3)[np.argmin(np.abs(c), axis=1)]
    q1 = np.cross(c, helper)
    q1 /= np.linalg.norm(q1, axis=1, keepdims=True)
    q2 = np.cross(c, q1)
    phi = np.sort(np.mod(np.arctan2(q1 @ pts.T, q2 @ pts.T), np.pi), axis=1)
    gaps = np.diff(np.hstack([phi, phi[:, :1] + np.pi]), axis=1)
    out = []
    for n in np.argsort(-gaps.min(axis=1), kind="stable")[:count]:
        k = int(np.argmax(gaps[n]))
        rot = phi[n, k] + gaps[n, k] / 2 - np.pi / 2
        r1 = np.cos(rot) * q1[n] - np.sin(rot) * q2[n]
        r2 = np.sin(rot) * q1[n] + np.cos(rot) * q2[n]
        out.append(np.column_stack([r1, r2, c[n]]))
    return out


def intersect(ctx: IntersectionContext, residual_tol: float = 1e-10,
              spurious_tol: float = 1e-3) -> IntersectionReport:
    """Solve A = B = 0 and account for every intersection.

    Every finite eigenvalue of the linearized eliminant yields a polished
    common point. Points that land on a spurious point are dropped (those
    carry the known multiplicities 3, 3, 2 at a, b, c and 4 at each base
    point of the birational map). Of the rest, points on both C and C' are
    set aside and every other point must also solve the original equations
    in (x, x'), where it is polished once more. Further projections are
    tried until all simple points are found.
    """
    c_pts = conic_c_points(ctx.system)
    n_c = len(c_pts)
    n_sol = 36 - sum(SPURIOUS_MULTIPLICITY.values()) - n_c
    spur = np.array(list(ctx.spurious.values()), dtype=complex)
    delta, delta_p = ctx.system.delta, ctx.system.delta_prime
    found_c = []
    sols = []  # (u, x, x', residual)
    n_finite = 0
    qi = -1
    for qi, q in enumerate(choose_projections(ctx)):
        t, pts = eliminant_roots(ctx.a_n, ctx.b_n, q, max_abs=1e8)
        n_finite = max(n_finite, len(t))
        ok = np.all(np.isfinite(pts), axis=1)
        pts = pts[ok]
        res_ab = np.maximum(np.abs(ctx.a_n(pts)), np.abs(ctx.b_n(pts)))
        # A and B are tiny near their singular points, so points that stall
        # next to a spurious point are dropped on distance
        keep = (res_ab < residual_tol) & (np.min(_distances(pts, spur), axis=1) >= spurious_tol)
        fresh_u, fresh_up = [], []
        for u in pts[keep]:
            known = [v for v in found_c] + [v[0] for v in sols] + fresh_u
            if known and np.min(_distances(u[None], known)) < 1e-6:
                continue
            try:
                up = sigma_map(u, ctx.frame1, ctx.frame2)
            except UndefinedImageError:
                continue
            up = up / np.linalg.norm(up)
            near_c = n_c and np.min(_distances(u[None], c_pts)) < 1e-5
            if near_c or (abs(ctx.c_form(u)) < 1e-7 and abs(ctx.cp_form(up)) < 1e-7):
                found_c.append(u)
                continue
            fresh_u.append(u)
            fresh_up.append(up)
        if fresh_u:
            x0 = np.array([cremona_phi(u) for u in fresh_u])
            xp0 = np.array([cremona_phi(u) for u in fresh_up])
            xs, xps, res, conds = polish_epipoles(x0, xp0, ctx.frame1, ctx.frame2, delta, delta_p)
            for x, xp, r, cond in zip(xs, xps, res, conds):
                if cond < COND_TOL:
                    continue
                if not (r < 1e-9 and np.all(np.isfinite(x)) and np.all(np.isfinite(xp))):
                    continue
                if min(np.min(np.abs(x)), np.min(np.abs(xp))) < 1e-12:
                    continue
                u = cremona_phi(x)
                u = u / np.linalg.norm(u)
                if np.min(_distances(u[None], spur)) < spurious_tol:
                    continue
                if any(projective_distance(x, v[1]) < 1e-6 and projective_distance(xp, v[2]) < 1e-6 for v in sols):
                    continue
                sols.append((u, x, xp, float(r)))
        if len(sols) >= n_sol and len(found_c) == n_c:
            break

    cands = []
    mult = {k: 0 for k in CLASSES}
    for name, p in ctx.spurious.items():
        cls = "fundamental-triangle" if name in ("a", "b", "c") else "sigma-base-point"
        m = SPURIOUS_MULTIPLICITY[name]
        cands.append(EpipolePairCandidate(None, None, None, cls, p, {"multiplicity": m, "point": name}))
        mult[cls] += m
    for u in found_c:
        cands.append(EpipolePairCandidate(None, None, None, "conic-C-spurious", u, {"multiplicity": 1}))
        mult["conic-C-spurious"] += 1
    for u, x, xp, res in sols:
        try:
            r = all_residuals(x, xp, ctx.frame1, ctx.frame2, delta, delta_p)
            cls = "solution"
        except GeneralPositionError:
            r, cls = None, "unresolved"
        cands.append(EpipolePairCandidate(x, xp, r, cls, u, {"multiplicity": 1, "relative_residual": res}))
        mult[cls] += 1
    return IntersectionReport(cands, mult, n_finite, qi, n_c)


def is_real(v, tol: float = 1e-8) -> bool:
    v = np.asarray(v)
    v = v / v[np.argmax(np.abs(v))]
    return bool(np.all(np.abs(v.imag) <= tol * (1 + np.abs(v.real))))


def _cheap_spread(frame):
    pts = np.vstack([np.eye(3), frame.d, frame.e, 1.0 / frame.e])
    dist = _distances(pts.astype(complex), pts.astype(complex))
    return float(np.min(dist[np.triu_indices(len(pts), 1)]))


def _spread(frame1, frame2):
    pts = [np.eye(3)[i] for i in range(3)] + [frame1.e]
    try:
        pts.extend(sigma_base_points(frame1, frame2))
    except DegenerateConfigurationError:
        return 0.0
    pts = np.array(pts, dtype=complex)
    dist = _distances(pts, pts)
    return float(np.min(dist[np.triu_indices(len(pts), 1)]))


def reference_orderings(x1, x2, iac1, iac2, shortlist: int = 1):
    """Orderings of the five correspondences, best conditioned first.

    The first three points of an ordering span the reference triangle. All
    ten choices are ranked by how far apart the frame points stay in both
    views; the leading few are re-ranked including the third base point of
    the birational map, which is costlier to find. Yields
    (order, frame1, frame2).
    """
    from itertools import combinations

    from .geometry import canonical_frame

    scored = []
    for tri in combinations(range(5), 3):
        order = list(tri) + [i for i in range(5) if i not in tri]
        try:
            f1 = canonical_frame(*x1[order], iac1)
            f2 = canonical_frame(*x2[order], iac2)
        except (GeneralPositionError, DegenerateConfigurationError):
            continue
        scored.append((min(_cheap_spread(f1), _cheap_spread(f2)), order, f1, f2))
    if not scored:
        raise GeneralPositionError("no three of the five points form a usable reference triangle")
    scored.sort(key=lambda r: -r[0])
    head = scored[:shortlist]
    if len(head) > 1:
        head = sorted(head, key=lambda r: -min(r[0], _spread(r[2], r[3]), _spread(r[3], r[2])))
    for r in head + scored[shortlist:]:
        yield r[1], r[2], r[3]


def report_complete(report: IntersectionReport) -> bool:
    m = report.multiplicities
    return m["unresolved"] == 0 and report.total == 36 and m["solution"] == 36 - sum(SPURIOUS_MULTIPLICITY.values()) - m["conic-C-spurious"] and m["conic-C-spurious"] == report.n_c


def _binary_resultant(f, g) -> float:
    """Resultant of two binary forms with unit-norm coefficient vectors."""
    f = np.asarray(f, dtype=float) / np.linalg.norm(f)
    g = np.asarray(g, dtype=float) / np.linalg.norm(g)
    m, n = len(f) - 1, len(g) - 1
    s = np.zeros((m + n, m + n))
    for i in range(n):
        s[i, i: i + m + 1] = f
    for i in range(m):
        s[n + i, i: i + n + 1] = g
    return float(abs(np.linalg.det(s)))


@dataclass
class BezoutAudit:
    degree_a: int
    degree_b: int
    eliminant_roots: int
    local: dict  # point name -> (order on A, order on B, intersection multiplicity)
    spurious_mass: int
    conic_points: int
    solutions: int

    @property
    def total(self) -> int:
        return self.spurious_mass + self.conic_points + self.solutions


def bezout_audit(ctx: IntersectionContext, report: IntersectionReport, order_tol: float = 1e-11,
                 tangent_tol: float = 1e-10) -> BezoutAudit:
    """Recount the 36 intersections of A and B independently of the solver.

    The spurious multiplicities come from local geometry: at a point where A
    and B have orders m and n without a common tangent the intersection
    number is m n; two smooth branches touching (as at c) meet twice. The
    eliminant count is the number of eigenvalues of the linearized
    resultant inside a disk holding every reported point.
    """
    from scipy.linalg import eig

    local = {}
    for name, p in ctx.spurious.items():
        oa = vanishing_order(ctx.a_n, p, order_tol)
        ob = vanishing_order(ctx.b_n, p, order_tol)
        ta, _ = tangent_cone(ctx.a_n, p, order_tol)
        tb, _ = tangent_cone(ctx.b_n, p, order_tol)
        touching = oa == ob == 1 and _binary_resultant(ta, tb) < tangent_tol
        local[name] = (oa, ob, 2 if touching else oa * ob)
    # the projection keeping the reported points closest to t = 0 leaves the
    # widest margin to the eigenvalues that belong to t = inf
    pts = np.array([c.u for c in report.candidates], dtype=complex)
    reach = []
    for q in choose_projections(ctx, 3):
        w = pts @ np.linalg.inv(q).T
        reach.append((float(np.max(np.abs(w[:, 0] / w[:, 1]))), len(reach), q))
    rmax, _, q = min(reach, key=lambda r: r[:2])
    lhs, rhs = _sylvester_pencil(ctx.a_n, ctx.b_n, q)
    vals = eig(lhs, rhs, right=False)
    vals = vals[np.isfinite(vals)]
    radius = 2 * rmax + 1
    m = report.multiplicities
    return BezoutAudit(
        ctx.a_n.dehomogenized_degree(),
        ctx.b_n.dehomogenized_degree(),
        int(np.sum(np.abs(vals) < radius)),
        local,
        sum(v[2] for v in local.values()),
        m["conic-C-spurious"],
        m["solution"],
    )


@dataclass
class EpipoleSolve:
    """Epipole pairs (pixel coordinates) and the accounting behind them."""

    pairs: list  # (o, o', relative residual)
    report: IntersectionReport
    order: list
    frame1: CanonicalFrame
    frame2: CanonicalFrame
    swapped: bool
    attempts: int


def solve_epipole_pairs(x1, x2, iac1, iac2, max_orderings: int = 12) -> EpipoleSolve:
    """All epipole pairs compatible with five correspondences and two conics.

    Orderings of the points are tried best first, alternating between the
    two directions (view 1 to view 2 and back), until one gives a complete
    account of the 36 intersections. Solutions from every tried ordering
    are merged: a root lying next to a spurious point in one frame is
    usually well separated in the other direction.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    streams = [
        ((o, f1, f2, False) for o, f1, f2 in reference_orderings(x1, x2, iac1, iac2)),
        ((o, f1, f2, True) for o, f1, f2 in reference_orderings(x2, x1, iac2, iac1)),
    ]
    pairs = []
    best = None
    attempts = 0
    while streams:
        stream = streams.pop(0)
        try:
            item = next(stream, None)
        except GeneralPositionError:
            item = None
        if item is None:
            continue
        streams.append(stream)
        if attempts >= max_orderings:
            break
        order, f1, f2, swapped = item
        attempts += 1
        try:
            ctx = build_context(f1, f2, dual_of(f1.iac_t), dual_of(f2.iac_t))
            rep = intersect(ctx)
        except (DegenerateConfigurationError, GeneralPositionError):
            continue
        h1inv = np.linalg.inv(f1.h)
        h2inv = np.linalg.inv(f2.h)
        for cand in rep.solutions:
            o = h1inv @ cand.o
            op = h2inv @ cand.o_prime
            if swapped:
                o, op = op, o
            o, op = o / np.linalg.norm(o), op / np.linalg.norm(op)
            if any(projective_distance(o, p[0]) < 1e-7 and projective_distance(op, p[1]) < 1e-7 for p in pairs):
                continue
            pairs.append((o, op, cand.meta.get("relative_residual", 0.0)))
        if best is None or report_complete(rep) and not report_complete(best[0]):
            best = (rep, order, f1, f2, swapped)
        if report_complete(rep):
            break
    if best is None:
        raise DegenerateConfigurationError("no ordering of the points gives a usable frame")
    return EpipoleSolve(pairs, *best, attempts)
