"""Homogeneous polynomials in three variables.

A form of degree n is stored as an (n+1, n+1) array ``c`` with ``c[i, j]``
the coefficient of u1^i u2^j u3^(n-i-j); entries with i + j > n are zero.
Read with u3 = 1 the same table is the dehomogenized bivariate polynomial.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.signal import convolve2d


class Form:
    __slots__ = ("c", "degree")

    def __init__(self, c, degree: int | None = None):
        c = np.asarray(c)
        if degree is None:
            degree = c.shape[0] - 1
        n = degree + 1
        if c.shape != (n, n):
            pad = np.zeros((n, n), dtype=c.dtype)
            pad[: c.shape[0], : c.shape[1]] = c[:n, :n]
            c = pad
        self.c = c
        self.degree = degree

    @classmethod
    def zero(cls, degree: int):
        return cls(np.zeros((degree + 1, degree + 1)), degree)

    @classmethod
    def linear(cls, l):
        c = np.zeros((2, 2), dtype=np.result_type(np.asarray(l), float))
        c[1, 0], c[0, 1], c[0, 0] = l
        return cls(c, 1)

    @classmethod
    def quadratic(cls, q):
        """From a symmetric 3x3 matrix: u^T q u."""
        q = np.asarray(q)
        c = np.zeros((3, 3), dtype=np.result_type(q, float))
        c[2, 0] = q[0, 0]
        c[0, 2] = q[1, 1]
        c[0, 0] = q[2, 2]
        c[1, 1] = q[0, 1] + q[1, 0]
        c[1, 0] = q[0, 2] + q[2, 0]
        c[0, 1] = q[1, 2] + q[2, 1]
        return cls(c, 2)

    @classmethod
    def monomial(cls, i, j, k, coeff=1.0):
        f = cls.zero(i + j + k)
        f.c[i, j] = coeff
        return f

    def __add__(self, other):
        if isinstance(other, Form):
            if other.degree != self.degree:
                raise ValueError("adding forms of different degree")
            return Form(self.c + other.c, self.degree)
        return NotImplemented

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, other):
        if isinstance(other, Form):
            return Form(convolve2d(self.c, other.c), self.degree + other.degree)
        return Form(self.c * other, self.degree)

    __rmul__ = __mul__

    def __neg__(self):
        return Form(-self.c, self.degree)

    def __pow__(self, k: int):
        out = Form(np.ones((1, 1), dtype=self.c.dtype), 0)
        for _ in range(k):
            out = out * self
        return out

    def norm(self) -> float:
        return float(np.linalg.norm(self.c))

    def __call__(self, u):
        """Evaluate at homogeneous point(s) u (..., 3); complex allowed."""
        u = np.asarray(u)
        n = self.degree
        e = np.arange(n + 1)
        p1 = u[..., 0, None] ** e
        p2 = u[..., 1, None] ** e
        p3 = u[..., 2, None] ** e
        i, j = np.nonzero(np.add.outer(e, e) <= n)
        terms = self.c[i, j] * p1[..., i] * p2[..., j] * p3[..., n - i - j]
        return terms.sum(axis=-1)

    def gradient(self, u):
        """Partial derivatives at u (..., 3) -> (..., 3)."""
        u = np.asarray(u)
        n = self.degree
        e = np.arange(n + 1)
        i, j = np.nonzero(np.add.outer(e, e) <= n)
        k = n - i - j
        c = self.c[i, j]

        def pw(x, p):
            # x**p with p possibly -1 (zero coefficient there anyway)
            return x[..., None] ** np.maximum(p, 0)

        u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
        g1 = (c * i * pw(u1, i - 1) * pw(u2, j) * pw(u3, k)).sum(-1)
        g2 = (c * j * pw(u1, i) * pw(u2, j - 1) * pw(u3, k)).sum(-1)
        g3 = (c * k * pw(u1, i) * pw(u2, j) * pw(u3, k - 1)).sum(-1)
        return np.stack([g1, g2, g3], axis=-1)

    def substitute(self, forms) -> "Form":
        """Compose with three forms of a common degree: self(f1, f2, f3)."""
        f1, f2, f3 = forms
        n = self.degree
        pw1 = [f1 ** k for k in range(n + 1)]
        pw2 = [f2 ** k for k in range(n + 1)]
        pw3 = [f3 ** k for k in range(n + 1)]
        out = None
        for i in range(n + 1):
            for j in range(n + 1 - i):
                if self.c[i, j] == 0:
                    continue
                term = pw1[i] * pw2[j] * pw3[n - i - j] * self.c[i, j]
                out = term if out is None else out + term
        if out is None:
            return Form.zero(n * f1.degree)
        return out

    def linear_change(self, q) -> "Form":
        """The form w -> self(q @ w)."""
        q = np.asarray(q)
        return self.substitute([Form.linear(q[r]) for r in range(3)])

    def dehomogenized_degree(self, tol: float = 1e-12) -> int:
        """Total degree of the polynomial obtained by setting u3 = 1."""
        scale = max(self.norm(), 1e-300)
        i, j = np.nonzero(np.abs(self.c) > tol * scale)
        return int((i + j).max()) if len(i) else -1

    def binary_coeffs(self):
        """Coefficients a_k (forms in u1, u2 of degree n-k) of u3^k.

        Returned as a list indexed by k; entry k is an array b with b[i] the
        coefficient of u1^i u2^(n-k-i).
        """
        n = self.degree
        out = []
        for k in range(n + 1):
            m = n - k
            out.append(np.array([self.c[i, m - i] for i in range(m + 1)]))
        return out


def vanishing_order(f: Form, p, tol: float = 1e-7) -> int:
    """Multiplicity of the point p on the curve f = 0.

    The form is moved so that p becomes (0, 0, 1); the order is the lowest
    total degree in (u1, u2) whose coefficients are not negligible relative
    to the coefficient norm.
    """
    p = np.asarray(p, dtype=complex if np.iscomplexobj(p) else float)
    p = p / np.linalg.norm(p)
    # orthonormal completion with p as the last column
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(3)]).astype(p.dtype))
    basis = np.column_stack([q[:, 1], q[:, 2], p])
    g = f.linear_change(basis)
    scale = max(g.norm(), 1e-300)
    for m in range(g.degree + 1):
        block = [g.c[i, m - i] for i in range(m + 1)]
        if np.max(np.abs(block)) > tol * scale:
            return m
    return g.degree + 1


def tangent_cone(f: Form, p, tol: float = 1e-7):
    """Lowest-order part of f at p, as a binary form in local coordinates."""
    p = np.asarray(p)
    p = p / np.linalg.norm(p)
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(3)]).astype(p.dtype))
    basis = np.column_stack([q[:, 1], q[:, 2], p])
    g = f.linear_change(basis)
    m = vanishing_order(f, p, tol)
    return np.array([g.c[i, m - i] for i in range(m + 1)]), basis


def binomial(n, k):
    return math.comb(n, k)
