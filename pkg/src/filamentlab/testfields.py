"""Compactly supported smooth test fields with closed-form derivatives.

The scalar profile is a degree-7 polynomial smoothstep (C^3) of an
anisotropic quadratic form: identically 1 inside the core, identically 0
outside the support ellipsoid. Vector fields carry a polynomial coefficient
of degree <= 2 so that curls of the form needed by the dual flat-norm bound
are representable.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PlateauBump",
    "TestField",
    "MatrixTestField",
    "plateau_vector",
    "plateau_matrix",
    "identity_plateau",
]

_EPS_IJK = np.zeros((3, 3, 3))
_EPS_IJK[0, 1, 2] = _EPS_IJK[1, 2, 0] = _EPS_IJK[2, 0, 1] = 1.0
_EPS_IJK[0, 2, 1] = _EPS_IJK[2, 1, 0] = _EPS_IJK[1, 0, 2] = -1.0


def _smoothstep(t):
    """C^3 smoothstep of degree 7 and its first two derivatives on [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    s = t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)
    s1 = 140.0 * t**3 * (1.0 - t) ** 3
    s2 = 420.0 * t**2 * (1.0 - t) ** 2 * (1.0 - 2.0 * t)
    return s, s1, s2


class PlateauBump:
    """Scalar plateau b(x) = S((u1 - q(x))/(u1 - u0)), q = (x-c)^T Q (x-c).

    b = 1 where q <= u0 and b = 0 where q >= u1. For the isotropic default
    Q = I/scale^2, u0 = 1, u1 = 4: the plateau is the ball of radius `scale`
    and the support is the ball of radius 2*scale.
    """

    def __init__(self, center, scale=None, matrix=None, u0=1.0, u1=4.0):
        self.center = np.asarray(center, dtype=float)
        if matrix is None:
            if scale is None:
                raise ValueError("need either scale or matrix")
            matrix = np.eye(3) / float(scale) ** 2
        self.q_matrix = np.asarray(matrix, dtype=float)
        self.u0 = float(u0)
        self.u1 = float(u1)
        if not (self.u1 > self.u0 > 0.0):
            raise ValueError("need u1 > u0 > 0")
        evals = np.linalg.eigvalsh(self.q_matrix)
        if evals[0] <= 0:
            raise ValueError("quadratic form must be positive definite")
        self.support_radius = float(np.sqrt(self.u1 / evals[0]))

    def _parts(self, xs):
        xs = np.asarray(xs, dtype=float)
        d = xs - self.center
        qd = d @ self.q_matrix
        q = np.sum(d * qd, axis=-1)
        du = self.u1 - self.u0
        s, s1, s2 = _smoothstep((self.u1 - q) / du)
        db_dq = -s1 / du
        d2b_dq2 = s2 / du**2
        return d, qd, q, s, db_dq, d2b_dq2

    def value(self, xs):
        return self._parts(xs)[3]

    def value_grad(self, xs):
        d, qd, q, s, db, _ = self._parts(xs)
        return s, db[..., None] * (2.0 * qd)

    def value_grad_hess(self, xs):
        d, qd, q, s, db, d2b = self._parts(xs)
        grad_q = 2.0 * qd
        grad = db[..., None] * grad_q
        hess = (
            d2b[..., None, None] * grad_q[..., :, None] * grad_q[..., None, :]
            + db[..., None, None] * (2.0 * self.q_matrix)
        )
        return s, grad, hess


class TestField:
    """Vector field phi_i(x) = P_i(x - c) b(x) with polynomial P of degree <= 2.

    P_i(y) = a_i + B_ij y_j + C_ijk y_j y_k (C symmetric in jk). All
    derivatives through second order are closed-form, so gradients, curls,
    and the matrix field grad(curl phi) are exact.
    """

    def __init__(self, bump, a=None, b_lin=None, c_quad=None):
        self.bump = bump
        self.a = np.zeros(3) if a is None else np.asarray(a, dtype=float)
        self.b_lin = np.zeros((3, 3)) if b_lin is None else np.asarray(b_lin, dtype=float)
        if c_quad is None:
            c_quad = np.zeros((3, 3, 3))
        c_quad = np.asarray(c_quad, dtype=float)
        self.c_quad = 0.5 * (c_quad + np.swapaxes(c_quad, 1, 2))
        self._sup = None
        self._grad_sup = None
        self._curl_sup = None

    @property
    def support_center(self):
        return self.bump.center

    @property
    def support_radius(self):
        return self.bump.support_radius

    def _poly(self, xs):
        y = np.asarray(xs, dtype=float) - self.bump.center
        p = (
            self.a
            + np.einsum("ij,...j->...i", self.b_lin, y)
            + np.einsum("ijk,...j,...k->...i", self.c_quad, y, y)
        )
        dp = self.b_lin + 2.0 * np.einsum("ijk,...k->...ij", self.c_quad, y)
        return y, p, dp

    def values(self, xs):
        return self._poly(xs)[1] * self.bump.value(xs)[..., None]

    def grad(self, xs):
        """Jacobian J[..., i, j] = d phi_i / d x_j."""
        _, p, dp = self._poly(xs)
        b, gb = self.bump.value_grad(xs)
        return dp * b[..., None, None] + p[..., :, None] * gb[..., None, :]

    def second(self, xs):
        """Second derivatives D[..., i, j, k] = d^2 phi_i / (dx_j dx_k)."""
        _, p, dp = self._poly(xs)
        b, gb, hb = self.bump.value_grad_hess(xs)
        d2p = 2.0 * self.c_quad  # (i, j, k)
        out = d2p * b[..., None, None, None]
        out = out + dp[..., :, :, None] * gb[..., None, None, :]
        out = out + dp[..., :, None, :] * gb[..., None, :, None]
        out = out + p[..., :, None, None] * hb[..., None, :, :]
        return out

    def curl(self, xs):
        jac = self.grad(xs)
        return np.stack(
            [
                jac[..., 2, 1] - jac[..., 1, 2],
                jac[..., 0, 2] - jac[..., 2, 0],
                jac[..., 1, 0] - jac[..., 0, 1],
            ],
            axis=-1,
        )

    def curl_gradient(self, xs):
        """Matrix field M_ij = d_i (curl phi)_j, trace-free by construction."""
        d2 = self.second(xs)  # (..., l, i, k) = d_i d_k phi_l
        return np.einsum("jkl,...lik->...ij", _EPS_IJK, d2)

    def curl_gradient_field(self):
        return _DerivedMatrixField(self)

    # -- norms ---------------------------------------------------------------

    def sup_norm(self):
        if self._sup is None:
            self._sup = _max_over_support(
                lambda xs: np.linalg.norm(self.values(xs), axis=-1),
                self.support_center,
                self.support_radius,
            )
        return self._sup

    def grad_sup_norm(self):
        if self._grad_sup is None:
            self._grad_sup = _max_over_support(
                lambda xs: np.linalg.norm(self.grad(xs), axis=(-2, -1)),
                self.support_center,
                self.support_radius,
            )
        return self._grad_sup

    def curl_sup_norm(self, rtol=0.01):
        if self._curl_sup is None:
            self._curl_sup = _max_over_support(
                lambda xs: np.linalg.norm(self.curl(xs), axis=-1),
                self.support_center,
                self.support_radius,
                rtol=rtol,
            )
        return self._curl_sup

    def w1inf_norm(self, length=1.0):
        return self.sup_norm() + length * self.grad_sup_norm()


class _DerivedMatrixField:
    """grad(curl phi) of a TestField, exposed with the matrix-field interface."""

    def __init__(self, base):
        self.base = base
        self._sup = None

    @property
    def support_center(self):
        return self.base.support_center

    @property
    def support_radius(self):
        return self.base.support_radius

    def values(self, xs):
        return self.base.curl_gradient(xs)

    def sup_norm(self):
        if self._sup is None:
            self._sup = _max_over_support(
                lambda xs: np.linalg.norm(self.values(xs), axis=(-2, -1)),
                self.support_center,
                self.support_radius,
            )
        return self._sup


class MatrixTestField:
    """Matrix field Phi_ij(x) = M_ij b(x) with a constant coefficient matrix."""

    def __init__(self, bump, matrix):
        self.bump = bump
        self.matrix = np.asarray(matrix, dtype=float)
        self._sup = None
        self._grad_sup = None

    @property
    def support_center(self):
        return self.bump.center

    @property
    def support_radius(self):
        return self.bump.support_radius

    def values(self, xs):
        b = self.bump.value(xs)
        return self.matrix * b[..., None, None]

    def grad(self, xs):
        """G[..., i, j, k] = d_k Phi_ij."""
        _, gb = self.bump.value_grad(xs)
        return self.matrix[None, :, :, None] * gb[..., None, None, :]

    def sup_norm(self):
        if self._sup is None:
            self._sup = float(np.linalg.norm(self.matrix))
        return self._sup

    def grad_sup_norm(self):
        if self._grad_sup is None:
            gmax = _max_over_support(
                lambda xs: np.linalg.norm(self.bump.value_grad(xs)[1], axis=-1),
                self.support_center,
                self.support_radius,
            )
            self._grad_sup = float(np.linalg.norm(self.matrix)) * gmax
        return self._grad_sup

    def w1inf_norm(self, length=1.0):
        return self.sup_norm() + length * self.grad_sup_norm()


def _max_over_support(fn, center, radius, rtol=0.005, grid=24, zooms=4):
    """Deterministic max of fn over the support ball: coarse grid + local zooms."""
    lo = center - radius
    size = 2.0 * radius
    axes = [np.linspace(lo[k], lo[k] + size, grid) for k in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    vals = fn(pts)
    best = float(np.max(vals))
    cell = size / (grid - 1)
    centers = pts[np.argsort(vals)[-8:]]
    for _ in range(zooms):
        new_best = best
        new_centers = []
        for c in centers:
            axes = [np.linspace(c[k] - cell, c[k] + cell, 7) for k in range(3)]
            sub = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
            sv = fn(sub)
            new_best = max(new_best, float(np.max(sv)))
            new_centers.append(sub[int(np.argmax(sv))])
        if new_best - best <= rtol * max(best, 1e-300):
            best = new_best
            break
        best = new_best
        centers = np.array(new_centers)
        cell /= 3.0
    return best


# -- convenience constructors -----------------------------------------------------


def plateau_vector(center, scale, coeff):
    """Constant-direction plateau field coeff * b(x)."""
    return TestField(PlateauBump(center, scale), a=coeff)


def plateau_matrix(center, scale, matrix):
    """Constant-matrix plateau field M * b(x)."""
    return MatrixTestField(PlateauBump(center, scale), matrix)


def identity_plateau(center, scale):
    return plateau_matrix(center, scale, np.eye(3))
