"""Mollified Biot-Savart prototype field around a closed filament.

The mollifier is the uniform ball: the smoothed kernel and the smoothed
Newtonian potential then have two-branch closed forms, and the doubly
smoothed potential eta*G (eta = rho*rho) reduces to a one-dimensional
radial convolution that is tabulated once per support radius.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import tube_project_batch

__all__ = [
    "Mollifier",
    "FilamentField",
    "SuperposedField",
    "eval_velocity",
    "eval_vector_potential",
    "eta_g_profile",
]

_GL8 = np.polynomial.legendre.leggauss(8)
_FOUR_PI = 4.0 * np.pi


class Mollifier:
    """Uniform-ball mollifier of unit mass supported in B_epsilon."""

    def __init__(self, epsilon):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.epsilon = float(epsilon)
        self._eta_spline = None

    @property
    def kind(self):
        return "uniform-ball"

    def density(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.epsilon, 3.0 / (_FOUR_PI * self.epsilon**3), 0.0)

    def kernel(self, z):
        """Smoothed Biot-Savart kernel K^eps(z), shape (..., 3).

        Equals -z/(4 pi |z|^3) outside B_eps (mean value property) and
        -z/(4 pi eps^3) inside.
        """
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1, keepdims=True)
        eps = self.epsilon
        r3 = np.maximum(r2, eps * eps) ** 1.5
        return -z / (_FOUR_PI * r3)

    def ball_potential(self, r):
        """rho^eps * G: Newtonian outside, parabolic cap inside."""
        r = np.asarray(r, dtype=float)
        eps = self.epsilon
        inside = (3.0 * eps**2 - r**2) / (8.0 * np.pi * eps**3)
        outside = 1.0 / (_FOUR_PI * np.maximum(r, 1e-300))
        return np.where(r < eps, inside, outside)

    # -- eta^eps * G ---------------------------------------------------------

    def _tg(self, t):
        """Antiderivative of t * ball_potential(t), continuous at eps."""
        eps = self.epsilon
        t = np.asarray(t, dtype=float)
        inner = (1.5 * eps**2 * t**2 - 0.25 * t**4) / (8.0 * np.pi * eps**3)
        outer = t / _FOUR_PI - 3.0 * eps / (32.0 * np.pi)
        return np.where(t <= eps, inner, outer)

    def _eta_g_exact(self, r):
        """Radial convolution (rho * ball_potential)(r) for scalar r."""
        eps = self.epsilon
        if r >= 2.0 * eps:
            return 1.0 / (_FOUR_PI * r)
        if r == 0.0:
            return 3.0 / (10.0 * np.pi * eps)
        # split at the kinks of TG(r+s) and TG(|r-s|)
        cuts = sorted({0.0, eps} | {c for c in (r, eps - r, r - eps) if 0.0 < c < eps})
        total = 0.0
        x, w = _GL8
        for a, b in zip(cuts[:-1], cuts[1:]):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            s = mid + half * x
            total += half * np.sum(w * s * (self._tg(r + s) - self._tg(np.abs(r - s))))
        return 3.0 / (2.0 * eps**3 * r) * total

    def _eta_table(self):
        if self._eta_spline is None:
            knots = np.linspace(0.0, 4.0 * self.epsilon, 2048)
            vals = np.array([self._eta_g_exact(r) for r in knots])
            self._eta_spline = CubicSpline(knots, vals)
        return self._eta_spline

    def eta_g(self, r):
        """(rho * rho * G)(r): tabulated core, exact Newtonian tail."""
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        tail = r >= 2.0 * self.epsilon
        out[tail] = 1.0 / (_FOUR_PI * r[tail])
        out[~tail] = self._eta_table()(r[~tail])
        return out


def eta_g_profile(mollifier, r):
    """Radial profile of eta^eps * G at distance r (scalar or array)."""
    out = mollifier.eta_g(np.asarray(r, dtype=float))
    return float(out) if out.ndim == 0 else out


# -- near-singular line quadrature ---------------------------------------------


def _near_panels(zeta, dist, eps, curve, refine=0):
    """Graded panel nodes around the foot point for near-field arcs.

    Returns (t, w, k) where t, w are (p, q) node parameters and weights and
    k is the per-point half-width of the grid window in whole samples.
    """
    h, length = curve.h, curve.length
    scale = np.maximum(np.maximum(eps, dist), 2.0 * h / 16.0)
    d = scale / 4.0
    k = np.ceil(16.0 * d / h - 1e-12).astype(int)
    k = np.clip(k, 2, curve.n // 4)
    j0 = np.round(zeta / h).astype(int) % curve.n
    center = j0 * h
    t_left = zeta - (center - k * h)   # distance from window start to zeta
    t_right = (center + k * h) - zeta

    steps = np.stack([8.0 * d, 4.0 * d, 2.0 * d, d], axis=-1)
    lefts = np.concatenate(
        [-t_left[:, None], -np.minimum(steps, t_left[:, None]), np.zeros_like(d)[:, None]],
        axis=1,
    )
    rights = np.concatenate(
        [np.zeros_like(d)[:, None], np.minimum(steps[:, ::-1], t_right[:, None]),
         t_right[:, None]],
        axis=1,
    )
    bounds = np.concatenate([lefts, rights], axis=1)  # (p, 12), nondecreasing
    if refine:
        for _ in range(refine):
            mids = 0.5 * (bounds[:, :-1] + bounds[:, 1:])
            merged = np.empty((bounds.shape[0], bounds.shape[1] + mids.shape[1]))
            merged[:, 0::2] = bounds
            merged[:, 1::2] = mids
            bounds = merged
    a, b = bounds[:, :-1], bounds[:, 1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x, w = _GL8
    t = zeta[:, None, None] + mid[:, :, None] + half[:, :, None] * x
    wts = half[:, :, None] * w
    p = zeta.shape[0]
    return t.reshape(p, -1) % length, wts.reshape(p, -1), k


def _grid_weights(n, h, j0, k):
    """Trapezoid weights on the complement of the +-k window around j0."""
    p = j0.shape[0]
    idx = np.arange(n)
    offset = np.abs(idx[None, :] - j0[:, None])
    offset = np.minimum(offset, n - offset)
    w = np.full((p, n), h)
    w[offset < k[:, None]] = 0.0
    w[offset == k[:, None]] = 0.5 * h
    return w


def _curve_integral(curve, xs, kernel, eps, foot=None, rtol=1e-8, max_refine=3,
                    near_factor=12.0):
    """Integrate kernel(x - gamma(t), gamma'(t), point_index) dt around the curve.

    Far from the curve the uniform grid trapezoid rule is spectrally accurate;
    within the tube the arc |t - zeta| < 4 max(eps, dist) is re-integrated on
    geometrically graded Gauss panels, refined until the panel contribution is
    stable to rtol. Points whose kernel scale max(eps, dist) exceeds
    near_factor grid spacings skip the panel stage entirely.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    p = xs.shape[0]
    if foot is None:
        zeta, dist, _ = tube_project_batch(curve, xs)
    else:
        zeta = np.asarray(foot[0], dtype=float)
        dist = np.asarray(foot[1], dtype=float)

    probe = kernel(xs[:1] - curve.samples[:1], curve.d1[:1], np.zeros(1, dtype=int))
    kdim = probe.shape[-1]
    out = np.zeros((p, kdim))

    near = np.maximum(eps, dist) < near_factor * curve.h
    far_idx = np.nonzero(~near)[0]
    near_idx = np.nonzero(near)[0]

    if far_idx.size:
        e = xs[far_idx, None, :] - curve.samples[None, :, :]
        vals = kernel(e, np.broadcast_to(curve.d1, e.shape), far_idx[:, None])
        out[far_idx] = curve.h * np.sum(vals, axis=1)

    if near_idx.size:
        z_n, d_n = zeta[near_idx], dist[near_idx]
        t, w, k = _near_panels(z_n, d_n, eps, curve)
        j0 = np.round(z_n / curve.h).astype(int) % curve.n
        gw = _grid_weights(curve.n, curve.h, j0, k)
        e = xs[near_idx, None, :] - curve.samples[None, :, :]
        vals = kernel(e, np.broadcast_to(curve.d1, e.shape), near_idx[:, None])
        base = np.sum(gw[:, :, None] * vals, axis=1)

        def panel_part(t, w):
            g = curve.point(t)
            tau = curve.tangent(t)
            e = xs[near_idx][:, None, :] - g
            vals = kernel(e, tau, near_idx[:, None])
            return np.sum(w[:, :, None] * vals, axis=1)

        part = panel_part(t, w)
        for level in range(1, max_refine + 1):
            t2, w2, _ = _near_panels(z_n, d_n, eps, curve, refine=level)
            part2 = panel_part(t2, w2)
            scale = np.max(np.abs(base + part2), axis=1) + 1e-300
            if np.max(np.max(np.abs(part2 - part), axis=1) / scale) < rtol:
                part = part2
                break
            part = part2
        out[near_idx] = base + part
    return out


# -- the field -------------------------------------------------------------------


class FilamentField:
    """Evaluator bundle for the mollified Biot-Savart field of one filament.

    Immutable after construction; evaluations are pure and batch-friendly.
    Circulation is fixed to 1 per filament; use SuperposedField for sums.
    """

    def __init__(self, curve, epsilon, circulation=1.0):
        if not 0.0 < epsilon < curve.length / 2.0:
            raise ValueError("epsilon must lie in (0, L/2)")
        self.curve = curve
        self.mollifier = Mollifier(epsilon)
        self.epsilon = float(epsilon)
        self.circulation = float(circulation)

    def velocity(self, xs, foot=None, rtol=1e-8):
        """v^eps at points xs (p, 3): line integral of K^eps(x-gamma) x gamma'."""
        moll = self.mollifier

        def kernel(e, tau, _):
            return np.cross(moll.kernel(e), tau)

        out = _curve_integral(self.curve, xs, kernel, self.epsilon,
                              foot=foot, rtol=rtol)
        return self.circulation * out

    def vector_potential(self, xs, foot=None, rtol=1e-8):
        """Phi^eps at points xs: line integral of (rho*G)(|x-gamma|) gamma'."""
        moll = self.mollifier

        def kernel(e, tau, _):
            r = np.sqrt(np.sum(e * e, axis=-1, keepdims=True))
            return moll.ball_potential(r) * tau

        out = _curve_integral(self.curve, xs, kernel, self.epsilon,
                              foot=foot, rtol=rtol)
        return self.circulation * out


class SuperposedField:
    """Additive superposition of filament fields (multi-filament convenience)."""

    def __init__(self, fields):
        if not fields:
            raise ValueError("need at least one field")
        self.fields = list(fields)

    def velocity(self, xs, **kw):
        return sum(f.velocity(xs, **kw) for f in self.fields)

    def vector_potential(self, xs, **kw):
        return sum(f.vector_potential(xs, **kw) for f in self.fields)


def eval_velocity(field, x):
    """Pointwise v^eps(x) as a length-3 vector."""
    return field.velocity(np.asarray(x, dtype=float)[None, :])[0]


def eval_vector_potential(field, x):
    """Pointwise Phi^eps(x) as a length-3 vector."""
    return field.vector_potential(np.asarray(x, dtype=float)[None, :])[0]
