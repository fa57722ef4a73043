"""Built-in closed-form test curves sampled at uniform true arclength."""

from __future__ import annotations

import numpy as np

from .geometry import ClosedCurve, resample_arclength, reparametrize_arclength

__all__ = [
    "circle",
    "ellipse",
    "trefoil",
    "perturbed_circle",
    "regular_polygon",
    "from_parametrization",
]


def circle(n=512, length=1.0, radius=None, center=(0.0, 0.0, 0.0)):
    """Planar circle in the xy-plane, counterclockwise.

    Specify either the length (default: unit length, radius 1/2pi) or the
    radius. Samples are at exact uniform arclength.
    """
    if radius is not None:
        length = 2.0 * np.pi * radius
    r = length / (2.0 * np.pi)
    theta = 2.0 * np.pi * np.arange(n) / n
    samples = np.stack(
        [r * np.cos(theta), r * np.sin(theta), np.zeros(n)], axis=1
    ) + np.asarray(center, dtype=float)
    return ClosedCurve(samples, length)


def from_parametrization(fn, n=512, length=None, oversample=64):
    """Uniform-arclength sampling of a smooth 2pi-periodic parametrization.

    The cumulative arclength of fn(theta) is computed spectrally on a dense
    grid and inverted with Newton steps. If `length` is given, the curve is
    rescaled to that total length.
    """
    m = max(4096, oversample * n)
    theta = 2.0 * np.pi * np.arange(m) / m
    dense = np.asarray(fn(theta), dtype=float)
    if dense.shape != (m, 3):
        dense = dense.T
    # The reparametrizer only needs a consistent parameter scale; it then
    # recovers the true arclength from the spectral |gamma'|.
    chord = np.sum(np.linalg.norm(np.diff(dense, axis=0), axis=1))
    chord += np.linalg.norm(dense[0] - dense[-1])
    curve = reparametrize_arclength(ClosedCurve(dense, chord, validate=False), n=n)
    if length is not None:
        factor = length / curve.length
        curve = ClosedCurve(curve.samples * factor, length, validate=False)
    return curve


def ellipse(a=0.3, b=0.2, n=512, length=1.0, center=(0.0, 0.0, 0.0)):
    """Planar ellipse with semi-axes a, b, rescaled to the given length."""
    c = np.asarray(center, dtype=float)

    def fn(theta):
        return np.stack(
            [a * np.cos(theta), b * np.sin(theta), np.zeros_like(theta)], axis=1
        )

    curve = from_parametrization(fn, n=n, length=length)
    return ClosedCurve(curve.samples + c, curve.length, validate=False)


def trefoil(n=512, length=1.0):
    """Trefoil knot (2 + cos 3t, ...) rescaled to the given length."""

    def fn(theta):
        return np.stack(
            [
                (2.0 + np.cos(3.0 * theta)) * np.cos(2.0 * theta),
                (2.0 + np.cos(3.0 * theta)) * np.sin(2.0 * theta),
                np.sin(3.0 * theta),
            ],
            axis=1,
        )

    return from_parametrization(fn, n=n, length=length)


def perturbed_circle(amplitude=0.05, mode=5, n=512, length=1.0):
    """Circle with a radial cosine perturbation of the given mode number."""

    def fn(theta):
        rho = 1.0 + amplitude * np.cos(mode * theta)
        return np.stack(
            [rho * np.cos(theta), rho * np.sin(theta), np.zeros_like(theta)], axis=1
        )

    return from_parametrization(fn, n=n, length=length)


def regular_polygon(k=6, n=512, length=1.0):
    """Regular k-gon of the given perimeter, flagged piecewise-linear.

    n must be a multiple of k so every corner lands on a sample; otherwise
    the uniform-chord invariant of ClosedCurve cannot hold across corners.
    """
    if k < 3:
        raise ValueError("polygon needs at least 3 vertices")
    if n % k != 0:
        raise ValueError(f"sample count {n} must be a multiple of k={k}")
    circum_r = length / (2.0 * k * np.sin(np.pi / k))
    theta = 2.0 * np.pi * np.arange(k) / k
    verts = np.stack(
        [circum_r * np.cos(theta), circum_r * np.sin(theta), np.zeros(k)], axis=1
    )
    # the resampler wants >= 8 points; subdividing edges leaves the polyline
    # unchanged and does not create corners
    sub = max(1, -(-8 // k))
    fracs = np.arange(sub) / sub
    edges = np.roll(verts, -1, axis=0) - verts
    dense = (verts[:, None, :] + fracs[None, :, None] * edges[:, None, :]).reshape(-1, 3)
    return resample_arclength(dense, n=n, piecewise_linear=True)
