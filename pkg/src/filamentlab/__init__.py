"""Numerical laboratory for closed vortex filaments.

Builds mollified Biot-Savart prototype fields around closed curves, evolves
curves by binormal curvature flow, and estimates flat norms of filament
vorticity differences, with quantitative diagnostics for each.
"""

from .geometry import (
    ClosedCurve,
    GeometryProfile,
    TubePoint,
    ball_hit_length,
    curve_from_csv,
    curve_from_json,
    curve_to_csv,
    curve_to_json,
    derivatives,
    geometry_profile,
    grad_zeta,
    resample_arclength,
    scale_curve,
    security_radius,
    translate_curve,
    tube_project,
    weak_l1inf,
)
from .curves import circle, ellipse, perturbed_circle, regular_polygon, trefoil

__version__ = "0.1.0"
