"""Signed-distance oracles for the domains the built-in charts live in."""
from typing import Callable

import numpy as np

from utils.validators import ValidationError

SignedDistance = Callable[[np.ndarray], np.ndarray]

DOMAIN_NAMES = ('unit-ball', 'tilted-sphere', 'cylinder')


def unit_ball_sdf(points: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(points, dtype=float), axis=-1) - 1.0


def cylinder_sdf(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return np.hypot(pts[..., 0], pts[..., 1]) - 1.0


def tilted_sphere_sdf(alpha: float) -> SignedDistance:
    """
    Sphere through the unit circle of the plane z = 0, centred at
    (0, 0, tan alpha) with radius sec alpha. Along the circle its outward
    normal makes the angle pi/2 - alpha with the plane normal e_z.
    """
    if not -0.5 * np.pi < alpha < 0.5 * np.pi:
        raise ValidationError(f"Tilt angle must lie in (-pi/2, pi/2), got {alpha}", {"alpha": alpha})
    center = np.array([0.0, 0.0, np.tan(alpha)])
    radius = 1.0 / np.cos(alpha)

    def sdf(points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(points, dtype=float) - center, axis=-1) - radius

    return sdf


def builtin_domain(chart_name: str) -> SignedDistance:
    """Domain oracle matching a built-in chart name."""
    base = chart_name.split(':', 1)[0].split('*', 1)[0]
    if base == 'equatorial-disk-in-ball':
        return unit_ball_sdf
    if base == 'synthetic-robin-disk':
        # flat disk meeting a vertical cylinder at a right angle
        return cylinder_sdf
    raise ValidationError(f"No domain oracle for chart {chart_name}", {"chart": chart_name})
