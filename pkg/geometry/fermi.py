"""
Modified Fermi coordinates around Gamma and the boundary coefficients
of the collar (theta, rho) near the boundary curve.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

from config import settings
from geometry.charts import (SurfaceChart, fermi_point_raw, expansion_coefficients,
                             principal_curvatures, isothermal_residual, _collar_derivatives,
                             collar_point)
from utils.logger import get_logger
from utils.validators import ValidationError, InvariantChecker

logger = get_logger(__name__)

COEFF_NAMES = ('l1', 'l2', 'A', 'C', 'E', 'R', 'I', 'F', 'M')


@dataclass(frozen=True)
class FermiMap:
    chart: SurfaceChart
    r0: float = settings.DEFAULT_TUBE_RADIUS
    delta: float = settings.DEFAULT_EXTENSION_MARGIN

    def q1(self, y1, y2) -> np.ndarray:
        return expansion_coefficients(self.chart, y1, y2)[0]

    def q2(self, y1, y2) -> np.ndarray:
        return expansion_coefficients(self.chart, y1, y2)[1]


@dataclass(frozen=True)
class BoundaryCoeffs:
    l1: float
    l2: float
    A: float
    C: float
    E: float
    R: float
    I: float
    F: float
    M: float

    def to_dict(self) -> Dict[str, float]:
        return {k: float(getattr(self, k)) for k in COEFF_NAMES}


def fermi_point(fmap: FermiMap, r: float, y) -> np.ndarray:
    """gamma(r, y) = gamma0(Y(r, y)) + r nu(Y(r, y)) for |r| < r0, |y| < 1 + delta."""
    y = np.asarray(y, dtype=float)
    if abs(r) >= fmap.r0:
        raise ValidationError(f"r={r} outside the tube radius {fmap.r0}", {"r": r, "r0": fmap.r0})
    if np.linalg.norm(y) >= 1.0 + fmap.delta:
        raise ValidationError(f"|y|={np.linalg.norm(y):.4f} outside the extended disk",
                              {"y": y.tolist(), "delta": fmap.delta})
    return fermi_point_raw(fmap.chart, np.asarray(r), y[0], y[1])


def fermi_remainder_ratios(fmap: FermiMap, y, radii) -> np.ndarray:
    """|gamma(r, y) - (gamma0 + r nu + r^2 q1/2 + r^3 q2/6)| / r^4 for each r."""
    y = np.asarray(y, dtype=float)
    chart = fmap.chart
    g0 = chart.gamma0(y[0], y[1])
    nu = chart.normal(y[0], y[1])
    q1, q2 = expansion_coefficients(chart, y[0], y[1])
    ratios = []
    for r in radii:
        exact = fermi_point(fmap, r, y)
        approx = g0 + r * nu + 0.5 * r ** 2 * q1 + r ** 3 * q2 / 6.0
        ratios.append(np.linalg.norm(exact - approx) / r ** 4)
    return np.array(ratios)


def boundary_metric_coeffs(chart: SurfaceChart, theta: float) -> BoundaryCoeffs:
    """
    Collar coefficients at (theta, rho = 0).

    l1 = |G_theta|, l2 = |G_rho| with G = gamma0(collar(theta, rho));
    A = <G_rr, G_r>, C = <G_tr, G_t>, E = <G_tr, G_r>, R = <G_tt, G_t>;
    I = <q1, G_r>/l2^2 (unless the chart overrides it), F = <q1, G_t>;
    M = <G_t, nu_r> + <G_r, nu_t>.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    raw = _collar_derivatives(chart, th)
    ortho = float(raw['orthogonality'][0])
    if ortho > settings.COLLAR_ORTHOGONALITY_TOL:
        raise ValidationError(
            f"Collar is not orthogonal at theta={float(th[0]):.4f}: |cos angle| = {ortho:.3e}",
            {"theta": float(th[0]), "orthogonality": ortho},
        )
    values = {k: float(raw[k][0]) for k in COEFF_NAMES}
    if chart.robin_override is not None:
        values['I'] = float(np.asarray(chart.robin_override(th))[0])
    if values['l1'] <= 0 or values['l2'] <= 0:
        raise ValidationError("Degenerate collar speeds", values)
    return BoundaryCoeffs(**values)


def boundary_table(chart: SurfaceChart, n_theta: int) -> pd.DataFrame:
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rows = []
    for th in thetas:
        row = {'theta': th}
        row.update(boundary_metric_coeffs(chart, th).to_dict())
        rows.append(row)
    return pd.DataFrame(rows, columns=['theta', *COEFF_NAMES])


def check_orthogonal_intersection(fmap: FermiMap, sdf: Callable[[np.ndarray], np.ndarray],
                                  samples: int = 64) -> float:
    """
    Max deviation from a right angle between Gamma and the domain boundary.

    At each sampled boundary point the deviation is arcsin |<nu, n>| where n
    is the normalised finite-difference gradient of the signed distance.
    """
    if samples <= 0:
        raise ValidationError(f"samples must be positive, got {samples}", {"samples": samples})
    chart = fmap.chart
    thetas = 2.0 * np.pi * np.arange(samples) / samples
    y1, y2 = collar_point(thetas, np.zeros_like(thetas))
    pts = chart.gamma0(y1, y2)
    nu = chart.normal(y1, y2)

    h = settings.FD_STEP
    grad = np.zeros_like(pts)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        grad[:, k] = (sdf(pts + e) - sdf(pts - e)) / (2 * h)
    n = grad / np.linalg.norm(grad, axis=-1, keepdims=True)
    cosines = np.clip(np.abs(np.sum(nu * n, axis=-1)), 0.0, 1.0)
    deviation = float(np.max(np.arcsin(cosines)))
    logger.info(f"Orthogonal intersection check on {chart.name}: max deviation {deviation:.3e} rad")
    return deviation


def geometry_report(fmap: FermiMap, sdf: Callable, samples: int = 64) -> InvariantChecker:
    """All geometric invariants of a chart, as a named-check report."""
    chart = fmap.chart
    checker = InvariantChecker(f"Geometry check: {chart.name}")

    rad = np.linspace(0.0, 0.95, 8)
    ang = 2.0 * np.pi * np.arange(samples) / samples
    rr, tt = np.meshgrid(rad, ang, indexing='ij')
    y1, y2 = rr * np.cos(tt), rr * np.sin(tt)

    checker.add('isothermal_residual', isothermal_residual(chart, y1, y2), 1e-8)
    nu = chart.normal(y1, y2)
    checker.add('normal_unit_defect', float(np.max(np.abs(np.linalg.norm(nu, axis=-1) - 1.0))), 1e-12)
    k1, k2 = principal_curvatures(chart, y1, y2)
    checker.add('mean_curvature_max', float(np.max(np.abs(k1 + k2))), 1e-8)
    A2 = chart.A2(y1, y2)
    checker.add('A2_consistency', float(np.max(np.abs(A2 - (k1 ** 2 + k2 ** 2)))), 1e-6)

    q1, q2 = expansion_coefficients(chart, y1, y2)
    checker.add('q1_normal_component', float(np.max(np.abs(np.sum(q1 * nu, axis=-1)))), 1e-8)
    checker.add('q2_normal_component', float(np.max(np.abs(np.sum(q2 * nu, axis=-1)))), 1e-8)

    ratios = fermi_remainder_ratios(fmap, np.array([0.5, 0.0]), [0.2, 0.1, 0.05, 0.025])
    checker.add('fermi_remainder_ratio_growth', float(ratios[-1] / max(ratios[0], 1e-300)), 2.0)

    table = boundary_table(chart, samples)
    checker.add('collar_speed_min', float(min(table['l1'].min(), table['l2'].min())), 0.0, mode='ge')
    checker.add('orthogonal_intersection', check_orthogonal_intersection(fmap, sdf, samples), 1e-8)
    return checker


def coefficient_names() -> List[str]:
    return list(COEFF_NAMES)
