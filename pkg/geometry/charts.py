"""
Surface charts over the unit disk.

A SurfaceChart bundles closed-form evaluators for an isothermal
parametrisation gamma0 of Gamma, its normal, conformal factor and
curvatures, the slice map Y(r, y) used by the modified Fermi coordinates,
and the boundary interaction coefficient I(theta).
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional, Dict, Tuple

import numpy as np

from config import settings
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger(__name__)

ArrayFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Spread below which a sampled coefficient counts as constant
CONSTANT_TOL = settings.FD_COEFF_TOL


@dataclass(frozen=True)
class SurfaceChart:
    """
    Chart of Gamma over the unit disk (with an extension margin).

    gamma0(y1, y2)      -> (..., 3) points
    normal(y1, y2)      -> (..., 3) unit normals
    hslash(y1, y2)      -> conformal factor
    A2(y1, y2)          -> |A_Gamma|^2
    meanK(y1, y2)       -> k1 + k2
    slice_map(r, y1, y2) -> (Y1, Y2), with Y(0, y) = y
    robin_override(theta) -> I(theta) replacing the geometric value, or None
    b5                  -> cubic coefficient of the collar Neumann operator
    """
    name: str
    gamma0: ArrayFn
    normal: ArrayFn
    hslash: ArrayFn
    A2: ArrayFn
    meanK: ArrayFn
    slice_map: Callable
    robin_override: Optional[Callable[[np.ndarray], np.ndarray]]
    b5: float
    area: float
    axisymmetric: bool = True
    margin: float = settings.DEFAULT_EXTENSION_MARGIN

    def rescaled(self, s: float) -> 'SurfaceChart':
        """Chart of s * Gamma: hslash -> s hslash, I -> I / s, area -> s^2 area."""
        if s <= 0:
            raise ValidationError(f"Scale must be positive, got {s}", {"scale": s})
        g0, nu, hs, a2, mk = self.gamma0, self.normal, self.hslash, self.A2, self.meanK
        robin = self.robin_override
        base_robin = robin if robin is not None else (lambda th: robin_coefficient(self, th))
        return replace(
            self,
            name=f"{self.name}*{s:g}",
            gamma0=lambda y1, y2: s * g0(y1, y2),
            hslash=lambda y1, y2: s * hs(y1, y2),
            A2=lambda y1, y2: a2(y1, y2) / s ** 2,
            meanK=lambda y1, y2: mk(y1, y2) / s,
            slice_map=lambda r, y1, y2: self.slice_map(r / s, y1, y2),
            robin_override=lambda th: np.asarray(base_robin(th)) / s,
            b5=self.b5 / s ** 3,
            area=self.area * s ** 2,
        )

    def perimeter(self, n_theta: int = 256) -> float:
        """Length of the boundary circle in the metric hslash^2 |dy|^2."""
        theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
        hs = np.broadcast_to(self.hslash(np.cos(theta), np.sin(theta)), theta.shape)
        return float(2.0 * np.pi * np.mean(hs))

    def robin(self, theta: np.ndarray) -> np.ndarray:
        """I(theta) on the boundary circle."""
        return robin_coefficient(self, theta)

    def fields_on(self, r: np.ndarray, theta: np.ndarray) -> Dict[str, np.ndarray]:
        """hslash, A2 and meanK on a polar tensor grid (len(r), len(theta))."""
        rr, tt = np.meshgrid(r, theta, indexing='ij')
        y1, y2 = rr * np.cos(tt), rr * np.sin(tt)
        shape = rr.shape
        return {
            'hslash': np.broadcast_to(self.hslash(y1, y2), shape).astype(float),
            'A2': np.broadcast_to(self.A2(y1, y2), shape).astype(float),
            'meanK': np.broadcast_to(self.meanK(y1, y2), shape).astype(float),
        }


def _flat_gamma0(y1, y2):
    y1, y2 = np.broadcast_arrays(np.asarray(y1, dtype=float), np.asarray(y2, dtype=float))
    return np.stack([y1, y2, np.zeros_like(y1)], axis=-1)


def _flat_normal(y1, y2):
    y1, y2 = np.broadcast_arrays(np.asarray(y1, dtype=float), np.asarray(y2, dtype=float))
    return np.stack([np.zeros_like(y1), np.zeros_like(y1), np.ones_like(y1)], axis=-1)


def _ones(y1, y2):
    return np.ones(np.broadcast(np.asarray(y1), np.asarray(y2)).shape)


def _zeros(y1, y2):
    return np.zeros(np.broadcast(np.asarray(y1), np.asarray(y2)).shape)


def _ball_slice(r, y1, y2):
    # the r-slice of the unit ball is a disk of radius sqrt(1 - r^2)
    s = np.sqrt(1.0 - np.asarray(r, dtype=float) ** 2)
    return s * y1, s * y2


def _identity_slice(r, y1, y2):
    return np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)


def builtin_chart(name: str, c: Optional[float] = None) -> SurfaceChart:
    """
    Built-in test geometries.

    Args:
        name: 'equatorial-disk-in-ball' or 'synthetic-robin-disk'
        c: Robin coefficient I(theta) = c for the synthetic chart

    Returns:
        SurfaceChart
    """
    if name == 'equatorial-disk-in-ball':
        chart = SurfaceChart(
            name=name, gamma0=_flat_gamma0, normal=_flat_normal, hslash=_ones,
            A2=_zeros, meanK=_zeros, slice_map=_ball_slice, robin_override=None,
            b5=1.0, area=np.pi,
        )
    elif name == 'synthetic-robin-disk':
        if c is None:
            raise ValidationError("synthetic-robin-disk needs a Robin coefficient c", {"chart": name})
        value = float(c)
        chart = SurfaceChart(
            name=f"{name}:{value:g}", gamma0=_flat_gamma0, normal=_flat_normal, hslash=_ones,
            A2=_zeros, meanK=_zeros, slice_map=_identity_slice,
            robin_override=lambda th: np.full(np.shape(th), value),
            b5=0.0, area=np.pi,
        )
    else:
        raise ValidationError(f"Unknown chart: {name}", {"chart": name})

    logger.debug(f"Built chart {chart.name}")
    return chart


def chart_from_spec(spec: str) -> SurfaceChart:
    from config.run_config import parse_chart_spec
    name, c = parse_chart_spec(spec)
    return builtin_chart(name, c)


# ----------------------------------------------------------------------
# Finite-difference geometry
# ----------------------------------------------------------------------
def collar_point(theta, rho):
    """Collar coordinates: y = (1 - rho)(cos theta, sin theta)."""
    return (1.0 - rho) * np.cos(theta), (1.0 - rho) * np.sin(theta)


def fermi_point_raw(chart: SurfaceChart, r, y1, y2) -> np.ndarray:
    """gamma(r, y) = gamma0(Y(r, y)) + r nu(Y(r, y)), no range checks."""
    Y1, Y2 = chart.slice_map(r, y1, y2)
    r = np.asarray(r, dtype=float)
    return chart.gamma0(Y1, Y2) + r[..., None] * chart.normal(Y1, Y2)


def expansion_coefficients(chart: SurfaceChart, y1, y2):
    """q1 = d^2 gamma/dr^2 and q2 = d^3 gamma/dr^3 at r = 0 by central differences."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    h = settings.FD_STEP
    g = lambda r: fermi_point_raw(chart, np.full(np.shape(y1), r), y1, y2)
    q1 = (g(h) - 2.0 * g(0.0) + g(-h)) / h ** 2
    h3 = settings.FD_STEP_THIRD
    q2 = (g(2 * h3) - 2.0 * g(h3) + 2.0 * g(-h3) - g(-2 * h3)) / (2.0 * h3 ** 3)
    return q1, q2


def principal_curvatures(chart: SurfaceChart, y1, y2):
    """(k1, k2) from the finite-difference second fundamental form."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    h = settings.FD_STEP
    g = chart.gamma0
    nu = chart.normal(y1, y2)
    g11 = (g(y1 + h, y2) - 2.0 * g(y1, y2) + g(y1 - h, y2)) / h ** 2
    g22 = (g(y1, y2 + h) - 2.0 * g(y1, y2) + g(y1, y2 - h)) / h ** 2
    g12 = (g(y1 + h, y2 + h) - g(y1 + h, y2 - h) - g(y1 - h, y2 + h) + g(y1 - h, y2 - h)) / (4 * h ** 2)
    h11 = np.sum(g11 * nu, axis=-1)
    h22 = np.sum(g22 * nu, axis=-1)
    h12 = np.sum(g12 * nu, axis=-1)
    metric = chart.hslash(y1, y2) ** 2
    # isothermal metric: shape operator = second fundamental form / hslash^2
    tr = (h11 + h22) / metric
    det = (h11 * h22 - h12 ** 2) / metric ** 2
    disc = np.sqrt(np.maximum(0.25 * tr ** 2 - det, 0.0))
    return 0.5 * tr + disc, 0.5 * tr - disc


def isothermal_residual(chart: SurfaceChart, y1, y2) -> float:
    """max of ||g_1| - hslash|, ||g_2| - hslash| and |<g_1, g_2>|."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    h = settings.FD_STEP
    g = chart.gamma0
    d1 = (g(y1 + h, y2) - g(y1 - h, y2)) / (2 * h)
    d2 = (g(y1, y2 + h) - g(y1, y2 - h)) / (2 * h)
    hs = chart.hslash(y1, y2)
    res = max(
        float(np.max(np.abs(np.linalg.norm(d1, axis=-1) - hs))),
        float(np.max(np.abs(np.linalg.norm(d2, axis=-1) - hs))),
        float(np.max(np.abs(np.sum(d1 * d2, axis=-1)))),
    )
    return res


def robin_coefficient(chart: SurfaceChart, theta) -> np.ndarray:
    """I(theta) = <q1, d gamma0/d rho> / l2^2, or the chart's override."""
    theta = np.asarray(theta, dtype=float)
    if chart.robin_override is not None:
        return np.asarray(chart.robin_override(theta), dtype=float)
    coeffs = _collar_derivatives(chart, theta)
    return coeffs['I']


def _collar_derivatives(chart: SurfaceChart, theta: np.ndarray) -> Dict[str, np.ndarray]:
    h = settings.FD_STEP
    zero = np.zeros_like(theta)

    def G(th, rho):
        return chart.gamma0(*collar_point(th, rho))

    def N(th, rho):
        return chart.normal(*collar_point(th, rho))

    G_t = (G(theta + h, zero) - G(theta - h, zero)) / (2 * h)
    G_r = (G(theta, zero + h) - G(theta, zero - h)) / (2 * h)
    G_tt = (G(theta + h, zero) - 2 * G(theta, zero) + G(theta - h, zero)) / h ** 2
    G_rr = (G(theta, zero + h) - 2 * G(theta, zero) + G(theta, zero - h)) / h ** 2
    G_tr = (G(theta + h, zero + h) - G(theta + h, zero - h)
            - G(theta - h, zero + h) + G(theta - h, zero - h)) / (4 * h ** 2)
    N_t = (N(theta + h, zero) - N(theta - h, zero)) / (2 * h)
    N_r = (N(theta, zero + h) - N(theta, zero - h)) / (2 * h)

    dot = lambda a, b: np.sum(a * b, axis=-1)
    l1 = np.linalg.norm(G_t, axis=-1)
    l2 = np.linalg.norm(G_r, axis=-1)
    y1, y2 = collar_point(theta, zero)
    q1, _ = expansion_coefficients(chart, y1, y2)

    return {
        'l1': l1, 'l2': l2,
        'A': dot(G_rr, G_r), 'C': dot(G_tr, G_t), 'E': dot(G_tr, G_r), 'R': dot(G_tt, G_t),
        'I': dot(q1, G_r) / l2 ** 2, 'F': dot(q1, G_t),
        'M': dot(G_t, N_r) + dot(G_r, N_t),
        'orthogonality': np.abs(dot(G_t, G_r)) / (l1 * l2),
    }


def constant_coefficients(chart: SurfaceChart) -> Optional[Tuple[float, float]]:
    """(hslash, I) when both are constant on the chart, else None."""
    theta = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
    hs = chart.fields_on(np.linspace(0.0, 1.0, 9), theta)['hslash']
    I = np.asarray(chart.robin(theta), dtype=float) * np.ones_like(theta)
    if np.ptp(hs) > CONSTANT_TOL or np.ptp(I) > CONSTANT_TOL:
        return None
    return float(hs.flat[0]), float(I[0])
