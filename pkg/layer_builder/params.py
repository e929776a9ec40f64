"""
Parameter fields of the layered approximation: the normal displacements
f0, f1, f2 and the Z-amplitude e, all sampled on the polar grid of Gamma.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from geometry.charts import SurfaceChart
from profile_1d.profile import ProfileTable, trapezoid
from surface_spectrum.robin_operator import (
    PolarGrid, RobinOperatorDisc, collar_fields, laplace_beltrami,
)
from surface_spectrum.solvers import require_nondegenerate, solve_f_equation
from data.field_io import load_surface_field
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger(__name__)


@dataclass
class LayerParams:
    """
    f0, f1, f2 are displacements in x-units of eps^0, eps^1, eps^2; e is the
    Z-amplitude; d1 is the solvability data of f1 and b1 = int w_x^2.
    """
    grid: PolarGrid
    f0: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    e: np.ndarray
    d1: np.ndarray
    b1: float
    source: str = 'zero'
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def boundary(self, name: str) -> Dict[str, np.ndarray]:
        """Trace and d/drho of a parameter field at r = 1."""
        return collar_fields(getattr(self, name), self.grid)

    def admissibility(self, eps: float) -> Dict[str, float]:
        """Sup norms of f2 and e against the eps^{1/2} admissible radius."""
        radius = float(np.sqrt(eps))
        f2_norm = float(np.max(np.abs(self.f2)))
        e_norm = float(np.max(np.abs(self.e)))
        return {
            'radius': radius,
            'f2_norm': f2_norm,
            'e_norm': e_norm,
            'admissible': bool(f2_norm <= radius and e_norm <= radius),
        }


def solve_f0(chart: SurfaceChart, grid: PolarGrid) -> np.ndarray:
    """
    f0 solves the homogeneous Jacobi problem with Robin data, so it is zero
    on a nondegenerate chart. Raises DegenerateChartError otherwise.
    """
    require_nondegenerate(chart, grid)
    f0 = np.zeros(grid.shape)
    disc = RobinOperatorDisc(chart, grid, robin_weight=1.0, with_potential=True)
    residual = float(np.max(np.abs(disc.forward(f0))))
    if residual != 0.0:
        raise ValidationError(f"Jacobi residual at f0 = 0 is {residual:.3e}", {"residual": residual})
    logger.debug(f"f0 = 0 on {chart.name}")
    return f0


def assemble_d1(profile: ProfileTable, chart: SurfaceChart, grid: PolarGrid, e: np.ndarray) -> np.ndarray:
    """
    w_x-projection of the eps^3 terms carrying no f1: Delta e Z and the
    curvature couplings. Flat charts make every term odd in x.
    """
    lap_e = laplace_beltrami(e, chart, grid)
    A2 = chart.fields_on(grid.r, grid.theta)['A2']
    zwx = float(trapezoid(profile.Z * profile.w_x, profile.dx))
    xw2 = float(trapezoid(profile.x * profile.w_x ** 2, profile.dx))
    return lap_e * zwx + A2 * e * xw2


def solve_f1(chart: SurfaceChart, d1: np.ndarray, b1: float, grid: PolarGrid,
             Xi: Optional[np.ndarray] = None) -> np.ndarray:
    """Delta f1 + |A|^2 f1 = d1 / b1 with the Jacobi Robin condition."""
    if b1 <= 0:
        raise ValidationError(f"b1 = int w_x^2 must be positive, got {b1}", {"b1": b1})
    return solve_f_equation(chart, np.asarray(d1, dtype=float) / b1, Xi, grid)


def _robin_disk_quadratic(r: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """1 + r^2 k / (2 - k): satisfies f_r = k f at r = 1."""
    if np.any(np.abs(2.0 - kappa) < 1e-8):
        raise ValidationError("Unit parameter field undefined at Robin coefficient 2", {"kappa": kappa.tolist()})
    return 1.0 + r[:, None] ** 2 * kappa[None, :] / (2.0 - kappa[None, :])


def unit_fields(chart: SurfaceChart, grid: PolarGrid) -> Dict[str, np.ndarray]:
    """
    Unit-scale f2 and e meeting their boundary conditions exactly:
    f2_r = I f2 and e_r = (I/2) e at r = 1.
    """
    I = np.asarray(chart.robin(grid.theta), dtype=float) * np.ones(grid.n_theta)
    return {
        'f2': _robin_disk_quadratic(grid.r, I),
        'e': _robin_disk_quadratic(grid.r, 0.5 * I),
    }


def build_params(profile: ProfileTable, chart: SurfaceChart, grid: PolarGrid,
                 mode: str = 'unit', f2_file: Optional[str] = None,
                 e_file: Optional[str] = None) -> LayerParams:
    """
    Parameter set for a build.

    Args:
        mode: 'unit' (unit-scale fields), 'zero' or 'file'
        f2_file, e_file: CSV fields on Gamma used by mode 'file' (missing file -> zero)

    Returns:
        LayerParams with f0 = 0 certified and f1 from its solvability condition
    """
    if mode == 'unit':
        fields_ = unit_fields(chart, grid)
        f2, e = fields_['f2'], fields_['e']
    elif mode == 'zero':
        f2, e = np.zeros(grid.shape), np.zeros(grid.shape)
    elif mode == 'file':
        f2 = load_surface_field(f2_file, grid.r, grid.theta) if f2_file else np.zeros(grid.shape)
        e = load_surface_field(e_file, grid.r, grid.theta) if e_file else np.zeros(grid.shape)
    else:
        raise ValidationError(f"Unknown parameter mode: {mode}", {"mode": mode})

    f0 = solve_f0(chart, grid)
    b1 = float(profile.moments['sigma1'])
    d1 = assemble_d1(profile, chart, grid, e)
    f1 = solve_f1(chart, d1, b1, grid)
    params = LayerParams(grid=grid, f0=f0, f1=f1, f2=f2, e=e, d1=d1, b1=b1, source=mode)
    params.diagnostics = {
        'source': mode,
        'n_r': grid.n_r,
        'n_theta': grid.n_theta,
        'max_abs_f1': float(np.max(np.abs(f1))),
        'max_abs_d1': float(np.max(np.abs(d1))),
    }
    logger.info(f"Parameters ({mode}) on {chart.name}: max|f2|={np.max(np.abs(f2)):.3f}, "
                f"max|e|={np.max(np.abs(e)):.3f}, max|f1|={params.diagnostics['max_abs_f1']:.2e}")
    return params
