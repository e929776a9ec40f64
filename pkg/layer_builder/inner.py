"""
Inner corrections phi2, phi3 of the layered approximation.

On each surface column z the corrections solve the projected 1D problem

    L phi_i = h_i + c_i w_x,   int phi_i w_x dx = 0,

where h_2, h_3 collect the eps^2, eps^3 terms of the expansion of S(u).
For a flat chart phi2 = e^2 Phi2(x), phi3 = e^3 Phi3(x) with
L Phi2 = -p(p-1)/2 w^{p-2} Z^2 and
L Phi3 = -[p(p-1) w^{p-2} Z Phi2 + p(p-1)(p-2)/6 w^{p-3} Z^3].
Curvature-carrying terms enter through a TermRegistry.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from geometry.charts import SurfaceChart
from profile_1d.profile import ProfileTable, trapezoid
from profile_1d.projected_ode import ProjectedSolver
from surface_spectrum.robin_operator import PolarGrid
from layer_builder.params import LayerParams
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger(__name__)

SOLVABILITY_TOL = 1e-8

TermFn = Callable[['TermContext'], np.ndarray]


@dataclass
class TermContext:
    """What a registered term may read; arrays are (n_x, n_r, n_theta) or (n_r, n_theta)."""
    profile: ProfileTable
    chart: SurfaceChart
    grid: PolarGrid
    params: LayerParams
    surface: Dict[str, np.ndarray]
    phi2: np.ndarray = None


@dataclass
class TermRegistry:
    """Named eps-order terms added to the inner right-hand sides."""
    terms: Dict[int, List[Tuple[str, TermFn]]] = field(default_factory=dict)

    def register(self, order: int, name: str, fn: TermFn) -> None:
        if order not in (2, 3):
            raise ValidationError(f"Inner terms live at order 2 or 3, got {order}", {"order": order, "name": name})
        self.terms.setdefault(order, []).append((name, fn))

    def names(self, order: int) -> List[str]:
        return [name for name, _ in self.terms.get(order, [])]

    def evaluate(self, order: int, ctx: TermContext) -> np.ndarray:
        n = ctx.profile.x.size
        total = np.zeros((n,) + ctx.grid.shape)
        for name, fn in self.terms.get(order, []):
            contrib = fn(ctx)
            if np.any(contrib):
                logger.debug(f"Inner term '{name}' (order {order}): max={np.max(np.abs(contrib)):.3e}")
            total += contrib
        return total


def _curvature_shift(ctx: TermContext) -> np.ndarray:
    # -|A|^2 x w_x: second-order curvature of the parallel surfaces
    return -ctx.surface['A2'][None] * (ctx.profile.x * ctx.profile.w_x)[:, None, None]


def _curvature_e(ctx: TermContext) -> np.ndarray:
    return -(ctx.surface['A2'] * ctx.params.e)[None] * (ctx.profile.x * ctx.profile.Z_x)[:, None, None]


def _mean_curvature_drift(ctx: TermContext) -> np.ndarray:
    return -(ctx.surface['meanK'] * ctx.params.e)[None] * (ctx.profile.x * ctx.profile.w_x)[:, None, None]


def default_registry() -> TermRegistry:
    """Curvature couplings; every coefficient vanishes on flat charts."""
    reg = TermRegistry()
    reg.register(2, 'curvature_shift', _curvature_shift)
    reg.register(3, 'curvature_e', _curvature_e)
    reg.register(3, 'mean_curvature_drift', _mean_curvature_drift)
    return reg


@dataclass
class InnerCorrections:
    phi2: np.ndarray
    phi3: np.ndarray
    phi2_x: np.ndarray
    phi3_x: np.ndarray
    phi2_xx: np.ndarray
    phi3_xx: np.ndarray
    multipliers: Dict[str, float]
    orthogonality: Dict[str, float]

    def __iter__(self):
        return iter((self.phi2, self.phi3))


def _solve_columns(solver: ProjectedSolver, h: np.ndarray, profile: ProfileTable, label: str):
    n = h.shape[0]
    cols = h.reshape(n, -1)
    scale = max(1.0, float(np.max(np.abs(cols))))
    proj = trapezoid(cols * profile.w_x[:, None], profile.dx)
    bad = int(np.argmax(np.abs(proj)))
    if abs(proj[bad]) > SOLVABILITY_TOL * scale:
        raise ValidationError(
            f"Solvability violated for {label}: w_x-projection {proj[bad]:.3e} at column {bad}",
            {"field": label, "column": bad, "projection": float(proj[bad])},
        )
    sol = solver.solve(cols)
    phi = sol.phi.reshape(h.shape)
    c = np.asarray(sol.c).reshape(h.shape[1:])
    # phi_xx from the equation itself, so L phi = h + c w_x holds exactly
    pot = profile.potential()
    phi_xx = h + c[None] * profile.w_x[:, None, None] + phi - pot[:, None, None] * phi
    phi_x = np.gradient(phi, profile.dx, axis=0, edge_order=2)
    return phi, phi_x, phi_xx, c


def inner_corrections(profile: ProfileTable, chart: SurfaceChart, params: LayerParams,
                      registry: TermRegistry = None) -> InnerCorrections:
    """
    phi2, phi3 on (profile x grid) x (polar grid). The eps powers are not
    included; the approximation carries eps^2 phi2 + eps^3 phi3.
    """
    registry = registry if registry is not None else default_registry()
    grid = params.grid
    if np.any(params.f0):
        raise ValidationError("Inner corrections assume f0 = 0 (nondegenerate chart)",
                              {"max_f0": float(np.max(np.abs(params.f0)))})
    p = profile.p
    w, Z = profile.w, profile.Z
    e = params.e
    surface = chart.fields_on(grid.r, grid.theta)
    ctx = TermContext(profile=profile, chart=chart, grid=grid, params=params, surface=surface)
    solver = ProjectedSolver(profile, constraints='wx-only')

    quad = -0.5 * p * (p - 1.0) * w ** (p - 2.0) * Z ** 2
    h2 = quad[:, None, None] * (e ** 2)[None] + registry.evaluate(2, ctx)
    phi2, phi2_x, phi2_xx, c2 = _solve_columns(solver, h2, profile, 'phi2')
    ctx.phi2 = phi2

    cubic = p * (p - 1.0) * (p - 2.0) / 6.0 * w ** (p - 3.0) * Z ** 3
    h3 = -(p * (p - 1.0) * (w ** (p - 2.0) * Z)[:, None, None] * e[None] * phi2
           + cubic[:, None, None] * (e ** 3)[None]) + registry.evaluate(3, ctx)
    phi3, phi3_x, phi3_xx, c3 = _solve_columns(solver, h3, profile, 'phi3')

    orth = {
        'phi2': float(np.max(np.abs(trapezoid(phi2 * profile.w_x[:, None, None], profile.dx)))),
        'phi3': float(np.max(np.abs(trapezoid(phi3 * profile.w_x[:, None, None], profile.dx)))),
    }
    mult = {'c2': float(np.max(np.abs(c2))), 'c3': float(np.max(np.abs(c3)))}
    logger.info(f"Inner corrections: max|phi2|={np.max(np.abs(phi2)):.3e}, max|phi3|={np.max(np.abs(phi3)):.3e}, "
                f"multipliers {mult['c2']:.1e}/{mult['c3']:.1e}, orthogonality {orth['phi2']:.1e}/{orth['phi3']:.1e}")
    return InnerCorrections(phi2=phi2, phi3=phi3, phi2_x=phi2_x, phi3_x=phi3_x,
                            phi2_xx=phi2_xx, phi3_xx=phi3_xx, multipliers=mult, orthogonality=orth)
