"""
Boundary-layer terms Psi_1, Psi_2, Psi_3 near the edge of Gamma.

In the stretched collar variable eta = rho / eps the approximation must
satisfy, at eta = 0,

    g(u) = d_eta u + eps I t u_x + eps^3 f2_rho u_x - eps^3 b5 t^3 u_x = 0,
    t = x + eps^2 f2.

Expanding order by order gives the Neumann data D_i each Psi_i must carry
(d_eta Psi_i(0) = D_i):

    D1 = -I x w_x
    D2 = -e_rho Z - I x e Z_x - I x Psi1_x
    D3 = -d_rho phi2 - I x phi2_x - I x Psi2_x - (I f2 + f2_rho) w_x + b5 x^3 w_x

Psi_i = phi_i1 + phi_i2: phi_i1 = (c_i / omega) sin(omega eta) q_Z carries the
Z-projection c_i, phi_i2 solves the strip problem for the rest.
"""
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from config import settings
from geometry.charts import SurfaceChart
from profile_1d.profile import ProfileTable, subsample
from strip_linear.strip_solver import NeumannLayer, StripSolver
from surface_spectrum.robin_operator import boundary_derivative, boundary_value
from layer_builder.inner import InnerCorrections
from layer_builder.params import LayerParams
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger(__name__)


def _collar_trace(F: np.ndarray, params: LayerParams) -> Dict[str, np.ndarray]:
    """Trace and d/drho at r = 1 of a field shaped (n_x, n_r, n_theta)."""
    Fr = np.moveaxis(F, 1, 0)
    return {'value': boundary_value(Fr), 'd_rho': -boundary_derivative(Fr, params.grid)}


@dataclass
class BoundaryLayers:
    solver: StripSolver
    layers: List[NeumannLayer]
    data: List[np.ndarray]
    c0_closed: np.ndarray
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def value(self, i: int, eta: float, order: int = 0) -> np.ndarray:
        """order-th eta derivative of Psi_i (i = 1, 2, 3), shape (n_x, n_theta)."""
        if i not in (1, 2, 3):
            raise ValidationError(f"Boundary layer index must be 1, 2 or 3, got {i}", {"index": i})
        return self.layers[i - 1].value(eta, order)

    def x_derivative(self, i: int, eta: float = 0.0) -> np.ndarray:
        return np.gradient(self.value(i, eta), self.solver.dx, axis=0, edge_order=2)


def build_boundary_layers(profile: ProfileTable, chart: SurfaceChart, params: LayerParams,
                          inner: InnerCorrections, stride: int = settings.LAYER_X_STRIDE) -> BoundaryLayers:
    """
    Psi_1..Psi_3 on (x every `stride` nodes) x (theta nodes of the parameter grid).
    """
    grid = params.grid
    theta = grid.theta
    hs_edge = np.broadcast_to(chart.hslash(np.cos(theta), np.sin(theta)), theta.shape).astype(float)
    if np.ptp(hs_edge) > 1e-12:
        logger.warning(f"Conformal factor varies along the edge of {chart.name}; using its mean for the layers")
    solver = StripSolver(profile, l1=np.inf, l2=float(np.mean(hs_edge)), stride=stride, n_theta=grid.n_theta)

    fields_ = subsample(profile, stride)
    X = fields_['x'][:, None]
    w_x = fields_['w_x'][:, None]
    Z = fields_['Z'][:, None]
    Z_x = fields_['Z_x'][:, None]
    I = (np.asarray(chart.robin(theta), dtype=float) * np.ones(grid.n_theta))[None, :]

    e = params.boundary('e')
    f2 = params.boundary('f2')
    phi2 = _collar_trace(inner.phi2[::stride], params)
    phi2_x = _collar_trace(inner.phi2_x[::stride], params)['value']

    D1 = -I * X * w_x
    L1 = solver.solve_neumann_layer(D1)
    psi1_x = np.gradient(L1.value(0.0), solver.dx, axis=0, edge_order=2)

    D2 = -e['d_rho'][None, :] * Z - I * X * e['value'][None, :] * Z_x - I * X * psi1_x
    L2 = solver.solve_neumann_layer(D2)
    psi2_x = np.gradient(L2.value(0.0), solver.dx, axis=0, edge_order=2)

    robin_defect = I * f2['value'][None, :] + f2['d_rho'][None, :]
    D3 = (-phi2['d_rho'] - I * X * phi2_x - I * X * psi2_x
          - robin_defect * w_x + chart.b5 * X ** 3 * w_x)
    L3 = solver.solve_neumann_layer(D3)

    c0_closed = I[0] * profile.moments['xwxZ']
    layers = [L1, L2, L3]
    diagnostics = {
        'c0_closed_mean': float(np.mean(c0_closed)),
        'c0_discrete_mean': float(np.mean(-L1.c)),
        'f2_robin_defect': float(np.max(np.abs(robin_defect))),
    }
    for i, (layer, D) in enumerate(zip(layers, (D1, D2, D3)), start=1):
        diagnostics[f'k{i}_max'] = float(np.max(np.abs(layer.k)))
        diagnostics[f'data_residual_{i}'] = layer.data_residual(D)
    logger.info(f"Boundary layers on {chart.name}: c0={diagnostics['c0_closed_mean']:.4f} "
                f"(discrete {diagnostics['c0_discrete_mean']:.4f}), "
                f"w_x defects {diagnostics['k1_max']:.1e}/{diagnostics['k2_max']:.1e}/{diagnostics['k3_max']:.1e}")
    return BoundaryLayers(solver=solver, layers=layers, data=[D1, D2, D3],
                          c0_closed=c0_closed, diagnostics=diagnostics)
