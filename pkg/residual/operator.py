"""
Residual of the layered approximation.

In the interior region (rho >= 2 delta, no boundary layers) the equation in
the stretched normal coordinate x of Gamma_eps reads

    S(U) = U_xx + eps^2 Delta_y U - 2 eps^4 grad f2 . grad_y U_x - eps^4 Delta f2 U_x
           + eps^6 |grad f2|^2 U_xx - U + |U|^{p-1} U

and splits as E11 + E12 with E11 = (eps^3 Delta e + eps lambda0 e) Z and
E12 = O(eps^4).
"""
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from layer_builder.assembly import ApproxSolution
from layer_builder.cutoffs import boundary_cutoff
from surface_spectrum.robin_operator import (
    angular_derivative, laplace_beltrami, radial_derivative,
)
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class ResidualFields:
    S: np.ndarray
    E11: np.ndarray
    E12: np.ndarray
    x: np.ndarray
    rows: np.ndarray
    weights: np.ndarray
    floor: float
    under_resolved: bool


def _stack_laplacian(F: np.ndarray, sol: ApproxSolution) -> np.ndarray:
    return np.stack([laplace_beltrami(F[i], sol.chart, sol.grid) for i in range(F.shape[0])])


def _gradient_dot(f: np.ndarray, G: np.ndarray, sol: ApproxSolution) -> np.ndarray:
    """grad^Gamma f . grad^Gamma G for a surface field f and a stack G (n_x, n_r, n_theta)."""
    grid = sol.grid
    hs = sol.chart.fields_on(grid.r, grid.theta)['hslash']
    fr = radial_derivative(f, grid)
    ft = angular_derivative(f, grid) / grid.r[:, None] ** 2
    out = np.empty_like(G)
    for i in range(G.shape[0]):
        out[i] = fr * radial_derivative(G[i], grid) + ft * angular_derivative(G[i], grid)
    return out / hs[None] ** 2


def interior_rows(sol: ApproxSolution) -> np.ndarray:
    """Radial cells where every boundary layer is cut off."""
    return np.nonzero(boundary_cutoff(1.0 - sol.grid.r, sol.delta) == 0.0)[0]


def apply_operator_S(sol: ApproxSolution) -> ResidualFields:
    """
    S(u4) on the interior region, with its E11/E12 split.

    The x-derivatives of w and Z are closed-form and those of phi2, phi3 come
    from their discrete equations, so the floor is set by rounding.
    """
    eps = sol.eps
    p = sol.profile.p
    lambda0 = sol.profile.lambda0
    grid = sol.grid
    f = sol.fields
    sl = (slice(None), None, None)

    U = sol.interior_fields()
    e = sol.params.e
    lap_e = laplace_beltrami(e, sol.chart, grid)
    lap_f2 = laplace_beltrami(sol.params.f2, sol.chart, grid)
    grad_f2_sq = _gradient_dot(sol.params.f2, sol.params.f2[None], sol)[0]

    lap_U = eps * lap_e[None] * f['Z'][sl] + eps ** 2 * _stack_laplacian(sol._inner('phi2'), sol) \
        + eps ** 3 * _stack_laplacian(sol._inner('phi3'), sol)
    grad_U_x = eps * _gradient_dot(sol.params.f2, e[None] * f['Z_x'][sl], sol) \
        + eps ** 2 * _gradient_dot(sol.params.f2, sol._inner('phi2_x'), sol) \
        + eps ** 3 * _gradient_dot(sol.params.f2, sol._inner('phi3_x'), sol)

    u = U['U']
    S = (U['U_xx'] + eps ** 2 * lap_U - 2.0 * eps ** 4 * grad_U_x
         - eps ** 4 * lap_f2[None] * U['U_x'] + eps ** 6 * grad_f2_sq[None] * U['U_xx']
         - u + np.abs(u) ** (p - 1.0) * u)
    E11 = (eps ** 3 * lap_e + eps * lambda0 * e)[None] * f['Z'][sl]

    rows = interior_rows(sol)
    S, E11 = S[:, rows], E11[:, rows]
    E12 = S - E11

    w = f['w']
    floor = float(np.max(np.abs(f['w_xx'] - w + w ** p)))
    floor = max(floor, sol.inner.multipliers['c2'] * eps ** 2, sol.inner.multipliers['c3'] * eps ** 3)
    e12_max = float(np.max(np.abs(E12)))
    under_resolved = bool(e12_max > 0 and floor > 0.1 * e12_max)
    if under_resolved:
        logger.warning(f"Residual at eps={eps} is dominated by discretization (floor {floor:.2e}, "
                       f"max|E12| {e12_max:.2e})")
    return ResidualFields(S=S, E11=E11, E12=E12, x=sol.x, rows=rows,
                          weights=grid.area_weights()[rows], floor=floor, under_resolved=under_resolved)


def boundary_region_residual(sol: ApproxSolution, etas: List[float]) -> Dict[float, float]:
    """
    max |S| on the edge circle at the given stretched depths, in the
    (x, theta, eta) form: U_xx + hslash^{-2} U_etaeta - U + |U|^{p-1} U with
    the inner part frozen at its boundary trace. Diagnostic only.
    """
    eps = sol.eps
    p = sol.profile.p
    f = sol.fields
    l2 = sol.layers.solver.l2
    e_b = sol.params.boundary('e')
    out = {}
    for eta in etas:
        rho = eps * eta
        cut = float(boundary_cutoff(rho, sol.delta))
        e_rho = e_b['value'] + rho * e_b['d_rho']
        U = f['w'][:, None] + eps * e_rho[None, :] * f['Z'][:, None] + cut * sol.layer_sum(eta)
        U_xx = f['w_xx'][:, None] + eps * e_rho[None, :] * f['Z_xx'][:, None] \
            + cut * np.gradient(np.gradient(sol.layer_sum(eta), sol.layers.solver.dx, axis=0, edge_order=2),
                                sol.layers.solver.dx, axis=0, edge_order=2)
        U_ee = cut * sol.layer_sum(eta, order=2)
        S = U_xx + U_ee / l2 ** 2 - U + np.abs(U) ** (p - 1.0) * U
        out[float(eta)] = float(np.max(np.abs(S[1:-1])))
    return out
