"""
Projections of the residual and eps-scaling scans.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import settings
from layer_builder.assembly import ApproxSolution, assemble_u4
from profile_1d.profile import trapezoid
from residual.norms import WeightedNorm, weighted_norm
from residual.operator import apply_operator_S
from surface_spectrum.robin_operator import laplace_beltrami
from utils.logger import get_logger
from utils.validators import ResonanceError, ValidationError

logger = get_logger(__name__)

MIN_SCAN_POINTS = 3


def project_residual(residual: np.ndarray, x: np.ndarray, w_x: np.ndarray, Z: np.ndarray,
                     sigma1: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    c(z) = int residual w_x dx / int w_x^2 and d(z) = int residual Z dx.

    Args:
        residual: field shaped (n_x, ...)
        x, w_x, Z: x grid and profile fields on it
        sigma1: int w_x^2

    Returns:
        (c_profile, d_profile), each shaped residual.shape[1:]
    """
    dx = float(x[1] - x[0])
    extra = (slice(None),) + (None,) * (residual.ndim - 1)
    c = trapezoid(residual * w_x[extra], dx) / sigma1
    d = trapezoid(residual * Z[extra], dx)
    return c, d


@dataclass
class ScalingRecord:
    eps: List[float]
    rows: List[Dict[str, float]]
    slopes: Dict[str, float]
    flags: Dict[str, bool] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def to_dict(self) -> Dict:
        return {'eps': list(self.eps), 'slopes': dict(self.slopes), 'flags': dict(self.flags)}


def fitted_slope(eps: Sequence[float], values: Sequence[float]) -> float:
    """Log-log slope; NaN when any value is not positive."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        return float('nan')
    return float(np.polyfit(np.log(np.asarray(eps, dtype=float)), np.log(values), 1)[0])


def _check_resonance(eps_list: Sequence[float], rhos: Optional[np.ndarray], lambda0: float) -> None:
    if rhos is None:
        return
    for eps in eps_list:
        lam = eps ** 2 * np.asarray(rhos, dtype=float) - lambda0
        j = int(np.argmin(np.abs(lam)))
        if abs(lam[j]) < settings.GAP_FLOOR:
            raise ResonanceError(j + 1, float(lam[j]), float(eps))


def evaluate_at(base: ApproxSolution, eps: float, spec: WeightedNorm) -> Dict[str, float]:
    """Norms of E11, E12, the boundary data g (0..3 layers) and the Z-projection remainder."""
    sol = base.with_eps(eps)
    res = apply_operator_S(sol)
    f = sol.fields
    row = {
        'eps': float(eps),
        'E11': weighted_norm(res.E11, res.x, spec, res.weights),
        'E12': weighted_norm(res.E12, res.x, spec, res.weights),
    }
    for k in range(4):
        row[f'g{k}'] = weighted_norm(sol.boundary_residual(k), sol.x, spec)
    row['g'] = row['g3']

    c_prof, d_prof = project_residual(res.S, f['x'], f['w_x'], f['Z'], sol.profile.moments['sigma1'])
    e = sol.params.e
    lap_e = laplace_beltrami(e, sol.chart, sol.grid)[res.rows]
    predicted = eps ** 3 * lap_e + eps * sol.profile.lambda0 * e[res.rows]
    row['d_remainder'] = float(np.max(np.abs(d_prof - predicted)))
    row['d_rel_error'] = float(np.max(np.abs(d_prof - predicted)) / max(np.max(np.abs(predicted)), 1e-300))
    row['c_profile'] = float(np.max(np.abs(c_prof)))
    lap_f2 = laplace_beltrami(sol.params.f2, sol.chart, sol.grid)
    A2 = sol.chart.fields_on(sol.grid.r, sol.grid.theta)['A2']
    predicted_c = -eps ** 4 * (lap_f2 + A2 * sol.params.f2)[res.rows]
    row['c_remainder'] = float(np.max(np.abs(c_prof - predicted_c)))
    row['floor'] = res.floor
    row['under_resolved'] = float(res.under_resolved)
    return row


def scaling_scan(base: ApproxSolution, eps_list: Sequence[float] = settings.DEFAULT_EPS_LIST,
                 spec: Optional[WeightedNorm] = None, rhos: Optional[np.ndarray] = None,
                 threads: int = settings.THREADS) -> ScalingRecord:
    """
    Residual norms over an eps sweep and their fitted log-log slopes.

    Args:
        base: a built approximation (its eps is replaced per point)
        eps_list: sweep values
        spec: weighted-norm parameters
        rhos: eigenvalues of the rho-problem; a resonant eps raises ResonanceError
        threads: worker cap

    Returns:
        ScalingRecord with slopes for E11, E12, g, g0..g3 and d_remainder
    """
    spec = (spec or WeightedNorm()).validate()
    eps_list = sorted(float(e) for e in eps_list)
    if len(eps_list) < MIN_SCAN_POINTS:
        raise ValidationError(f"Scaling scan needs at least {MIN_SCAN_POINTS} eps values, got {len(eps_list)}",
                              {"eps_list": eps_list})
    if eps_list[-1] / eps_list[0] < 10.0:
        logger.warning(f"eps sweep spans a factor {eps_list[-1] / eps_list[0]:.1f}, less than a decade")
    _check_resonance(eps_list, rhos, base.profile.lambda0)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda e: evaluate_at(base, e, spec), eps_list))

    keys = ['E11', 'E12', 'g', 'g0', 'g1', 'g2', 'g3', 'd_remainder', 'c_remainder']
    slopes = {k: fitted_slope(eps_list, [r[k] for r in rows]) for k in keys}
    flags = {'under_resolved': any(bool(r['under_resolved']) for r in rows)}
    logger.info("Scaling slopes: " + ", ".join(f"{k}={v:.3f}" for k, v in slopes.items()))
    return ScalingRecord(eps=eps_list, rows=rows, slopes=slopes, flags=flags)


def gluing_defect(base: ApproxSolution, spec: Optional[WeightedNorm] = None,
                  factor: float = 0.2) -> Dict[str, float]:
    """
    Weighted norm of u4 - W for sigma and sigma (1 +- factor). The cutoff only
    acts where u4 is exponentially small, so all three stay near zero.
    """
    spec = (spec or WeightedNorm()).validate()
    out = {}
    for label, s in (('minus', 1.0 - factor), ('base', 1.0), ('plus', 1.0 + factor)):
        moved = replace(base, sigma=base.sigma * s)
        out[label] = weighted_norm(moved.u4() - moved.glued(), moved.x, spec)
    return out


def lipschitz_quotients(base: ApproxSolution, step: float = 1e-2,
                        spec: Optional[WeightedNorm] = None) -> Dict[str, float]:
    """
    ||S(u4[f2 + dh]) - S(u4[f2])|| / ||dh|| and the same in e, with dh a
    relative perturbation of size `step`. Reported only.
    """
    spec = (spec or WeightedNorm()).validate()
    ref = apply_operator_S(base)
    out = {}
    for name in ('f2', 'e'):
        value = getattr(base.params, name)
        size = float(np.max(np.abs(value)))
        if size == 0.0:
            out[name] = 0.0
            continue
        params = replace(base.params, **{name: value * (1.0 + step)})
        moved = assemble_u4(base.profile, base.chart, params, base.eps, base.sigma, base.delta, base.stride)
        diff = apply_operator_S(moved).S - ref.S
        out[name] = weighted_norm(diff, ref.x, spec, ref.weights) / (step * size)
    logger.info(f"Lipschitz quotients at eps={base.eps}: f2 {out['f2']:.3e}, e {out['e']:.3e}")
    return out
