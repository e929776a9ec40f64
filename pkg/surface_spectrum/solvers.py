"""
Spectral checks and linear solves on Gamma.

Jacobi problem : J f = Delta^Gamma f + |A|^2 f, d f/d tau + I f = 0      (beta = 1)
rho-problem    : -Delta^Gamma w = rho w,        d w/d tau + I w / 2 = 0  (beta = 1/2)
e-equation     : -eps^2 Delta^Gamma e - lambda0 e = g with the rho-problem boundary.

With A = -hslash^{-2} Delta - V the Jacobi eigenvalues are -eig(A).
"""
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd
from scipy import fft
from scipy.linalg import eigh_tridiagonal, LinAlgError
from scipy.sparse.linalg import LinearOperator, gmres

from config import settings
from geometry.charts import SurfaceChart
from surface_spectrum.robin_operator import PolarGrid, RobinOperatorDisc
from utils.logger import get_logger
from utils.validators import (ValidationError, NumericalError, ResonanceError,
                              DegenerateChartError)

logger = get_logger(__name__)

SOLVE_RESIDUAL_TOL = 1e-9
GMRES_RTOL = 1e-12
MIN_WEYL_COUNT = 50


def _mode_eigh(disc: RobinOperatorDisc, m: int, vectors: bool = False):
    diag, off, d = disc.symmetric_mode_matrix(m)
    try:
        if vectors:
            vals, vecs = eigh_tridiagonal(diag, off)
            return vals, vecs, d
        return eigh_tridiagonal(diag, off, eigvals_only=True)
    except (LinAlgError, ValueError) as e:
        raise NumericalError(f"Radial eigensolve failed in mode {m} on {disc.grid.n_r}x{disc.grid.n_theta}: {e}",
                             {"mode": int(m), "n_r": disc.grid.n_r, "n_theta": disc.grid.n_theta})


def _require_axisymmetric(disc: RobinOperatorDisc, what: str) -> None:
    if not disc.axisymmetric:
        raise ValidationError(f"{what} needs theta-independent coefficients; chart {disc.chart.name} has none",
                              {"chart": disc.chart.name})


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """First entry above 1e-12 of the max modulus made positive (per column)."""
    v = np.array(v, dtype=float)
    cols = v if v.ndim == 2 else v[:, None]
    for k in range(cols.shape[1]):
        col = cols[:, k]
        idx = np.nonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))[0]
        if idx.size and col[idx[0]] < 0:
            cols[:, k] = -col
    return cols if v.ndim == 2 else cols[:, 0]


# ----------------------------------------------------------------------
# Nondegeneracy
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class NondegeneracyResult:
    chart: str
    min_abs_eigenvalue: float
    jacobi_eigenvalue: float
    mode: int
    extrapolated: float
    discretization_estimate: float
    scale: float
    tol: float
    threshold: float
    degenerate: bool
    n_r: int
    n_theta: int

    @property
    def verdict(self) -> str:
        return 'degenerate' if self.degenerate else 'nondegenerate'

    def to_dict(self) -> Dict:
        return {
            'chart': self.chart,
            'min_abs_eigenvalue': self.min_abs_eigenvalue,
            'jacobi_eigenvalue': self.jacobi_eigenvalue,
            'mode': self.mode,
            'extrapolated': self.extrapolated,
            'discretization_estimate': self.discretization_estimate,
            'scale': self.scale,
            'tol': self.tol,
            'threshold': self.threshold,
            'verdict': self.verdict,
            'n_r': self.n_r,
            'n_theta': self.n_theta,
        }


def neumann_scale(chart: SurfaceChart, grid: PolarGrid) -> float:
    """First nonzero Neumann eigenvalue of -Delta^Gamma (lowest of mode 1)."""
    disc = RobinOperatorDisc(chart, grid, robin_weight=0.0, with_potential=False)
    return float(_mode_eigh(disc, 1)[0])


def nondegeneracy_check(chart: SurfaceChart, tol: float = settings.DEGENERACY_TOL,
                        grid: Optional[PolarGrid] = None) -> NondegeneracyResult:
    """
    Smallest-magnitude eigenvalue of the Jacobi operator with Robin weight 1.

    Each Fourier mode is solved on the grid and on its radial coarsening.
    A mode is degenerate when its eigenvalue closest to zero is below
    tol * scale plus the change between the two grids, scale being the
    first nonzero Neumann eigenvalue.
    """
    grid = grid or PolarGrid()
    fine = RobinOperatorDisc(chart, grid, robin_weight=1.0, with_potential=True)
    _require_axisymmetric(fine, "Nondegeneracy check")
    coarse = RobinOperatorDisc(chart, grid.coarsened(), robin_weight=1.0, with_potential=True)
    scale = neumann_scale(chart, grid)

    best = None
    degenerate = False
    for m in grid.modes:
        vals_h = _mode_eigh(fine, int(m))
        vals_2h = _mode_eigh(coarse, int(m))
        k = int(np.argmin(np.abs(vals_h)))
        lam_h = float(vals_h[k])
        lam_2h = float(vals_2h[min(k, len(vals_2h) - 1)])
        estimate = abs(lam_h - lam_2h)
        if abs(lam_h) < tol * scale + estimate:
            degenerate = True
        if best is None or abs(lam_h) < abs(best[1]):
            best = (int(m), lam_h, lam_2h, estimate)

    m, lam_h, lam_2h, estimate = best
    result = NondegeneracyResult(
        chart=chart.name, min_abs_eigenvalue=abs(lam_h), jacobi_eigenvalue=-lam_h, mode=m,
        extrapolated=(4.0 * lam_h - lam_2h) / 3.0, discretization_estimate=estimate,
        scale=scale, tol=tol, threshold=tol * scale + estimate, degenerate=degenerate,
        n_r=grid.n_r, n_theta=grid.n_theta,
    )
    logger.info(f"Nondegeneracy {chart.name}: min|lambda|={abs(lam_h):.3e} (mode {m}), "
                f"threshold={result.threshold:.3e} -> {result.verdict}")
    return result


def require_nondegenerate(chart: SurfaceChart, grid: Optional[PolarGrid] = None,
                          tol: float = settings.DEGENERACY_TOL) -> NondegeneracyResult:
    result = nondegeneracy_check(chart, tol, grid)
    if result.degenerate:
        raise DegenerateChartError(chart.name, result.jacobi_eigenvalue, result.mode)
    return result


# ----------------------------------------------------------------------
# Spectra
# ----------------------------------------------------------------------
@dataclass
class RobinSpectrum:
    """
    Ascending eigenvalues with eigenfields kept as radial vectors and
    Fourier labels; eigenfield(j) synthesises the field on the grid.
    """
    eigenvalues: np.ndarray
    modes: np.ndarray
    kinds: np.ndarray
    radial: np.ndarray
    grid: PolarGrid
    disc: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def angular(self, j: int) -> np.ndarray:
        m, kind, theta = int(self.modes[j]), self.kinds[j], self.grid.theta
        if m == 0 or 2 * m == self.grid.n_theta:
            return np.cos(m * theta) / np.sqrt(2.0 * np.pi)
        if kind == 'cos':
            return np.cos(m * theta) / np.sqrt(np.pi)
        return np.sin(m * theta) / np.sqrt(np.pi)

    def eigenfield(self, j: int) -> np.ndarray:
        return self.radial[j][:, None] * self.angular(j)[None, :]

    def eigenfields(self) -> np.ndarray:
        return np.stack([self.eigenfield(j) for j in range(len(self))])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'j': np.arange(1, len(self) + 1),
            'rho': self.eigenvalues,
            'm': self.modes,
            'kind': self.kinds,
        })


def _labelled_spectrum(disc: RobinOperatorDisc, vectors: bool):
    g = disc.grid
    values, modes, kinds, index, radial = [], [], [], [], []
    for m in g.modes:
        m = int(m)
        if vectors:
            vals, vecs, d = _mode_eigh(disc, m, vectors=True)
            radial.append(_fix_sign(vecs * d[:, None]))
        else:
            vals = _mode_eigh(disc, m)
        labels = ['cos'] if m == 0 or 2 * m == g.n_theta else ['cos', 'sin']
        for kind in labels:
            values.append(vals)
            modes.append(np.full(len(vals), m))
            kinds.append(np.full(len(vals), kind))
            index.append(np.arange(len(vals)))
    values = np.concatenate(values)
    modes = np.concatenate(modes)
    kinds = np.concatenate(kinds)
    index = np.concatenate(index)
    order = np.lexsort((kinds == 'sin', modes, values))
    return values[order], modes[order], kinds[order], index[order], radial


def rho_spectrum(chart: SurfaceChart, count: int, robin_weight: float = 0.5,
                 grid: Optional[PolarGrid] = None) -> RobinSpectrum:
    """
    First `count` eigenvalues of -Delta^Gamma with d w/d tau + beta I w = 0.

    Args:
        chart: axisymmetric surface chart
        count: number of eigenvalues, at most n_r * n_theta / 4
        robin_weight: beta
        grid: polar grid (defaults from settings)

    Returns:
        RobinSpectrum
    """
    grid = grid or PolarGrid()
    capacity = grid.n_r * grid.n_theta // 4
    if count < 1 or count > capacity:
        raise ValidationError(
            f"count={count} outside the resolved range [1, {capacity}] of a {grid.n_r}x{grid.n_theta} grid",
            {"count": count, "capacity": capacity, "n_r": grid.n_r, "n_theta": grid.n_theta},
        )
    disc = RobinOperatorDisc(chart, grid, robin_weight=robin_weight, with_potential=False)
    _require_axisymmetric(disc, "rho_spectrum")

    values, modes, kinds, index, radial = _labelled_spectrum(disc, vectors=True)
    values, modes, kinds, index = values[:count], modes[:count], kinds[:count], index[:count]
    radial_sel = np.stack([radial[m][:, k] for m, k in zip(modes, index)])

    spectrum = RobinSpectrum(
        eigenvalues=values, modes=modes, kinds=kinds, radial=radial_sel, grid=grid,
        disc={'chart': chart.name, 'n_r': grid.n_r, 'n_theta': grid.n_theta,
              'robin_weight': robin_weight, 'count': count},
    )
    logger.info(f"rho-spectrum {chart.name} (beta={robin_weight}): {count} values, "
                f"rho_1={values[0]:.6f}, rho_{count}={values[-1]:.4f}")
    return spectrum


def full_spectrum(chart: SurfaceChart, robin_weight: float = 0.5,
                  grid: Optional[PolarGrid] = None) -> np.ndarray:
    """Every discrete eigenvalue (with multiplicity), ascending."""
    grid = grid or PolarGrid()
    disc = RobinOperatorDisc(chart, grid, robin_weight=robin_weight, with_potential=False)
    _require_axisymmetric(disc, "full_spectrum")
    return _labelled_spectrum(disc, vectors=False)[0]


@dataclass(frozen=True)
class WeylFit:
    fitted_slope: float
    fitted_constant: float
    expected_constant: float
    relative_error: float
    n_used: int

    def to_dict(self) -> Dict[str, float]:
        return {
            'fitted_slope': self.fitted_slope,
            'fitted_constant': self.fitted_constant,
            'expected_constant': self.expected_constant,
            'relative_error': self.relative_error,
            'n_used': self.n_used,
        }


def weyl_fit(spectrum, area: float, perimeter: Optional[float] = None) -> WeylFit:
    """
    Fit rho_i against i on the upper half of the spectrum.

    fitted_slope is the log-log exponent (about 1 in two dimensions);
    fitted_constant the linear growth rate, compared with 4 pi / area.
    With a perimeter the index is first corrected by the boundary term,
    i -> i - perimeter sqrt(rho_i) / (4 pi).
    """
    rhos = np.asarray(getattr(spectrum, 'eigenvalues', spectrum), dtype=float)
    if len(rhos) < MIN_WEYL_COUNT:
        raise ValidationError(f"Weyl fit needs at least {MIN_WEYL_COUNT} eigenvalues, got {len(rhos)}",
                              {"count": len(rhos)})
    i = np.arange(1, len(rhos) + 1, dtype=float)
    upper = (i > len(rhos) // 2) & (rhos > 0)
    if perimeter is not None:
        i = i - perimeter * np.sqrt(np.clip(rhos, 0.0, None)) / (4.0 * np.pi)
        upper &= i > 0
    exponent = float(np.polyfit(np.log(i[upper]), np.log(rhos[upper]), 1)[0])
    constant = float(np.polyfit(i[upper], rhos[upper], 1)[0])
    expected = 4.0 * np.pi / area
    fit = WeylFit(exponent, constant, expected, abs(constant - expected) / expected, int(upper.sum()))
    logger.info(f"Weyl fit: exponent={exponent:.4f}, constant={constant:.4f} (expected {expected:.4f})")
    return fit


# ----------------------------------------------------------------------
# Linear solves
# ----------------------------------------------------------------------
def _grid_for(field_: np.ndarray, grid: Optional[PolarGrid]) -> PolarGrid:
    field_ = np.asarray(field_)
    if grid is None:
        return PolarGrid(*field_.shape)
    if field_.shape != grid.shape:
        raise ValidationError(f"Field shape {field_.shape} does not match grid {grid.shape}",
                              {"shape": list(field_.shape), "grid": list(grid.shape)})
    return grid


def _mode_wise(disc: RobinOperatorDisc, rhs: np.ndarray, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
    g = disc.grid
    rh = fft.rfft(rhs, axis=1)
    out = np.empty_like(rh)
    for m in g.modes:
        out[:, m] = disc.mode_solve(int(m), rh[:, m], shift=shift, scale=scale)
    return fft.irfft(out, n=g.n_theta, axis=1)


def _gmres(disc: RobinOperatorDisc, rhs: np.ndarray, shift: float, scale: float, what: str) -> np.ndarray:
    g = disc.grid
    n = g.n_r * g.n_theta
    mean = disc.mean_disc()

    def matvec(v):
        f = v.reshape(g.shape)
        return (scale * disc.weighted_apply(f) - shift * disc.mass * f).ravel()

    def precond(v):
        return _mode_wise(mean, v.reshape(g.shape), shift, scale).ravel()

    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    P = LinearOperator((n, n), matvec=precond, dtype=float)
    sol, info = gmres(A, rhs.ravel(), rtol=GMRES_RTOL, atol=0.0, M=P, restart=60, maxiter=400)
    if info != 0:
        raise NumericalError(f"GMRES did not converge for {what} on {disc.chart.name} (info={info})",
                             {"info": int(info), "chart": disc.chart.name})
    return sol.reshape(g.shape)


def _check_residual(disc, f, rhs, shift, scale, what) -> float:
    lhs = scale * disc.weighted_apply(f) - shift * disc.mass * f
    res = float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1e-300))
    if np.any(~np.isfinite(f)) or (np.max(np.abs(rhs)) > 0 and res > SOLVE_RESIDUAL_TOL):
        raise NumericalError(f"{what} residual {res:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e}",
                             {"residual": res, "chart": disc.chart.name})
    return res


def solve_f_equation(chart: SurfaceChart, h: np.ndarray, Xi: Optional[np.ndarray] = None,
                     grid: Optional[PolarGrid] = None, check: bool = True) -> np.ndarray:
    """
    Solve Delta^Gamma f + |A|^2 f = h with d f/d tau + I f = Xi.

    Args:
        chart: nondegenerate chart
        h: right-hand side on the polar grid (n_r, n_theta)
        Xi: boundary data on the theta nodes (defaults to 0)
        grid: polar grid (inferred from h when omitted)
        check: run the nondegeneracy check first

    Returns:
        f on the polar grid
    """
    h = np.asarray(h, dtype=float)
    grid = _grid_for(h, grid)
    Xi = np.zeros(grid.n_theta) if Xi is None else np.asarray(Xi, dtype=float)
    disc = RobinOperatorDisc(chart, grid, robin_weight=1.0, with_potential=True)

    if check and disc.axisymmetric:
        require_nondegenerate(chart, grid)
    elif check:
        logger.warning(f"Nondegeneracy of {chart.name} not screened: coefficients vary along theta, "
                       f"solving the f-equation by GMRES without the check")

    rhs = -disc.mass * h - disc.boundary_load(Xi)
    if not np.any(rhs):
        return np.zeros(grid.shape)
    if disc.axisymmetric:
        f = _mode_wise(disc, rhs)
    else:
        f = _gmres(disc, rhs, 0.0, 1.0, "f-equation")
    res = _check_residual(disc, f, rhs, 0.0, 1.0, "f-equation")
    logger.debug(f"f-equation solved on {chart.name}: residual={res:.2e}, max|f|={np.max(np.abs(f)):.3e}")
    return f


def e_operator(chart: SurfaceChart, grid: PolarGrid) -> RobinOperatorDisc:
    return RobinOperatorDisc(chart, grid, robin_weight=0.5, with_potential=False)


def solve_e_equation(chart: SurfaceChart, eps: float, g: np.ndarray, lambda0: float,
                     grid: Optional[PolarGrid] = None,
                     gap_floor: float = settings.GAP_FLOOR) -> np.ndarray:
    """
    Solve -eps^2 Delta^Gamma e - lambda0 e = g with d e/d tau + I e / 2 = 0
    by eigen-expansion in each Fourier mode.

    Raises ResonanceError when some |eps^2 rho_j - lambda0| < gap_floor.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}", {"eps": eps})
    g = np.asarray(g, dtype=float)
    grid = _grid_for(g, grid)
    disc = e_operator(chart, grid)
    rhs = disc.mass * g

    if not disc.axisymmetric:
        logger.warning(f"e-equation on non-axisymmetric {chart.name}: no resonance screening, GMRES solve")
        e = _gmres(disc, rhs, lambda0, eps ** 2, "e-equation")
        _check_residual(disc, e, rhs, lambda0, eps ** 2, "e-equation")
        return e

    bases = {int(m): _mode_eigh(disc, int(m), vectors=True) for m in grid.modes}
    lam_all = {m: eps ** 2 * vals - lambda0 for m, (vals, _, _) in bases.items()}
    worst_m = min(lam_all, key=lambda m: np.min(np.abs(lam_all[m])))
    worst = lam_all[worst_m][np.argmin(np.abs(lam_all[worst_m]))]
    if abs(worst) < gap_floor:
        rhos = np.sort(np.concatenate([
            np.repeat(vals, 1 if m == 0 or 2 * m == grid.n_theta else 2) for m, (vals, _, _) in bases.items()
        ]))
        rho_bad = (worst + lambda0) / eps ** 2
        j = int(np.searchsorted(rhos, rho_bad - 1e-9 * max(1.0, abs(rho_bad)))) + 1
        raise ResonanceError(j, float(worst), eps)

    rh = fft.rfft(rhs, axis=1)
    out = np.empty_like(rh)
    for m, (vals, vecs, d) in bases.items():
        coeff = vecs.T @ (d * rh[:, m])
        out[:, m] = d * (vecs @ (coeff / lam_all[m]))
    e = fft.irfft(out, n=grid.n_theta, axis=1)
    res = _check_residual(disc, e, rhs, lambda0, eps ** 2, "e-equation")
    logger.debug(f"e-equation solved: eps={eps}, min gap={abs(worst):.3e}, residual={res:.2e}")
    return e


def min_gap(chart: SurfaceChart, eps: float, lambda0: float, grid: Optional[PolarGrid] = None) -> float:
    rhos = full_spectrum(chart, 0.5, grid)
    return float(np.min(np.abs(eps ** 2 * rhos - lambda0)))


@dataclass
class CoupledSolution:
    f2: np.ndarray
    e: np.ndarray
    lift: np.ndarray

    def __iter__(self):
        return iter((self.f2, self.e))


def solve_coupled_system(chart: SurfaceChart, eps: float, h: np.ndarray, g: np.ndarray,
                         Xi: Optional[np.ndarray], lambda0: float,
                         grid: Optional[PolarGrid] = None) -> CoupledSolution:
    """
    Decoupled solve of the (f2, e) system. The Robin data Xi is carried by
    the lift solving the Jacobi problem with h = 0; f2 = f_tilde + lift.
    """
    h = np.asarray(h, dtype=float)
    grid = _grid_for(h, grid)
    Xi = np.zeros(grid.n_theta) if Xi is None else np.asarray(Xi, dtype=float)
    require_nondegenerate(chart, grid)

    lift = solve_f_equation(chart, np.zeros(grid.shape), Xi, grid, check=False)
    f_tilde = solve_f_equation(chart, h, None, grid, check=False)
    e = solve_e_equation(chart, eps, g, lambda0, grid)
    logger.info(f"Coupled system on {chart.name} at eps={eps}: max|f2|={np.max(np.abs(f_tilde + lift)):.3e}, "
                f"max|e|={np.max(np.abs(e)):.3e}")
    return CoupledSolution(f_tilde + lift, e, lift)
