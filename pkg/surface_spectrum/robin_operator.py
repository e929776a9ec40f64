"""
Laplace-Beltrami operators with Robin data on the unit-disk chart.

Discretisation: half-shifted radial cells r_i = (i - 1/2) h (no pole node),
finite-volume radial fluxes and Fourier modes in theta with exact symbol m^2.
The operator acts as

    A f = -hslash^{-2} (f_rr + f_r / r + f_thth / r^2) - V f

with boundary condition d f/d tau + beta I f = 0, tau the inward unit normal,
i.e. f_r = kappa f at r = 1 with kappa = hslash beta I.
"""
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import fft
from scipy.linalg import solve_banded

from config import settings
from geometry.charts import SurfaceChart
from utils.logger import get_logger
from utils.validators import ValidationError, NumericalError

logger = get_logger(__name__)

# Coefficients varying less than this along theta count as axisymmetric
AXISYMMETRY_TOL = settings.FD_COEFF_TOL


@dataclass(frozen=True)
class PolarGrid:
    n_r: int = settings.DEFAULT_N_R
    n_theta: int = settings.DEFAULT_N_THETA

    def __post_init__(self):
        if self.n_r < 4 or self.n_theta < 4 or self.n_theta % 2:
            raise ValidationError(
                f"Polar grid needs n_r >= 4 and even n_theta >= 4, got {self.n_r} x {self.n_theta}",
                {"n_r": self.n_r, "n_theta": self.n_theta},
            )

    @property
    def h(self) -> float:
        return 1.0 / self.n_r

    @property
    def r(self) -> np.ndarray:
        return (np.arange(1, self.n_r + 1) - 0.5) * self.h

    @property
    def faces(self) -> np.ndarray:
        """Radii of the cell faces 0, h, ..., 1."""
        return np.arange(self.n_r + 1) * self.h

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.n_theta // 2 + 1)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_r, self.n_theta

    def area_weights(self) -> np.ndarray:
        """Flat cell areas r h dtheta, shape (n_r, n_theta)."""
        return np.repeat((self.r * self.h * self.dtheta)[:, None], self.n_theta, axis=1)

    def coarsened(self) -> 'PolarGrid':
        return PolarGrid(self.n_r // 2, self.n_theta)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.theta, indexing='ij')


def _face_conductances(grid: PolarGrid) -> Tuple[np.ndarray, np.ndarray]:
    """a_{i-1/2} and a_{i+1/2} = r_face / h per cell; both boundary faces zeroed."""
    a = grid.faces / grid.h
    a_minus = a[:-1].copy()
    a_plus = a[1:].copy()
    a_minus[0] = 0.0
    a_plus[-1] = 0.0
    return a_minus, a_plus


class RobinOperatorDisc:
    """
    Discrete A = -hslash^{-2} Delta - V with Robin weight beta.

    Args:
        chart: surface chart supplying hslash, |A|^2 and I(theta)
        grid: polar grid
        robin_weight: beta (1 for the Jacobi problem, 1/2 for the rho-problem)
        with_potential: V = |A_Gamma|^2 when True, V = 0 otherwise
    """

    def __init__(self, chart: SurfaceChart, grid: Optional[PolarGrid] = None,
                 robin_weight: float = 1.0, with_potential: bool = True):
        self.chart = chart
        self.grid = grid or PolarGrid()
        self.robin_weight = float(robin_weight)
        self.with_potential = with_potential

        fields_ = chart.fields_on(self.grid.r, self.grid.theta)
        self.hslash = fields_['hslash']
        self.potential = fields_['A2'] if with_potential else np.zeros(self.grid.shape)
        if np.any(self.hslash <= 0):
            raise ValidationError(f"Conformal factor of {chart.name} is not positive", {"chart": chart.name})

        theta = self.grid.theta
        hs_edge = np.broadcast_to(chart.hslash(np.cos(theta), np.sin(theta)), theta.shape)
        self.robin_values = np.asarray(chart.robin(theta), dtype=float) * np.ones_like(theta)
        self.kappa = hs_edge * self.robin_weight * self.robin_values
        h = self.grid.h
        if np.any(np.abs(h * self.kappa) >= 1.0):
            raise ValidationError(f"Robin coefficient too large for n_r={self.grid.n_r}",
                                  {"kappa_max": float(np.max(np.abs(self.kappa))), "n_r": self.grid.n_r})

        self._a_minus, self._a_plus = _face_conductances(self.grid)
        self.mass = self.hslash ** 2 * (self.grid.r * h)[:, None]
        logger.debug(f"RobinOperatorDisc on {chart.name}: grid {self.grid.n_r}x{self.grid.n_theta}, "
                     f"beta={self.robin_weight}, axisymmetric={self.axisymmetric}")

    @property
    def axisymmetric(self) -> bool:
        return bool(
            np.ptp(self.hslash, axis=1).max() <= AXISYMMETRY_TOL
            and np.ptp(self.potential, axis=1).max() <= AXISYMMETRY_TOL
            and np.ptp(self.kappa) <= AXISYMMETRY_TOL
        )

    def robin_diagonal(self, kappa=None) -> np.ndarray:
        """Boundary-row contribution -kappa / (1 - h kappa / 2)."""
        kappa = self.kappa if kappa is None else kappa
        return -kappa / (1.0 - 0.5 * self.grid.h * kappa)

    # ------------------------------------------------------------------
    # Per-mode tridiagonals (axisymmetric coefficients)
    # ------------------------------------------------------------------
    def mode_matrix(self, m: int, kappa: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Diagonal, off-diagonal and mass of (S_m - V M) for Fourier mode m.

        Coefficients are averaged along theta; callers must check
        `axisymmetric` (or pass averaged fields through `mean_disc`).
        """
        g = self.grid
        kap = float(np.mean(self.kappa)) if kappa is None else float(kappa)
        diag = self._a_minus + self._a_plus + (m ** 2) * g.h / g.r
        diag = diag - self.potential.mean(axis=1) * self.mass[:, 0]
        diag[-1] += self.robin_diagonal(kap)
        off = -self._a_plus[:-1]
        return diag, off, self.mass[:, 0].copy()

    def symmetric_mode_matrix(self, m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """M^{-1/2}(S_m - V M)M^{-1/2} as (diag, off) plus the scaling M^{-1/2}."""
        diag, off, mass = self.mode_matrix(m)
        d = 1.0 / np.sqrt(mass)
        return diag * d * d, off * d[:-1] * d[1:], d

    def mode_solve(self, m: int, rhs: np.ndarray, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
        """Solve (scale (S_m - V M) - shift M) u = rhs; rhs may be complex or 2D."""
        diag, off, mass = self.mode_matrix(m)
        ab = np.zeros((3, len(diag)))
        ab[0, 1:] = scale * off
        ab[1] = scale * diag - shift * mass
        ab[2, :-1] = scale * off
        try:
            return solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Singular radial system in mode {m}: {e}", {"mode": int(m)})

    # ------------------------------------------------------------------
    # Physical-space action
    # ------------------------------------------------------------------
    def stiffness(self, f: np.ndarray, with_robin: bool = True) -> np.ndarray:
        """S f (flux form, no hslash), spectral in theta."""
        g = self.grid
        fh = fft.rfft(f, axis=1)
        m2 = (g.modes ** 2)[None, :]
        out = (self._a_minus + self._a_plus)[:, None] * fh + (g.h / g.r)[:, None] * m2 * fh
        out[:-1] -= self._a_plus[:-1, None] * fh[1:]
        out[1:] -= self._a_plus[:-1, None] * fh[:-1]
        sf = fft.irfft(out, n=g.n_theta, axis=1)
        if with_robin:
            sf[-1] += self.robin_diagonal() * f[-1]
        return sf

    def weighted_apply(self, f: np.ndarray) -> np.ndarray:
        """(S - V M) f, the symmetric form of the operator."""
        return self.stiffness(f) - self.potential * self.mass * f

    def apply(self, f: np.ndarray) -> np.ndarray:
        """A f = M^{-1}(S - V M) f on a (n_r, n_theta) field."""
        f = np.asarray(f, dtype=float)
        if f.shape != self.grid.shape:
            raise ValidationError(f"Field shape {f.shape} does not match grid {self.grid.shape}",
                                  {"shape": list(f.shape), "grid": list(self.grid.shape)})
        return self.weighted_apply(f) / self.mass

    def boundary_load(self, Xi: np.ndarray) -> np.ndarray:
        """Load vector of the inhomogeneous Robin data d f/d tau + beta I f = Xi."""
        g_edge = self._edge_hslash() * np.asarray(Xi, dtype=float)
        load = np.zeros(self.grid.shape)
        load[-1] = g_edge / (1.0 - 0.5 * self.grid.h * self.kappa)
        return load

    def _edge_hslash(self) -> np.ndarray:
        th = self.grid.theta
        return np.broadcast_to(self.chart.hslash(np.cos(th), np.sin(th)), th.shape).astype(float)

    def forward(self, f: np.ndarray, Xi: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Discrete Jacobi-type action h = -A f with Robin data Xi folded in,
        so that solving with (h, Xi) reproduces f exactly.
        """
        Xi = np.zeros(self.grid.n_theta) if Xi is None else Xi
        return -(self.weighted_apply(f) + self.boundary_load(Xi)) / self.mass

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Area-weighted inner product sum u v hslash^2 r h dtheta."""
        return float(np.sum(u * v * self.mass) * self.grid.dtheta)

    def mean_disc(self) -> 'RobinOperatorDisc':
        """Copy with theta-averaged coefficients (preconditioner for general charts)."""
        twin = object.__new__(RobinOperatorDisc)
        twin.__dict__.update(self.__dict__)
        twin.hslash = np.repeat(self.hslash.mean(axis=1, keepdims=True), self.grid.n_theta, axis=1)
        twin.potential = np.repeat(self.potential.mean(axis=1, keepdims=True), self.grid.n_theta, axis=1)
        twin.kappa = np.full_like(self.kappa, self.kappa.mean())
        twin.mass = twin.hslash ** 2 * (self.grid.r * self.grid.h)[:, None]
        return twin


# ----------------------------------------------------------------------
# Field helpers on the polar grid
# ----------------------------------------------------------------------
def boundary_value(f: np.ndarray) -> np.ndarray:
    """Quadratic extrapolation of f to r = 1 from the last three cells."""
    return (15.0 * f[-1] - 10.0 * f[-2] + 3.0 * f[-3]) / 8.0


def boundary_derivative(f: np.ndarray, grid: PolarGrid) -> np.ndarray:
    """One-sided second-order f_r at r = 1."""
    return (2.0 * f[-1] - 3.0 * f[-2] + f[-3]) / grid.h


def radial_derivative(f: np.ndarray, grid: PolarGrid) -> np.ndarray:
    return np.gradient(f, grid.h, axis=0, edge_order=2)


def angular_derivative(f: np.ndarray, grid: PolarGrid, order: int = 1) -> np.ndarray:
    """Spectral d^order/dtheta^order; the Nyquist mode is dropped for odd orders."""
    fh = fft.rfft(f, axis=1)
    ik = (1j * grid.modes) ** order
    if order % 2:
        ik[-1] = 0.0
    return fft.irfft(fh * ik[None, :], n=grid.n_theta, axis=1)


def polar_laplacian(f: np.ndarray, grid: PolarGrid) -> np.ndarray:
    """
    Flat Laplacian f_rr + f_r/r + f_thth/r^2 in finite-volume form; the
    outer flux uses the one-sided boundary derivative.
    """
    a_minus, a_plus = _face_conductances(grid)
    fh = fft.rfft(f, axis=1)
    m2 = (grid.modes ** 2)[None, :]
    out = (a_minus + a_plus)[:, None] * fh + (grid.h / grid.r)[:, None] * m2 * fh
    out[:-1] -= a_plus[:-1, None] * fh[1:]
    out[1:] -= a_plus[:-1, None] * fh[:-1]
    stiff = fft.irfft(out, n=grid.n_theta, axis=1)
    stiff[-1] -= boundary_derivative(f, grid)
    return -stiff / (grid.r * grid.h)[:, None]


def laplace_beltrami(f: np.ndarray, chart: SurfaceChart, grid: PolarGrid) -> np.ndarray:
    hs = chart.fields_on(grid.r, grid.theta)['hslash']
    return polar_laplacian(f, grid) / hs ** 2


def collar_fields(f: np.ndarray, grid: PolarGrid) -> Dict[str, np.ndarray]:
    """Boundary trace and collar derivative d/drho = -d/dr of a field."""
    return {'value': boundary_value(f), 'd_rho': -boundary_derivative(f, grid)}
