"""
Projected 1D solver: phi'' - phi + p w^{p-1} phi = h + c w_x (+ d Z)
with int phi w_x = 0 (and int phi Z = 0), zero Dirichlet data at +-L.
"""
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu, onenormest

from profile_1d.profile import ProfileTable, apply_operator, trapezoid
from utils.logger import get_logger
from utils.validators import ValidationError, NumericalError

logger = get_logger(__name__)

CONSTRAINTS = ('wx-only', 'wx-and-Z')

# Tail envelope required of right-hand sides: |h| <= max|h| e^{-rate |x|} at |x| >= 0.9 L
TAIL_RATE = 0.05


@dataclass
class ProjectedSolution:
    phi: np.ndarray
    c: np.ndarray
    d: np.ndarray
    residual: float

    def __iter__(self) -> Iterator:
        return iter((self.phi, self.c, self.d))


class ProjectedSolver:
    """
    Factorises the bordered system once; solve() accepts one or many
    right-hand sides (columns of a 2D array).
    """

    def __init__(self, table: ProfileTable, constraints: str = 'wx-only'):
        if constraints not in CONSTRAINTS:
            raise ValidationError(f"Unknown constraint set: {constraints}",
                                  {"constraints": constraints, "known": list(CONSTRAINTS)})
        self.table = table
        self.constraints = constraints
        self.with_Z = constraints == 'wx-and-Z'

        dx = table.dx
        m = table.params.n - 2
        pot = table.potential()[1:-1]
        main = -2.0 / dx ** 2 - 1.0 + pot
        off = np.full(m - 1, 1.0 / dx ** 2)
        Lh = sparse.diags([off, main, off], [-1, 0, 1], format='csc')

        wx = table.w_x[1:-1][:, None]
        blocks = [[Lh, sparse.csc_matrix(-wx)], [sparse.csc_matrix(wx.T * dx), None]]
        if self.with_Z:
            Z = table.Z[1:-1][:, None]
            blocks[0].append(sparse.csc_matrix(-Z))
            blocks[1].append(None)
            blocks.append([sparse.csc_matrix(Z.T * dx), None, None])

        self.matrix = sparse.bmat(blocks, format='csc')
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as e:
            norm1 = float(onenormest(self.matrix))
            raise NumericalError(
                f"Bordered system is singular ({e}); ||A||_1 ~ {norm1:.3e}",
                {"n": table.params.n, "constraints": constraints, "norm1": norm1},
            )
        logger.debug(f"ProjectedSolver factorised: n={table.params.n}, constraints={constraints}")

    def _check_decay(self, h: np.ndarray) -> None:
        x = self.table.x
        L = self.table.params.L
        tail = np.abs(x) >= 0.9 * L
        scale = np.max(np.abs(h), axis=0)
        tail_max = np.max(np.abs(h[tail]), axis=0)
        allowed = scale * np.exp(-TAIL_RATE * 0.9 * L)
        bad = np.nonzero(tail_max > allowed + 1e-300)[0]
        if bad.size:
            j = int(bad[0])
            raise ValidationError(
                f"Right-hand side does not decay: tail max {tail_max[j]:.3e} vs allowed {allowed[j]:.3e}",
                {"column": j, "tail_max": float(tail_max[j]), "allowed": float(allowed[j])},
            )

    def solve(self, h: np.ndarray) -> ProjectedSolution:
        h = np.asarray(h, dtype=float)
        single = h.ndim == 1
        H = h[:, None] if single else h
        if H.shape[0] != self.table.params.n:
            raise ValidationError(f"rhs has {H.shape[0]} rows, grid has {self.table.params.n}",
                                  {"rows": H.shape[0], "n": self.table.params.n})
        self._check_decay(H)

        n_extra = 2 if self.with_Z else 1
        rhs = np.zeros((self.matrix.shape[0], H.shape[1]))
        rhs[:-n_extra] = H[1:-1]
        sol = self._lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise NumericalError("Bordered solve produced non-finite values",
                                 {"n": self.table.params.n, "constraints": self.constraints})

        m = self.table.params.n - 2
        phi = np.zeros_like(H)
        phi[1:-1] = sol[:m]
        c = sol[m]
        d = sol[m + 1] if self.with_Z else np.zeros(H.shape[1])

        lhs = apply_operator(self.table, phi) - c[None, :] * self.table.w_x[:, None] \
            - d[None, :] * self.table.Z[:, None]
        scale = max(1.0, float(np.max(np.abs(H))))
        residual = float(np.max(np.abs(lhs[1:-1] - H[1:-1]))) / scale

        if single:
            return ProjectedSolution(phi[:, 0], float(c[0]), float(d[0]), residual)
        return ProjectedSolution(phi, c, d, residual)


def solve_projected_ode(table: ProfileTable, h: np.ndarray, constraints: str = 'wx-only') -> ProjectedSolution:
    """
    Solve the projected 1D problem for one right-hand side (or a batch).

    Args:
        table: profile table
        h: rhs on the profile grid, shape (n,) or (n, k)
        constraints: 'wx-only' or 'wx-and-Z'

    Returns:
        ProjectedSolution; unpacks as (phi, c, d)
    """
    solution = ProjectedSolver(table, constraints).solve(h)
    logger.debug(f"Projected solve ({constraints}): residual={solution.residual:.2e}")
    return solution


def multiplier_formula(table: ProfileTable, h: np.ndarray) -> float:
    """c = -int h w_x / int w_x^2, the continuous counterpart of the multiplier."""
    return float(-trapezoid(h * table.w_x, table.dx) / table.moments['sigma1'])
