"""
Bessel-root oracle for -Delta f = rho f on the unit disk with f_r = kappa f.

Positive rho = s^2 solve s J_m'(s) = kappa J_m(s); negative rho = -mu^2
exist for kappa > m and solve mu I_m'(mu) = kappa I_m(mu); rho = 0 when
kappa = m (the harmonic r^m). Modes m >= 1 count twice (cos and sin).
"""
from typing import List, Tuple

import numpy as np
from scipy import special
from scipy.optimize import brentq

from utils.logger import get_logger
from utils.validators import NumericalError, ValidationError

logger = get_logger(__name__)

SCAN_STEP = 0.01
ZERO_KAPPA_TOL = 1e-12


def _bracketed_root(fn, a: float, b: float) -> float:
    try:
        return brentq(fn, a, b, xtol=1e-14, rtol=1e-14)
    except (ValueError, RuntimeError) as e:
        raise NumericalError(f"Bessel root search failed on [{a:.6g}, {b:.6g}]: {e}",
                             {"lo": float(a), "hi": float(b)})


def _scan_roots(fn, lo: float, hi: float, step: float = SCAN_STEP) -> List[float]:
    grid = np.arange(lo, hi + step, step)
    vals = fn(grid)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            roots.append(_bracketed_root(fn, a, b))
    return roots


def mode_eigenvalues(m: int, kappa: float, s_max: float) -> List[float]:
    """All rho <= s_max^2 of Fourier mode m, ascending."""
    rhos = []
    if kappa > m + ZERO_KAPPA_TOL:
        # exactly one negative eigenvalue: mu I_m'/I_m rises from m to infinity
        g = lambda mu: mu * special.ivp(m, mu) - kappa * special.iv(m, mu)
        hi = 1.0
        while g(hi) < 0:
            hi *= 2.0
        mu = _bracketed_root(g, 1e-12, hi)
        rhos.append(-mu ** 2)
    elif abs(kappa - m) <= ZERO_KAPPA_TOL:
        rhos.append(0.0)

    f = lambda s: s * special.jvp(m, s) - kappa * special.jv(m, s)
    # no positive root lies below m / 2, where J_m may underflow
    rhos.extend(s ** 2 for s in _scan_roots(f, max(1e-3, 0.5 * m), s_max))
    return sorted(rhos)


def robin_disk_eigenvalues(kappa: float, count: int, hslash: float = 1.0) -> np.ndarray:
    """
    First `count` eigenvalues (with multiplicity) of -hslash^{-2} Delta on the
    unit disk with f_r = kappa f at r = 1.

    Args:
        kappa: boundary coefficient hslash * beta * I
        count: number of eigenvalues
        hslash: constant conformal factor

    Returns:
        Ascending array of length count
    """
    if count < 1:
        raise ValidationError(f"count must be positive, got {count}", {"count": count})

    s_max = 2.0 * np.sqrt(4.0 * count) + 10.0
    while True:
        values: List[Tuple[float, int]] = []
        for m in range(int(np.ceil(s_max)) + 2):
            mult = 1 if m == 0 else 2
            for rho in mode_eigenvalues(m, kappa, s_max):
                values.extend([(rho, m)] * mult)
        values.sort()
        if len(values) >= count and values[count - 1][0] < s_max ** 2:
            break
        s_max *= 1.5

    out = np.array([v for v, _ in values[:count]]) / hslash ** 2
    logger.debug(f"Bessel oracle: kappa={kappa}, count={count}, rho_1={out[0]:.6f}, rho_last={out[-1]:.4f}")
    return out


def smallest_magnitude(kappa: float, hslash: float = 1.0, count: int = 40) -> Tuple[float, int]:
    """(rho, m) of the eigenvalue closest to zero."""
    best = None
    for m in range(count):
        for rho in mode_eigenvalues(m, kappa, 20.0):
            if best is None or abs(rho) < abs(best[0]):
                best = (rho, m)
    return best[0] / hslash ** 2, best[1]
