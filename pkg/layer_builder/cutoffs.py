"""Smooth cutoffs shared by the strip solver and the layer assembly."""
import numpy as np


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    inner = np.clip(t, 1e-12, 1.0 - 1e-12)
    a = np.exp(-1.0 / inner)
    b = np.exp(-1.0 / (1.0 - inner))
    out = a / (a + b)
    return np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, out))


def chi0(t) -> np.ndarray:
    """1 on [0, 1], 0 beyond 2."""
    return 1.0 - smooth_step(np.asarray(t, dtype=float) - 1.0)


def boundary_cutoff(rho, delta: float) -> np.ndarray:
    """chi0(rho / delta) in the collar coordinate rho = 1 - r."""
    return chi0(np.asarray(rho, dtype=float) / delta)


def x_cutoff(x, L: float) -> np.ndarray:
    """1 for |x| <= L/2, 0 for |x| >= 0.8 L."""
    return 1.0 - smooth_step((np.abs(np.asarray(x, dtype=float)) - 0.5 * L) / (0.3 * L))


def gluing_cutoff(distance, sigma: float) -> np.ndarray:
    """eta_{3 sigma}: 1 within 3 sigma of Gamma_eps, 0 beyond 6 sigma."""
    return chi0(np.abs(np.asarray(distance, dtype=float)) / (3.0 * sigma))
