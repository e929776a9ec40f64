"""
Weighted norms ||h||_{q,varrho} = sup e^{varrho |x|} ||h||_{L^q(B((x,z),1))}.

The unit ball is replaced by the box [x-1, x+1] x (sampled surface region,
area 4): the local L^q norm is (2 * 4 * mean |h|^q)^{1/q} with the mean taken
over the x-window and the area-weighted surface samples; q = inf takes the
maximum instead. This is a constant-equivalent norm.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import maximum_filter1d, uniform_filter1d

from config import settings
from utils.validators import ValidationError

BOX_AREA = 4.0
WINDOW_HALF_WIDTH = 1.0


@dataclass(frozen=True)
class WeightedNorm:
    q: float = settings.DEFAULT_Q
    varrho: float = settings.DEFAULT_VARRHO
    region: str = 'interior'

    def validate(self) -> 'WeightedNorm':
        if not (self.q > 4.0):
            raise ValidationError(f"q must exceed 4, got {self.q}", {"q": self.q})
        if not (0.0 < self.varrho < 0.01):
            raise ValidationError(f"varrho must lie in (0, 1/100), got {self.varrho}", {"varrho": self.varrho})
        return self


def weighted_norm(field: np.ndarray, x: np.ndarray, spec: WeightedNorm,
                  weights: Optional[np.ndarray] = None) -> float:
    """
    Args:
        field: samples shaped (n_x, ...) with x along the first axis
        x: uniform x grid
        spec: norm parameters
        weights: surface quadrature weights matching field.shape[1:] (uniform if None)

    Returns:
        the weighted norm
    """
    spec.validate()
    field = np.asarray(field, dtype=float)
    if field.shape[0] != x.size:
        raise ValidationError(f"Field has {field.shape[0]} x-rows, grid has {x.size}",
                              {"rows": field.shape[0], "n_x": x.size})
    flat = np.abs(field.reshape(x.size, -1))
    if not np.any(flat):
        return 0.0
    dx = float(x[1] - x[0])
    size = 2 * int(round(WINDOW_HALF_WIDTH / dx)) + 1

    if np.isinf(spec.q):
        local = maximum_filter1d(flat.max(axis=1), size=size, mode='constant', cval=0.0)
    else:
        wts = np.ones(flat.shape[1]) if weights is None else np.asarray(weights, dtype=float).ravel()
        wts = wts / wts.sum()
        surface_mean = flat ** spec.q @ wts
        window_mean = uniform_filter1d(surface_mean, size=size, mode='constant', cval=0.0)
        local = (2.0 * WINDOW_HALF_WIDTH * BOX_AREA * window_mean) ** (1.0 / spec.q)
    return float(np.max(np.exp(spec.varrho * np.abs(x)) * local))
