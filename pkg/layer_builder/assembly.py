"""
Assembly of the layered approximation

    u4 = w(x) + eps e Z + eps^2 phi2 + eps^3 phi3 + chi0(rho/delta) sum_i eps^i Psi_i

and its glued global version W = eta_{3 sigma}(eps |t|) u4, t = x + eps^2 f2.
Inner corrections and boundary layers do not depend on eps, so one build
serves a whole eps sweep through ApproxSolution.with_eps.
"""
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np
import pandas as pd

from config import settings
from geometry.charts import SurfaceChart
from profile_1d.profile import ProfileTable, subsample
from layer_builder.boundary_layers import BoundaryLayers, _collar_trace, build_boundary_layers
from layer_builder.cutoffs import boundary_cutoff, gluing_cutoff
from layer_builder.inner import InnerCorrections, TermRegistry, inner_corrections
from layer_builder.params import LayerParams
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger(__name__)

TAIL_START = 5.0
TAIL_RATE = 0.9


@dataclass(frozen=True)
class ApproxSolution:
    profile: ProfileTable
    chart: SurfaceChart
    params: LayerParams
    eps: float
    sigma: float
    delta: float
    stride: int
    fields: Dict[str, np.ndarray]
    inner: InnerCorrections
    layers: BoundaryLayers

    @property
    def x(self) -> np.ndarray:
        return self.fields['x']

    @property
    def grid(self):
        return self.params.grid

    def with_eps(self, eps: float) -> 'ApproxSolution':
        _check_eps(eps)
        return replace(self, eps=float(eps))

    def _inner(self, name: str) -> np.ndarray:
        return getattr(self.inner, name)[::self.stride]

    def interior_fields(self) -> Dict[str, np.ndarray]:
        """U, U_x, U_xx of the inner part on (n_x, n_r, n_theta)."""
        eps = self.eps
        f = self.fields
        e = self.params.e[None]
        sl = (slice(None), None, None)
        U = f['w'][sl] + eps * e * f['Z'][sl] + eps ** 2 * self._inner('phi2') + eps ** 3 * self._inner('phi3')
        U_x = f['w_x'][sl] + eps * e * f['Z_x'][sl] + eps ** 2 * self._inner('phi2_x') \
            + eps ** 3 * self._inner('phi3_x')
        U_xx = f['w_xx'][sl] + eps * e * f['Z_xx'][sl] + eps ** 2 * self._inner('phi2_xx') \
            + eps ** 3 * self._inner('phi3_xx')
        return {'U': U, 'U_x': U_x, 'U_xx': U_xx}

    def layer_sum(self, eta: float, order: int = 0, n_layers: int = 3) -> np.ndarray:
        return sum(self.eps ** i * self.layers.value(i, eta, order) for i in range(1, n_layers + 1))

    def u4(self) -> np.ndarray:
        """Full approximation on (n_x, n_r, n_theta); layers enter where rho < 2 delta."""
        u = self.interior_fields()['U'].copy()
        rho = 1.0 - self.grid.r
        cut = boundary_cutoff(rho, self.delta)
        for k in np.nonzero(cut > 0)[0]:
            u[:, k, :] += cut[k] * self.layer_sum(rho[k] / self.eps)
        return u

    def distance(self) -> np.ndarray:
        """eps |t| with t = x + eps^2 f2, shape (n_x, n_r, n_theta)."""
        return self.eps * np.abs(self.x[:, None, None] + self.eps ** 2 * self.params.f2[None])

    def glued(self) -> np.ndarray:
        return gluing_cutoff(self.distance(), self.sigma) * self.u4()

    def boundary_residual(self, n_layers: int = 3) -> np.ndarray:
        """
        g(u) at eta = 0 on (n_x, n_theta) with the first n_layers boundary
        layers included; the x endpoints are zeroed.
        """
        if n_layers not in (0, 1, 2, 3):
            raise ValidationError(f"n_layers must be 0..3, got {n_layers}", {"n_layers": n_layers})
        eps = self.eps
        f = self.fields
        X = self.x[:, None]
        chart_I = (np.asarray(self.chart.robin(self.grid.theta), dtype=float) * np.ones(self.grid.n_theta))[None, :]
        e = self.params.boundary('e')
        f2 = self.params.boundary('f2')
        phi2 = _collar_trace(self._inner('phi2'), self.params)
        phi3 = _collar_trace(self._inner('phi3'), self.params)
        phi2_x = _collar_trace(self._inner('phi2_x'), self.params)['value']
        phi3_x = _collar_trace(self._inner('phi3_x'), self.params)['value']

        u_x = f['w_x'][:, None] + eps * e['value'][None, :] * f['Z_x'][:, None] + eps ** 2 * phi2_x + eps ** 3 * phi3_x
        u_eta = eps ** 2 * e['d_rho'][None, :] * f['Z'][:, None] + eps ** 3 * phi2['d_rho'] + eps ** 4 * phi3['d_rho']
        for i in range(1, n_layers + 1):
            u_x = u_x + eps ** i * self.layers.x_derivative(i)
            u_eta = u_eta + eps ** i * self.layers.value(i, 0.0, 1)

        t = X + eps ** 2 * f2['value'][None, :]
        g = u_eta + eps * chart_I * t * u_x + eps ** 3 * f2['d_rho'][None, :] * u_x \
            - eps ** 3 * self.chart.b5 * t ** 3 * u_x
        g[0] = 0.0
        g[-1] = 0.0
        return g

    def orthogonality(self) -> Dict[str, float]:
        return dict(self.inner.orthogonality)

    def positivity(self) -> Dict[str, float]:
        """min W / w on the support of the gluing cutoff where w > 1e-3 (the leading term dominates)."""
        W = self.glued()
        w = self.fields['w'][:, None, None] * np.ones_like(W)
        support = (gluing_cutoff(self.distance(), self.sigma) > 0) & (w > 1e-3)
        ratio = float(np.min(W[support] / w[support])) if np.any(support) else float('nan')
        return {'min_ratio': ratio, 'positive': bool(ratio > 0)}

    def tail_bound(self) -> Dict[str, float]:
        """Smallest C with |u4| <= C e^{-0.9 |x|} for |x| >= 5."""
        env = np.max(np.abs(self.u4()).reshape(self.x.size, -1), axis=1)
        tail = np.abs(self.x) >= TAIL_START
        C = float(np.max(env[tail] * np.exp(TAIL_RATE * np.abs(self.x[tail]))))
        return {'C': C, 'rate': TAIL_RATE, 'start': TAIL_START}

    def centerline_frame(self, theta_index: int = 0) -> pd.DataFrame:
        """u4, phi2, phi3 on (x, r) at one theta node, long format."""
        u = self.u4()[:, :, theta_index]
        xx, rr = np.meshgrid(self.x, self.grid.r, indexing='ij')
        return pd.DataFrame({
            'x': xx.ravel(), 'r': rr.ravel(),
            'theta': np.full(xx.size, self.grid.theta[theta_index]),
            'u4': u.ravel(),
            'phi2': self._inner('phi2')[:, :, theta_index].ravel(),
            'phi3': self._inner('phi3')[:, :, theta_index].ravel(),
        })

    def boundary_frame(self) -> pd.DataFrame:
        """Neumann data D_i and g with all layers, long format over (x, theta)."""
        xx, tt = np.meshgrid(self.x, self.grid.theta, indexing='ij')
        frame = {'x': xx.ravel(), 'theta': tt.ravel()}
        for i, D in enumerate(self.layers.data, start=1):
            frame[f'D{i}'] = D.ravel()
        frame['g'] = self.boundary_residual(3).ravel()
        return pd.DataFrame(frame)

    def diagnostics(self) -> Dict:
        return {
            'eps': self.eps,
            'sigma': self.sigma,
            'delta': self.delta,
            'orthogonality': self.orthogonality(),
            'multipliers': dict(self.inner.multipliers),
            'boundary_layers': dict(self.layers.diagnostics),
            'params': dict(self.params.diagnostics),
            'admissibility': self.params.admissibility(self.eps),
            'positivity': self.positivity(),
            'tail': self.tail_bound(),
        }


def _check_eps(eps: float) -> None:
    if not (0.0 < eps < 0.5):
        raise ValidationError(f"eps must lie in (0, 0.5), got {eps}", {"eps": eps})


def assemble_u4(profile: ProfileTable, chart: SurfaceChart, params: LayerParams, eps: float,
                sigma: float = settings.DEFAULT_SIGMA, delta: float = settings.COLLAR_WIDTH,
                stride: int = settings.LAYER_X_STRIDE,
                registry: Optional[TermRegistry] = None) -> ApproxSolution:
    """
    Build every component and return the approximation at eps.

    Args:
        profile: 1D profile table
        chart: nondegenerate chart
        params: parameter fields (f0 = 0 certified)
        eps: layer thickness
        sigma: gluing width (W vanishes beyond 6 sigma / eps from Gamma_eps)
        delta: collar width of the boundary-layer cutoff
        stride: x subsampling of the profile grid for the layered fields

    Returns:
        ApproxSolution
    """
    _check_eps(eps)
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}", {"sigma": sigma})
    if not (0.0 < delta < 0.5):
        raise ValidationError(f"Collar width must lie in (0, 0.5), got {delta}", {"delta": delta})
    if (profile.params.n - 1) % stride:
        raise ValidationError(f"Stride {stride} does not divide n-1={profile.params.n - 1}",
                              {"stride": stride, "n": profile.params.n})

    inner = inner_corrections(profile, chart, params, registry)
    layers = build_boundary_layers(profile, chart, params, inner, stride)
    solution = ApproxSolution(
        profile=profile, chart=chart, params=params, eps=float(eps), sigma=float(sigma),
        delta=float(delta), stride=int(stride), fields=subsample(profile, stride),
        inner=inner, layers=layers,
    )
    logger.info(f"Assembled u4 on {chart.name}: eps={eps}, sigma={sigma}, delta={delta}, "
                f"grid {solution.x.size} x {params.grid.n_r} x {params.grid.n_theta}")
    return solution
