"""
Linear theory on the half-strip R x S^1 x [0, H].

The operator is

    L phi = phi_xx + l1^{-2} phi_thth + l2^{-2} phi_etaeta - phi + p w^{p-1} phi

with zero Dirichlet data at x = +-L, periodic theta, Neumann data G at
eta = 0 and a homogeneous Neumann cap at eta = H. Everything is diagonal in
the basis (x-eigenvector of d_xx + p w^{p-1}) x (Fourier in theta) x
(DCT-I in eta), so every solve below is a division by a symbol. The two
top x-eigenvectors q_Z and q_wx carry the orthogonality conditions.
"""
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from scipy import fft, sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import splu

from config import settings
from layer_builder.cutoffs import x_cutoff
from profile_1d.profile import ProfileTable, subsample, trapezoid
from profile_1d.projected_ode import TAIL_RATE
from utils.logger import get_logger
from utils.validators import InvariantChecker, NumericalError, ValidationError

logger = get_logger(__name__)

ORTHOGONALITY_TOL = 1e-8
WX_EIGEN_TOL = 1e-2
MULTIPLIER_COND_MAX = 1e8
T1_RESIDUAL_TOL = 1e-7


@dataclass
class StripSolution:
    phi: np.ndarray
    phi0: np.ndarray
    dropped: float
    bound: float


@dataclass
class T1Solution:
    phi: np.ndarray
    c: np.ndarray
    d: np.ndarray
    Lam1: np.ndarray
    Lam2: np.ndarray
    residual: float
    bound: float

    def __iter__(self) -> Iterator:
        return iter((self.phi, self.c, self.d, self.Lam1, self.Lam2))


@dataclass
class NeumannLayer:
    """
    Exact-in-eta solution of L phi = 0 with d_eta phi(0) = D - k q_wx.

    The q_Z component oscillates (sin), the others decay like e^{-s eta};
    the q_wx component k is reported and not represented.
    """
    solver: 'StripSolver'
    amplitudes: np.ndarray
    rates: np.ndarray
    c: np.ndarray
    k: np.ndarray
    z_hat: np.ndarray
    z_lambda: np.ndarray

    def value(self, eta: float, order: int = 0) -> np.ndarray:
        """order-th eta derivative at a single eta, shape (n_x, n_theta)."""
        s = self.solver
        decay = self.amplitudes * (-self.rates) ** order * np.exp(-self.rates * eta)
        spectral = s.x_synthesis(decay)

        z_terms = np.zeros_like(self.z_hat)
        osc = self.z_lambda > 0
        omega = s.l2 * np.sqrt(np.abs(self.z_lambda))
        z_terms[osc] = (self.z_hat[osc] / omega[osc]) * omega[osc] ** order \
            * np.sin(omega[osc] * eta + 0.5 * np.pi * order)
        dec = ~osc
        z_terms[dec] = -(self.z_hat[dec] / omega[dec]) * (-omega[dec]) ** order * np.exp(-omega[dec] * eta)
        spectral = spectral + np.outer(s.q_full(s.iZ), z_terms)
        return fft.irfft(spectral, n=s.n_theta, axis=1)

    def data_residual(self, D: np.ndarray) -> float:
        s = self.solver
        target = D - np.outer(s.q_full(s.iwx), self.k)
        return float(np.max(np.abs((self.value(0.0, 1) - target)[1:-1])))


class StripSolver:
    """
    Mode-diagonal solver for the half-strip problems.

    Args:
        profile: 1D profile table (the x grid is every `stride`-th node)
        l1, l2: metric coefficients of theta and eta (l1 = inf drops the theta term)
        K: shift of the model Neumann problem, must exceed lambda0 + 1
        H: height of the truncated strip
        n_eta: eta intervals
        n_theta: theta nodes (even)
        stride: x subsampling of the profile grid
    """

    def __init__(self, profile: ProfileTable, l1: float = 1.0, l2: float = 1.0,
                 K: float = settings.STRIP_K, H: float = settings.STRIP_H,
                 n_eta: int = settings.STRIP_N_ETA, n_theta: int = settings.STRIP_N_THETA,
                 stride: int = settings.STRIP_X_STRIDE):
        if not (l1 > 0 and 0 < l2 < np.inf):
            raise ValidationError(f"Metric coefficients must be positive, got l1={l1}, l2={l2}",
                                  {"l1": l1, "l2": l2})
        if n_eta < 8 or n_theta < 4 or n_theta % 2:
            raise ValidationError(f"Strip grid too small: n_eta={n_eta}, n_theta={n_theta}",
                                  {"n_eta": n_eta, "n_theta": n_theta})
        if K <= profile.lambda0 + 1.0:
            raise ValidationError(f"K={K} must exceed lambda0 + 1 = {profile.lambda0 + 1.0:.4f}",
                                  {"K": K, "lambda0": profile.lambda0})

        self.profile = profile
        self.p = profile.p
        self.L = profile.params.L
        self.l1, self.l2, self.K, self.H = float(l1), float(l2), float(K), float(H)
        self.n_eta, self.n_theta, self.stride = int(n_eta), int(n_theta), int(stride)

        fields = subsample(profile, stride)
        self.x = fields['x']
        self.dx = fields['dx']
        self.w, self.w_x, self.Z = fields['w'], fields['w_x'], fields['Z']
        self.chi = x_cutoff(self.x, self.L)
        self.pot = self.p * self.w ** (self.p - 1.0)

        n_int = self.x.size - 2
        diag = -2.0 / self.dx ** 2 + self.pot[1:-1]
        off = np.full(n_int - 1, 1.0 / self.dx ** 2)
        self.mu, vecs = eigh_tridiagonal(diag, off)
        self.Q = vecs / np.sqrt(self.dx)
        self.iZ, self.iwx = n_int - 1, n_int - 2
        # sign convention: q_Z > 0 at the centre, <q_wx, w_x> > 0
        if self.Q[n_int // 2, self.iZ] < 0:
            self.Q[:, self.iZ] *= -1.0
        if np.dot(self.Q[:, self.iwx], self.w_x[1:-1]) < 0:
            self.Q[:, self.iwx] *= -1.0

        mu_wx = float(self.mu[self.iwx])
        if abs(mu_wx - 1.0) > WX_EIGEN_TOL:
            raise NumericalError(f"Second x-eigenvalue {mu_wx:.6f} is not the translation mode (expected 1)",
                                 {"mu_wx": mu_wx, "mu_Z": float(self.mu[self.iZ])})
        self.special = np.zeros(n_int, dtype=bool)
        self.special[[self.iZ, self.iwx]] = True

        self.modes = np.arange(self.n_theta // 2 + 1)
        self.theta = 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta
        self.eta = np.linspace(0.0, self.H, self.n_eta + 1)
        self.deta = self.H / self.n_eta
        q = np.arange(self.n_eta + 1)
        self.nu = (2.0 - 2.0 * np.cos(np.pi * q / self.n_eta)) / self.deta ** 2
        self.m2 = (self.modes ** 2 / self.l1 ** 2) if np.isfinite(self.l1) else np.zeros(self.modes.size)

        logger.debug(f"StripSolver: n_x={self.x.size}, n_theta={self.n_theta}, n_eta={self.n_eta}, "
                     f"mu_Z={self.mu[self.iZ]:.6f}, mu_wx={mu_wx:.6f}, mu_3={self.mu[-3]:.6f}")

    # ---- transforms -------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.x.size, self.n_theta, self.n_eta + 1

    def q_full(self, a: int) -> np.ndarray:
        out = np.zeros(self.x.size)
        out[1:-1] = self.Q[:, a]
        return out

    def x_projection(self, F: np.ndarray) -> np.ndarray:
        return np.tensordot(self.Q.T, F[1:-1], axes=1) * self.dx

    def x_synthesis(self, C: np.ndarray) -> np.ndarray:
        out = np.zeros((self.x.size,) + C.shape[1:], dtype=C.dtype)
        out[1:-1] = np.tensordot(self.Q, C, axes=1)
        return out

    def to_modes(self, F: np.ndarray) -> np.ndarray:
        return self.x_projection(fft.rfft(fft.dct(F, type=1, axis=2), axis=1))

    def from_modes(self, C: np.ndarray) -> np.ndarray:
        X = fft.irfft(self.x_synthesis(C), n=self.n_theta, axis=1)
        return fft.idct(X, type=1, axis=2)

    def boundary_modes(self, G: np.ndarray) -> np.ndarray:
        return self.x_projection(fft.rfft(G, axis=1))

    def symbol(self, shift: float) -> np.ndarray:
        return (self.mu[:, None, None] - shift - self.m2[None, :, None]
                - self.nu[None, None, :] / self.l2 ** 2)

    def _ghost(self, G_hat: np.ndarray) -> np.ndarray:
        # DCT-I of the unit vector e_0 is identically one
        return (2.0 / (self.l2 ** 2 * self.deta)) * G_hat[:, :, None]

    def _as_boundary(self, G: Optional[np.ndarray]) -> np.ndarray:
        if G is None:
            return np.zeros(self.shape[:2])
        G = np.asarray(G, dtype=float)
        if G.ndim == 1:
            G = np.repeat(G[:, None], self.n_theta, axis=1)
        if G.shape != self.shape[:2]:
            raise ValidationError(f"Boundary data has shape {G.shape}, expected {self.shape[:2]}",
                                  {"shape": list(G.shape)})
        return G

    def _as_field(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        if F.shape != self.shape:
            raise ValidationError(f"Field has shape {F.shape}, expected {self.shape}",
                                  {"shape": list(F.shape)})
        return F

    # ---- forward operator ---------------------------------------------------
    def apply(self, phi: np.ndarray, G: Optional[np.ndarray] = None, shift: float = 1.0) -> np.ndarray:
        """(d_xx + p w^{p-1} - shift + l1^{-2} d_thth + l2^{-2} d_etaeta) phi with Neumann ghost G."""
        phi = self._as_field(phi).copy()
        phi[0] = 0.0
        phi[-1] = 0.0
        out = np.zeros_like(phi)
        inner = phi[1:-1]
        out[1:-1] = (phi[2:] - 2.0 * inner + phi[:-2]) / self.dx ** 2 \
            + (self.pot[1:-1] - shift)[:, None, None] * inner

        spec = fft.rfft(phi, axis=1) * (-self.m2)[None, :, None]
        out[1:-1] += fft.irfft(spec, n=self.n_theta, axis=1)[1:-1]

        d2 = np.empty_like(phi)
        d2[..., 1:-1] = (phi[..., 2:] - 2.0 * phi[..., 1:-1] + phi[..., :-2]) / self.deta ** 2
        d2[..., 0] = 2.0 * (phi[..., 1] - phi[..., 0]) / self.deta ** 2
        d2[..., -1] = 2.0 * (phi[..., -2] - phi[..., -1]) / self.deta ** 2
        if G is not None:
            d2[..., 0] -= 2.0 * self._as_boundary(G) / self.deta
        out[1:-1] += d2[1:-1] / self.l2 ** 2
        return out

    def project_out(self, F: np.ndarray) -> np.ndarray:
        """Remove the q_wx and q_Z components along x."""
        F = np.asarray(F, dtype=float)
        out = F.copy()
        for a in (self.iwx, self.iZ):
            coeff = np.tensordot(self.Q[:, a], F[1:-1], axes=1) * self.dx
            out[1:-1] -= np.multiply.outer(self.Q[:, a], coeff)
        return out

    def special_projections(self, F: np.ndarray) -> Dict[str, np.ndarray]:
        return {
            'wx': np.tensordot(self.Q[:, self.iwx], F[1:-1], axes=1) * self.dx,
            'Z': np.tensordot(self.Q[:, self.iZ], F[1:-1], axes=1) * self.dx,
        }

    def _check_orthogonal(self, G: np.ndarray) -> None:
        proj = self.special_projections(G)
        norm = float(np.sqrt(np.max(np.sum(G ** 2, axis=0) * self.dx)))
        worst = max(float(np.max(np.abs(v))) for v in proj.values())
        if worst > ORTHOGONALITY_TOL * max(norm, 1e-300) and worst > 0:
            raise ValidationError(
                f"Neumann data is not orthogonal to w_x and Z: projection {worst:.3e} (norm {norm:.3e})",
                {"projection": worst, "norm": norm},
            )

    def _check_decay(self, F: np.ndarray, name: str) -> None:
        tail = np.abs(self.x) >= 0.9 * self.L
        scale = float(np.max(np.abs(F)))
        tail_max = float(np.max(np.abs(F[tail])))
        if tail_max > scale * np.exp(-TAIL_RATE * 0.9 * self.L) and tail_max > 0:
            raise ValidationError(f"{name} does not decay in x: tail {tail_max:.3e} vs max {scale:.3e}",
                                  {"field": name, "tail_max": tail_max, "max": scale})

    # ---- solvers ------------------------------------------------------------
    def solve_model_neumann(self, G: np.ndarray, K: Optional[float] = None) -> np.ndarray:
        """
        phi0 with L phi0 - (K - 1) phi0 = 0 and d_eta phi0(0) = G, G orthogonal to w_x and Z.

        Args:
            G: boundary data, shape (n_x, n_theta) or (n_x,)
            K: shift (defaults to the solver's K)

        Returns:
            phi0 of shape (n_x, n_theta, n_eta + 1)
        """
        K = self.K if K is None else float(K)
        if K <= self.mu[self.iZ]:
            raise ValidationError(f"K={K} must exceed the top x-eigenvalue {self.mu[self.iZ]:.4f}",
                                  {"K": K})
        G = self._as_boundary(G)
        self._check_orthogonal(G)
        phi0 = self.from_modes(self._ghost(self.boundary_modes(G)) / self.symbol(K))
        gmax = float(np.max(np.abs(G)))
        if gmax > 0:
            logger.debug(f"Model Neumann (K={K}): |phi0|/|G| = {np.max(np.abs(phi0)) / gmax:.4f}")
        return phi0

    def solve_with_orthogonality(self, h: np.ndarray, G: np.ndarray) -> StripSolution:
        """phi0 plus the homogeneous-Neumann solve of h + (1 - K) phi0 over non-special x-modes."""
        h = self._as_field(h)
        G = self._as_boundary(G)
        phi0 = self.solve_model_neumann(G)
        rhs = self.to_modes(h + (1.0 - self.K) * phi0)
        dropped = float(np.max(np.abs(rhs[self.special]))) if rhs.size else 0.0
        if dropped > 1e-8 * max(1.0, float(np.max(np.abs(rhs)))):
            logger.warning(f"Right-hand side has w_x/Z components up to {dropped:.3e}; they are dropped")
        rhs[self.special] = 0.0
        sym = self.symbol(1.0)
        sym[self.special] = 1.0
        phi = phi0 + self.from_modes(rhs / sym)
        data = float(np.max(np.abs(h)) + np.max(np.abs(G)))
        bound = float(np.max(np.abs(phi))) / data if data > 0 else 0.0
        return StripSolution(phi=phi, phi0=phi0, dropped=dropped, bound=bound)

    def _zero_mean_neumann(self, G_i: np.ndarray) -> Tuple[np.ndarray, float]:
        """A with (l1^{-2} d_thth + l2^{-2} d_etaeta) A = s, d_eta A(0) = G_i, zero mean."""
        s = -float(np.mean(G_i)) / (self.l2 ** 2 * self.H)
        const = np.full((self.n_theta, self.n_eta + 1), s)
        rhs = fft.rfft(fft.dct(const, type=1, axis=1), axis=0) \
            + (2.0 / (self.l2 ** 2 * self.deta)) * fft.rfft(G_i)[:, None]
        denom = -(self.m2[:, None] + self.nu[None, :] / self.l2 ** 2)
        denom[0, 0] = 1.0
        A_hat = rhs / denom
        A_hat[0, 0] = 0.0
        A = fft.idct(fft.irfft(A_hat, n=self.n_theta, axis=0), type=1, axis=1)
        return A, s

    def multiplier_matrix(self) -> np.ndarray:
        cols = (self.chi * self.w_x, self.chi * self.Z)
        rows = (self.iwx, self.iZ)
        return np.array([[np.dot(self.Q[:, i], col[1:-1]) * self.dx for col in cols] for i in rows])

    def solve_T1(self, h: np.ndarray, G: np.ndarray) -> T1Solution:
        """
        L phi = h + c chi w_x + d chi Z, d_eta phi(0) = G.

        c, d are functions of (theta, eta) fixed so that the q_wx and q_Z
        components of phi are zero-mean Neumann lifts of the projected data;
        Lam1 = int phi w_x dx and Lam2 = int phi Z dx report them.
        """
        if not np.isfinite(self.l1):
            raise ValidationError("solve_T1 needs a finite theta metric coefficient l1", {"l1": self.l1})
        h = self._as_field(h)
        G = self._as_boundary(G)
        self._check_decay(h, 'h')
        self._check_decay(G, 'G')

        M = self.multiplier_matrix()
        cond = float(np.linalg.cond(M))
        if not np.isfinite(cond) or cond > MULTIPLIER_COND_MAX:
            raise NumericalError(f"Multiplier system is ill-conditioned (cond={cond:.3e})",
                                 {"cond": cond, "matrix": M.tolist()})

        lifts = {}
        lhs = []
        for i in (self.iwx, self.iZ):
            h_i = np.tensordot(self.Q[:, i], h[1:-1], axes=1) * self.dx
            G_i = np.dot(self.Q[:, i], G[1:-1]) * self.dx
            A_i, s_i = self._zero_mean_neumann(G_i)
            lifts[i] = A_i
            lhs.append((self.mu[i] - 1.0) * A_i + s_i - h_i)
        try:
            cd = np.linalg.solve(M, np.stack([v.ravel() for v in lhs]))
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Multiplier system is singular: {e}", {"matrix": M.tolist()})
        c = cd[0].reshape(self.n_theta, self.n_eta + 1)
        d = cd[1].reshape(self.n_theta, self.n_eta + 1)

        rhs_field = h + c[None] * (self.chi * self.w_x)[:, None, None] + d[None] * (self.chi * self.Z)[:, None, None]
        rhs = self.to_modes(rhs_field) + self._ghost(self.boundary_modes(G))
        rhs[self.special] = 0.0
        sym = self.symbol(1.0)
        sym[self.special] = 1.0
        phi = self.from_modes(rhs / sym)
        for i, A_i in lifts.items():
            phi[1:-1] += np.multiply.outer(self.Q[:, i], A_i)

        Lam1 = trapezoid(phi * self.w_x[:, None, None], self.dx, axis=0)
        Lam2 = trapezoid(phi * self.Z[:, None, None], self.dx, axis=0)

        scale = max(1.0, float(np.max(np.abs(h))), float(np.max(np.abs(G))))
        residual = float(np.max(np.abs((self.apply(phi, G) - rhs_field)[1:-1]))) / scale
        if residual > T1_RESIDUAL_TOL:
            logger.warning(f"T1 residual {residual:.3e} exceeds {T1_RESIDUAL_TOL:.0e}")
        data = float(np.max(np.abs(h)) + np.max(np.abs(G)))
        bound = float(np.max(np.abs(phi))) / data if data > 0 else 0.0
        logger.debug(f"T1 solve: cond(M)={cond:.3e}, residual={residual:.3e}, bound={bound:.4f}")
        return T1Solution(phi=phi, c=c, d=d, Lam1=Lam1, Lam2=Lam2, residual=residual, bound=bound)

    def solve_neumann_layer(self, D: np.ndarray) -> NeumannLayer:
        """Boundary-layer profile for Neumann data D(x, theta); see NeumannLayer."""
        D = self._as_boundary(D)
        proj = self.special_projections(D)
        c, k = proj['Z'], proj['wx']
        R = D - np.outer(self.q_full(self.iZ), c) - np.outer(self.q_full(self.iwx), k)
        R_hat = self.boundary_modes(R)
        rates = self.l2 * np.sqrt(np.maximum(1.0 - self.mu[:, None] + self.m2[None, :], 0.0))
        safe = np.where(self.special[:, None], 1.0, rates)
        amplitudes = np.where(self.special[:, None], 0.0, -R_hat / safe)
        rates = np.where(self.special[:, None], 0.0, rates)

        z_lambda = self.mu[self.iZ] - 1.0 - self.m2
        if np.any(np.abs(z_lambda) < 1e-12):
            raise NumericalError("Z-mode boundary layer hits a zero frequency", {"z_lambda": z_lambda.tolist()})
        kmax = float(np.max(np.abs(k)))
        if kmax > 1e-8 * max(1.0, float(np.max(np.abs(D)))):
            logger.warning(f"Neumann data has a w_x component up to {kmax:.3e}; it is left in the residual")
        return NeumannLayer(solver=self, amplitudes=amplitudes, rates=rates, c=c, k=k,
                            z_hat=fft.rfft(c), z_lambda=z_lambda)

    # ---- oracles and constants ----------------------------------------------
    def direct_model_neumann(self, G: np.ndarray, K: Optional[float] = None) -> np.ndarray:
        """Sparse (x, eta) solve per theta mode; oracle for solve_model_neumann."""
        K = self.K if K is None else float(K)
        G = self._as_boundary(G)
        n_int, n1 = self.x.size - 2, self.n_eta + 1
        Ax = sparse.diags([np.full(n_int - 1, 1.0 / self.dx ** 2),
                           -2.0 / self.dx ** 2 + self.pot[1:-1],
                           np.full(n_int - 1, 1.0 / self.dx ** 2)], [-1, 0, 1])
        lower = np.full(self.n_eta, 1.0 / self.deta ** 2)
        upper = lower.copy()
        lower[-1] = upper[0] = 2.0 / self.deta ** 2
        Deta = sparse.diags([lower, np.full(n1, -2.0 / self.deta ** 2), upper], [-1, 0, 1])
        Ix, Ie = sparse.identity(n_int), sparse.identity(n1)

        G_hat = fft.rfft(G, axis=1)[1:-1]
        out = np.zeros((self.x.size, self.modes.size, n1), dtype=complex)
        for m in self.modes:
            if not np.any(G_hat[:, m]):
                continue
            op = sparse.kron(Ax - (K + self.m2[m]) * Ix, Ie) + sparse.kron(Ix, Deta) / self.l2 ** 2
            lu = splu(op.tocsc())
            rhs = np.zeros((n_int, n1), dtype=complex)
            rhs[:, 0] = 2.0 * G_hat[:, m] / (self.l2 ** 2 * self.deta)
            rhs = rhs.ravel()
            sol = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
            out[1:-1, m] = sol.reshape(n_int, n1)
        return fft.irfft(out, n=self.n_theta, axis=1)

    def coercivity_constants(self, h: Optional[np.ndarray] = None) -> Dict[str, float]:
        """
        Mode-wise bound (1 + lam^2) |phi_k|^2 <= C |h_k|^2 on the non-special x-modes,
        lam^2 = m^2 / l1^2 + nu / l2^2 being the cross-section eigenvalue.

        `constant` is C from the symbol; `measured` is the largest ratio realised
        by the solve of L phi = h (reference data when h is omitted), summed over x.
        """
        mu3 = float(np.max(self.mu[~self.special]))
        gap = 1.0 - mu3
        if gap <= 0:
            raise NumericalError(f"No spectral gap below the translation mode (mu3={mu3:.6f})", {"mu3": mu3})
        lam2 = self.m2[:, None] + self.nu[None, :] / self.l2 ** 2
        constant = float(np.max((1.0 + lam2) / (gap + lam2) ** 2))

        if h is None:
            h, _ = self.reference_data()
        h_hat = self.to_modes(self._as_field(h))
        h_hat[self.special] = 0.0
        sym = self.symbol(1.0)
        sym[self.special] = 1.0
        phi_sq = np.sum(np.abs(h_hat / sym) ** 2, axis=0)
        h_sq = np.sum(np.abs(h_hat) ** 2, axis=0)
        active = h_sq > 0
        measured = float(np.max((1.0 + lam2)[active] * phi_sq[active] / h_sq[active])) if active.any() else 0.0
        return {'gap': gap, 'mu3': mu3, 'constant': constant, 'measured': measured}

    def reference_data(self) -> Tuple[np.ndarray, np.ndarray]:
        """Smooth decaying (h, G) with no w_x/Z components, used for a-priori constants."""
        psi = self.project_out(np.exp(-0.5 * self.x ** 2) * (1.0 + 0.5 * self.x))
        th = self.theta[None, :, None]
        h = psi[:, None, None] * np.cos(th) * np.exp(-self.eta)[None, None, :]
        G = np.outer(psi, 1.0 + 0.5 * np.sin(self.theta))
        return h, G

    def a_priori_constant(self, h: Optional[np.ndarray] = None, G: Optional[np.ndarray] = None) -> float:
        if h is None or G is None:
            h, G = self.reference_data()
        return self.solve_with_orthogonality(h, G).bound

    def manufactured(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(phi*, h, G) with phi* = e^{-eta} cos(theta) psi(x) and h = L phi*."""
        psi = self.project_out(np.exp(-0.5 * self.x ** 2))
        phi_star = psi[:, None, None] * np.cos(self.theta)[None, :, None] * np.exp(-self.eta)[None, None, :]
        # centred difference through the ghost node e^{+deta}
        slope = (np.exp(-self.deta) - np.exp(self.deta)) / (2.0 * self.deta)
        G = np.outer(psi, np.cos(self.theta)) * slope
        return phi_star, self.apply(phi_star, G), G


def x_decay_rate(field: np.ndarray, x: np.ndarray, window: Tuple[float, float] = (2.0, 6.0)) -> float:
    """Fitted exponential rate of max_{theta,eta} |field| over |x| in `window`."""
    env = np.max(np.abs(field.reshape(field.shape[0], -1)), axis=1)
    sel = (x >= window[0]) & (x <= window[1]) & (env > 0)
    if sel.sum() < 3:
        raise ValidationError("Decay window holds fewer than 3 usable nodes", {"window": list(window)})
    return float(-np.polyfit(x[sel], np.log(env[sel]), 1)[0])


def strip_battery(profile: ProfileTable, stride: int = settings.STRIP_X_STRIDE,
                  n_eta: int = settings.STRIP_N_ETA) -> InvariantChecker:
    """Manufactured, oracle, kernel and refinement checks of the strip solvers."""
    checker = InvariantChecker("Strip linear theory")
    solver = StripSolver(profile, stride=stride, n_eta=n_eta)

    phi_star, h, G = solver.manufactured()
    sol = solver.solve_with_orthogonality(h, G)
    checker.add('manufactured_recovery', np.max(np.abs(sol.phi - phi_star)) / np.max(np.abs(phi_star)), 1e-6)

    _, G_ref = solver.reference_data()
    phi0 = solver.solve_model_neumann(G_ref)
    direct = solver.direct_model_neumann(G_ref)
    checker.add('model_neumann_vs_direct', np.max(np.abs(phi0 - direct)) / np.max(np.abs(direct)), 1e-4)
    proj = solver.special_projections(phi0)
    checker.add('inherited_orthogonality',
                max(np.max(np.abs(v)) for v in proj.values()) / np.max(np.abs(phi0)), 1e-8)
    phi0_2K = solver.solve_model_neumann(G_ref, K=2.0 * solver.K)
    checker.add('norm_decrease_doubling_K', np.max(np.abs(phi0)) - np.max(np.abs(phi0_2K)), 0.0, mode='ge')

    g = np.cos(solver.theta)[:, None] * np.exp(-solver.eta)[None, :]
    kernel = solver.solve_T1((solver.chi * solver.w_x)[:, None, None] * g[None], np.zeros(solver.shape[:2]))
    checker.add('kernel_multiplier', np.max(np.abs(kernel.c + g)), 1e-8)
    checker.add('kernel_solution', np.max(np.abs(kernel.phi)), 1e-8)

    generic_h = np.exp(-solver.x ** 2)[:, None, None] * (1.0 + np.cos(solver.theta))[None, :, None] \
        * np.exp(-solver.eta)[None, None, :]
    generic_G = np.outer(np.exp(-solver.x ** 2) * (1.0 + solver.x), 1.0 + 0.5 * np.sin(solver.theta))
    t1 = solver.solve_T1(generic_h, generic_G)
    checker.add('T1_residual', t1.residual, T1_RESIDUAL_TOL)

    fine = StripSolver(profile, stride=max(1, stride // 2), n_eta=2 * n_eta)
    coercivity = solver.coercivity_constants()
    checker.add('coercivity_measured_over_bound', coercivity['measured'] / coercivity['constant'], 1.0 + 1e-12)
    c_coarse = coercivity['constant']
    c_fine = fine.coercivity_constants()['constant']
    checker.add('coercivity_refinement_change', abs(c_fine - c_coarse) / c_coarse, 0.2)
    a_coarse, a_fine = solver.a_priori_constant(), fine.a_priori_constant()
    checker.add('a_priori_refinement_change', abs(a_fine - a_coarse) / a_coarse, 0.2)

    logger.info(f"Strip battery: {sum(c['passed'] for c in checker.checks)}/{len(checker.checks)} passed")
    return checker
