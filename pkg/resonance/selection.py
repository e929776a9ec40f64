"""
Resonance-avoiding choice of eps.

Lambda_{eps,j} = eps^2 rho_j - lambda0 vanishes at the resonant values
t_j = sqrt(lambda0 / rho_j). On each dyadic level (2^{-l-1}, 2^{-l}) the
widest gap between consecutive resonant values (level endpoints included)
is taken and eps is its midpoint.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import settings
from geometry.charts import constant_coefficients
from surface_spectrum.bessel import robin_disk_eigenvalues
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger(__name__)

# A level whose gap/eps^2 falls below this fraction of the median is flagged
CLUSTER_FRACTION = 0.1


@dataclass(frozen=True)
class ResonanceCertificate:
    ell: int
    interval: Tuple[float, float]
    eps: float
    a: float
    b: float
    gap: float
    gap_over_eps2: float
    gap_bound: float
    lambda0: float
    rho_count: int
    resonant_count: int
    nearest_below: Optional[float]
    nearest_above: Optional[float]

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['interval'] = list(self.interval)
        return data


def lambda_eps(rho, eps: float, lambda0: float):
    """eps^2 rho - lambda0 (scalar or array)."""
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}", {"eps": eps})
    if np.ndim(rho):
        rho = np.asarray(rho, dtype=float)
    return eps ** 2 * rho - lambda0


def lambda_eps_rescaled(lam2, eps1: float, eps2: float, lambda0: float):
    """Lambda_{eps1} from Lambda_{eps2} on the same eigenvalue."""
    ratio = eps1 ** 2 / eps2 ** 2
    return ratio * lam2 - lambda0 * (1.0 - ratio)


def _check_sorted(rhos: np.ndarray) -> None:
    if rhos.ndim != 1 or (rhos.size > 1 and np.any(np.diff(rhos) < 0)):
        raise ValidationError("rho list must be a 1D ascending sequence", {"size": int(rhos.size)})


def count_negative(rhos: Sequence[float], eps: float, lambda0: float) -> int:
    """#{j : eps^2 rho_j < lambda0}."""
    rhos = np.asarray(rhos, dtype=float)
    _check_sorted(rhos)
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}", {"eps": eps})
    return int(np.searchsorted(eps ** 2 * rhos, lambda0, side='left'))


def count_scaling(rhos: Sequence[float], eps_values: Sequence[float], lambda0: float) -> Dict[str, float]:
    """Log-log slope of N_eps against 1/eps over an eps sweep."""
    counts = np.array([count_negative(rhos, e, lambda0) for e in eps_values], dtype=float)
    if np.any(counts <= 0):
        raise ValidationError("Every eps of the sweep needs at least one negative eigenvalue",
                              {"counts": counts.tolist()})
    slope = float(np.polyfit(np.log(1.0 / np.asarray(eps_values)), np.log(counts), 1)[0])
    return {'slope': slope, 'counts': counts.astype(int).tolist()}


def resonant_points(rhos: np.ndarray, lambda0: float) -> np.ndarray:
    rhos = np.asarray(rhos, dtype=float)
    positive = rhos[rhos > 0]
    return np.sqrt(lambda0 / positive)


def select_epsilon(rhos: Sequence[float], lambda0: float, ell: int) -> ResonanceCertificate:
    """
    Certified eps in (2^{-ell-1}, 2^{-ell}).

    Args:
        rhos: ascending eigenvalues of the rho-problem
        lambda0: principal eigenvalue of the 1D problem
        ell: dyadic level (>= 1)

    Returns:
        ResonanceCertificate
    """
    rhos = np.asarray(rhos, dtype=float)
    _check_sorted(rhos)
    if ell < 1:
        raise ValidationError(f"Level must be >= 1, got {ell}", {"ell": ell})
    lo, hi = 2.0 ** (-ell - 1), 2.0 ** (-ell)
    needed = lambda0 / lo ** 2
    if rhos.size == 0 or rhos[-1] < needed:
        raise ValidationError(
            f"rho list does not cover level {ell}: max rho {rhos[-1] if rhos.size else float('nan'):.4g} "
            f"< lambda0 / sigma^2 = {needed:.4g}",
            {"ell": ell, "needed": needed, "rho_count": int(rhos.size)},
        )

    t = resonant_points(rhos, lambda0)
    inside = np.unique(t[(t > lo) & (t < hi)])
    bounds = np.concatenate([[lo], inside, [hi]])
    widths = np.diff(bounds)
    # argmax returns the first (lowest eps) among equal widths
    k = int(np.argmax(widths))
    a, b = float(bounds[k]), float(bounds[k + 1])
    eps = 0.5 * (a + b)
    half = 0.5 * (b - a)

    lam = eps ** 2 * rhos - lambda0
    gap = float(np.min(np.abs(lam)))
    pos = rhos > 0
    bound_pos = rhos[pos] * half * (eps + t) if pos.any() else np.array([np.inf])
    gap_bound = float(min(np.min(bound_pos), lambda0 if (~pos).any() else np.inf))

    below = t[t <= a]
    above = t[t >= b]
    cert = ResonanceCertificate(
        ell=int(ell), interval=(lo, hi), eps=eps, a=a, b=b, gap=gap,
        gap_over_eps2=gap / eps ** 2, gap_bound=gap_bound, lambda0=float(lambda0),
        rho_count=int(rhos.size), resonant_count=int(inside.size),
        nearest_below=float(below.max()) if below.size else None,
        nearest_above=float(above.min()) if above.size else None,
    )
    logger.info(f"Level {ell}: eps={eps:.8f} in ({a:.6f}, {b:.6f}), {inside.size} resonances, "
                f"gap={gap:.4e}, gap/eps^2={cert.gap_over_eps2:.4f}")
    return cert


def verify_certificate(cert: ResonanceCertificate, rhos: Sequence[float]) -> bool:
    """Re-check a certificate against a (possibly longer) rho list."""
    rhos = np.asarray(rhos, dtype=float)
    t = resonant_points(rhos, cert.lambda0)
    clean = not np.any((t > cert.a) & (t < cert.b))
    gap = float(np.min(np.abs(cert.eps ** 2 * rhos - cert.lambda0)))
    ok = clean and gap > 0 and gap >= cert.gap_bound * (1.0 - 1e-12)
    if not ok:
        logger.warning(f"Certificate for level {cert.ell} fails re-verification: gap={gap:.3e}, "
                       f"bound={cert.gap_bound:.3e}, clean={clean}")
    return ok


def monotonicity_check(rhos: Sequence[float], lambda0: float, eps_grid: Sequence[float]) -> bool:
    """eps -> Lambda_{eps,j} strictly increasing for every positive rho_j."""
    rhos = np.asarray(rhos, dtype=float)
    rhos = rhos[rhos > 0]
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))
    lam = eps_grid[:, None] ** 2 * rhos[None, :] - lambda0
    return bool(np.all(np.diff(lam, axis=0) > 0))


def gap_constant(certs: Sequence[ResonanceCertificate]) -> float:
    if not certs:
        raise ValidationError("gap_constant needs at least one certificate", {"levels": 0})
    if len(certs) < 3:
        logger.warning(f"gap_constant over {len(certs)} level(s); fewer than 3 says little about stability")
    return float(min(c.gap_over_eps2 for c in certs))


def gap_report(certs: Sequence[ResonanceCertificate]) -> Dict:
    ratios = np.array([c.gap_over_eps2 for c in certs])
    median = float(np.median(ratios))
    flags = [int(c.ell) for c, r in zip(certs, ratios) if r < CLUSTER_FRACTION * median]
    if flags:
        logger.warning(f"Clustered resonances shrink the gap on levels {flags}")
    return {
        'levels': [int(c.ell) for c in certs],
        'ratios': ratios.tolist(),
        'median_ratio': median,
        'gap_constant': gap_constant(certs),
        'clustered_levels': flags,
        'clustered': bool(flags),
    }


def certificate_frame(certs: Sequence[ResonanceCertificate]) -> pd.DataFrame:
    return pd.DataFrame({
        'ell': [c.ell for c in certs],
        'eps': [c.eps for c in certs],
        'gap': [c.gap for c in certs],
        'gap_over_eps2': [c.gap_over_eps2 for c in certs],
    })


def select_levels(rhos: Sequence[float], lambda0: float, levels: Tuple[int, int],
                  threads: int = settings.THREADS) -> List[ResonanceCertificate]:
    """Certificates for levels lo..hi, computed independently, in level order."""
    lo, hi = levels
    ells = list(range(lo, hi + 1))
    rhos = np.asarray(rhos, dtype=float)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        certs = list(pool.map(lambda ell: select_epsilon(rhos, lambda0, ell), ells))
    return certs


def rho_list_for_levels(chart, lambda0: float, levels: Tuple[int, int],
                        robin_weight: float = 0.5, margin: float = 1.2) -> np.ndarray:
    """
    Ascending rho list long enough for every level in `levels`, from the
    Bessel oracle. The count comes from Weyl's law with a safety margin and
    is checked against the level's coverage requirement.
    """
    coeffs = constant_coefficients(chart)
    if coeffs is None:
        raise ValidationError(f"Chart {chart.name} has no Bessel oracle (non-constant coefficients)",
                              {"chart": chart.name})
    hslash, I = coeffs
    needed = lambda0 * 4.0 ** (levels[1] + 1)
    weyl_count = (chart.area * needed + chart.perimeter() * np.sqrt(needed)) / (4.0 * np.pi)
    count = int(np.ceil(margin * weyl_count)) + 50
    while True:
        rhos = robin_disk_eigenvalues(hslash * robin_weight * I, count, hslash)
        if rhos[-1] >= needed:
            break
        count = int(1.5 * count)
    logger.info(f"rho list for levels {levels[0]}..{levels[1]} on {chart.name}: {count} Bessel eigenvalues, "
                f"rho_max={rhos[-1]:.4g}")
    return rhos
