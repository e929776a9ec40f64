"""
Error hierarchy and invariant reports.
Checks are collected by name and rendered the same way for every subcommand.
"""
import math
from typing import Dict, List, Optional, Any

from utils.logger import get_logger

logger = get_logger(__name__)


class LayerlabError(Exception):
    """Base error. `details` is serialised verbatim into error.json."""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class ValidationError(LayerlabError):
    """Bad input or violated precondition."""

    exit_code = 2


class NumericalError(LayerlabError):
    """Solver failure, singular system or internal inconsistency."""

    exit_code = 3


class ResonanceError(NumericalError):
    """eps hits (or comes too close to) a resonance eps^2 rho_j = lambda0."""

    def __init__(self, j: int, lam: float, eps: float):
        super().__init__(
            f"Resonant eps={eps:.6g}: |Lambda_j| = {abs(lam):.3e} at j={j}",
            {"j": int(j), "Lambda": float(lam), "eps": float(eps)},
        )
        self.j = int(j)
        self.lam = float(lam)


class DegenerateChartError(NumericalError):
    """Jacobi operator has a (numerical) kernel."""

    def __init__(self, chart_name: str, eigenvalue: float, mode: Optional[int] = None):
        super().__init__(
            f"Chart '{chart_name}' is degenerate: kernel eigenvalue {eigenvalue:.3e}",
            {"chart": chart_name, "eigenvalue": float(eigenvalue), "mode": mode},
        )
        self.eigenvalue = float(eigenvalue)


def require(condition: bool, message: str, **details) -> None:
    """Raise ValidationError unless `condition` holds."""
    if not condition:
        raise ValidationError(message, details)


class InvariantChecker:
    """
    Collects named numerical checks and renders them as a report.

    Each check records a measured value against a tolerance. `mode` is
    'le' (value <= tol), 'ge' (value >= tol) or 'close' (|value - target| <= tol).
    """

    def __init__(self, title: str):
        self.title = title
        self.checks: List[Dict[str, Any]] = []

    def add(self, name: str, value: float, tolerance: float,
            mode: str = 'le', target: Optional[float] = None) -> bool:
        value = float(value)
        if mode == 'le':
            passed = value <= tolerance
        elif mode == 'ge':
            passed = value >= tolerance
        elif mode == 'close':
            if target is None:
                raise ValidationError(f"check '{name}' needs a target", {"name": name})
            passed = abs(value - target) <= tolerance
        else:
            raise ValidationError(f"Unknown check mode: {mode}", {"mode": mode})

        passed = bool(passed) and not math.isnan(value)
        self.checks.append({
            "name": name,
            "value": value,
            "tolerance": float(tolerance),
            "mode": mode,
            "target": None if target is None else float(target),
            "passed": passed,
        })
        if not passed:
            logger.warning(f"Check failed: {name} = {value:.3e} (tol {tolerance:.1e}, {mode})")
        return passed

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def results(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "checks": list(self.checks),
            "passed": sum(c["passed"] for c in self.checks),
            "failed": sum(not c["passed"] for c in self.checks),
            "all_passed": self.all_passed,
        }

    def generate_report(self) -> str:
        lines = []
        lines.append("=" * 60)
        lines.append(self.title.upper())
        lines.append("=" * 60)

        for c in self.checks:
            status = "PASS" if c["passed"] else "FAIL"
            rhs = f"{c['tolerance']:.1e}"
            if c["mode"] == 'close':
                rhs = f"{c['target']:.6g} +/- {rhs}"
            op = {'le': '<=', 'ge': '>=', 'close': '~'}[c["mode"]]
            lines.append(f"{status}  {c['name']:<32} {c['value']: .6e} {op} {rhs}")

        summary = self.results()
        lines.append("-" * 60)
        lines.append(f"Passed : {summary['passed']}")
        lines.append(f"Failed : {summary['failed']}")
        lines.append("=" * 60)
        return "\n".join(lines)
