"""
Run configuration shared by every CLI subcommand.
Flags fill a RunConfig; an optional JSON file overrides them; validate()
runs before any computation.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field, fields, asdict, replace
from pathlib import Path
from typing import Optional, Tuple

from config import settings
from utils.validators import ValidationError, require

CHART_NAMES = ('equatorial-disk-in-ball', 'synthetic-robin-disk')


def parse_chart_spec(spec: str) -> Tuple[str, Optional[float]]:
    """Split 'synthetic-robin-disk:0.5' into ('synthetic-robin-disk', 0.5)."""
    name, _, arg = spec.partition(':')
    if name not in CHART_NAMES:
        raise ValidationError(f"Unknown chart: {name}", {"chart": spec, "known": list(CHART_NAMES)})
    if name == 'synthetic-robin-disk':
        if not arg:
            raise ValidationError("synthetic-robin-disk needs a Robin coefficient, e.g. synthetic-robin-disk:0.5",
                                  {"chart": spec})
        try:
            return name, float(arg)
        except ValueError:
            raise ValidationError(f"Bad Robin coefficient in chart spec: {arg}", {"chart": spec})
    if arg:
        raise ValidationError(f"Chart {name} takes no argument", {"chart": spec})
    return name, None


def parse_levels(text: str) -> Tuple[int, int]:
    """'3..8' -> (3, 8); '4' -> (4, 4)."""
    try:
        if '..' in text:
            lo, hi = text.split('..', 1)
            return int(lo), int(hi)
        return int(text), int(text)
    except ValueError:
        raise ValidationError(f"Bad level range: {text}", {"levels": text})


@dataclass(frozen=True)
class RunConfig:
    chart: str = 'synthetic-robin-disk:0.5'
    p: float = settings.DEFAULT_P
    L: float = settings.DEFAULT_L
    n: int = settings.DEFAULT_N
    n_r: int = settings.DEFAULT_N_R
    n_theta: int = settings.DEFAULT_N_THETA
    layer_n_r: int = settings.LAYER_N_R
    layer_n_theta: int = settings.LAYER_N_THETA
    count: int = settings.DEFAULT_SPECTRUM_COUNT
    robin_weight: float = 0.5
    tol: float = settings.DEGENERACY_TOL
    samples: int = 64
    eps: float = settings.DEFAULT_EPS
    eps_list: Tuple[float, ...] = settings.DEFAULT_EPS_LIST
    levels: Tuple[int, int] = settings.DEFAULT_LEVELS
    lambda0: Optional[float] = None
    q: float = settings.DEFAULT_Q
    varrho: float = settings.DEFAULT_VARRHO
    sigma: float = settings.DEFAULT_SIGMA
    params: str = 'zero'
    f2_file: Optional[str] = None
    e_file: Optional[str] = None
    output_dir: str = field(default_factory=lambda: str(settings.OUTPUT_DIR))
    format_version: str = settings.FORMAT_VERSION

    @classmethod
    def from_json(cls, path: str, base: Optional['RunConfig'] = None) -> 'RunConfig':
        """Overlay the keys of a JSON file on `base` (or the defaults)."""
        base = base or cls()
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"Cannot read config file {path}: {e}", {"path": str(path)})

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"Unknown config keys: {unknown}", {"keys": unknown})

        if 'eps_list' in data:
            data['eps_list'] = tuple(float(v) for v in data['eps_list'])
        if 'levels' in data:
            levels = data['levels']
            data['levels'] = parse_levels(levels) if isinstance(levels, str) else tuple(int(v) for v in levels)
        if data.get('q') in ('inf', 'Infinity'):
            data['q'] = math.inf
        return replace(base, **data)

    def validate(self) -> 'RunConfig':
        parse_chart_spec(self.chart)
        require(self.p > 1, f"p must exceed 1, got {self.p}", p=self.p)
        require(self.L >= settings.MIN_L, f"L must be >= {settings.MIN_L}, got {self.L}", L=self.L)
        require(self.n >= settings.MIN_N and self.n % 2 == 1,
                f"n must be odd and >= {settings.MIN_N}, got {self.n}", n=self.n)
        require(8 <= self.n_r <= settings.MAX_N_R and self.n_r % 2 == 0,
                f"n_r must be even in [8, {settings.MAX_N_R}], got {self.n_r}", n_r=self.n_r)
        require(8 <= self.n_theta <= settings.MAX_N_THETA and self.n_theta % 2 == 0,
                f"n_theta must be even in [8, {settings.MAX_N_THETA}], got {self.n_theta}",
                n_theta=self.n_theta)
        for key, limit in (('layer_n_r', settings.MAX_N_R), ('layer_n_theta', settings.MAX_N_THETA)):
            value = getattr(self, key)
            require(8 <= value <= limit and value % 2 == 0,
                    f"{key} must be even in [8, {limit}], got {value}", **{key: value})
        require(self.count >= 1, f"count must be positive, got {self.count}", count=self.count)
        require(self.robin_weight > 0, f"robin_weight must be positive, got {self.robin_weight}",
                robin_weight=self.robin_weight)
        require(0 < self.tol < 1, f"tol must lie in (0, 1), got {self.tol}", tol=self.tol)
        require(self.samples >= 1, f"samples must be positive, got {self.samples}", samples=self.samples)
        require(0 < self.eps < 1, f"eps must lie in (0, 1), got {self.eps}", eps=self.eps)
        require(len(self.eps_list) >= 2 and all(0 < e < 1 for e in self.eps_list),
                "eps_list needs at least two values in (0, 1)", eps_list=list(self.eps_list))
        require(len(self.levels) == 2 and 1 <= self.levels[0] <= self.levels[1],
                f"levels must be lo..hi with 1 <= lo <= hi, got {self.levels}", levels=list(self.levels))
        require(self.lambda0 is None or self.lambda0 > 0,
                f"lambda0 must be positive, got {self.lambda0}", lambda0=self.lambda0)
        require(self.q > 4, f"q must exceed 4, got {self.q}", q=self.q)
        require(0 < self.varrho < 0.01, f"varrho must lie in (0, 0.01), got {self.varrho}",
                varrho=self.varrho)
        require(self.sigma > 0, f"sigma must be positive, got {self.sigma}", sigma=self.sigma)
        require(self.params in ('zero', 'unit'), f"params must be 'zero' or 'unit', got {self.params}",
                params=self.params)
        for key in ('f2_file', 'e_file'):
            path = getattr(self, key)
            require(path is None or Path(path).is_file(), f"{key} not found: {path}", **{key: path})
        return self

    def effective_lambda0(self) -> float:
        if self.lambda0 is not None:
            return float(self.lambda0)
        return 0.25 * (self.p - 1.0) * (self.p + 3.0)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['eps_list'] = list(self.eps_list)
        data['levels'] = list(self.levels)
        if math.isinf(self.q):
            data['q'] = 'inf'
        return data

    def config_hash(self) -> str:
        """Hash of everything that affects the numbers (output_dir excluded)."""
        data = self.to_dict()
        data.pop('output_dir')
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]
