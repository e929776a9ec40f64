# Artifact writer and field loader.
# Every file carries the config hash and format version so outputs can be
# matched to the run that produced them.
import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from utils.logger import get_logger
from utils.validators import ValidationError, LayerlabError

logger = get_logger(__name__)


def _to_builtin(obj: Any) -> Any:
    """Recursively convert numpy scalars / arrays so json can serialise them."""
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_builtin(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


class ArtifactWriter:

    def __init__(self, output_dir: str, config_hash: str, format_version: str):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.format_version = format_version
        self.written = []
        logger.info(f"Initialized ArtifactWriter in {self.output_dir} (config {config_hash})")

    def _header(self) -> str:
        return f"# config_hash={self.config_hash} format_version={self.format_version}\n"

    def write_csv(self, name: str, df: pd.DataFrame) -> Path:
        path = self.output_dir / name
        with open(path, 'w', newline='') as fh:
            fh.write(self._header())
            df.to_csv(fh, index=False, float_format='%.12e', lineterminator='\n')
        self.written.append(path.name)
        logger.info(f"Saved {len(df)} rows to {path}")
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.output_dir / name
        body = dict(_to_builtin(payload))
        body['config_hash'] = self.config_hash
        body['format_version'] = self.format_version
        with open(path, 'w') as fh:
            fh.write(json.dumps(body, sort_keys=True, indent=2))
            fh.write('\n')
        self.written.append(path.name)
        logger.info(f"Saved JSON report to {path}")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.output_dir / name
        with open(path, 'w') as fh:
            fh.write(self._header())
            fh.write(text)
            fh.write('\n')
        self.written.append(path.name)
        return path

    def write_error(self, error: LayerlabError) -> Path:
        return self.write_json('error.json', error.to_dict())


def error_payload(error: LayerlabError, config_hash: Optional[str], format_version: str) -> str:
    body = dict(_to_builtin(error.to_dict()))
    body['config_hash'] = config_hash
    body['format_version'] = format_version
    return json.dumps(body, sort_keys=True, indent=2)


def read_artifact_csv(path: str) -> pd.DataFrame:
    """Read a CSV written by ArtifactWriter (comment header skipped)."""
    try:
        return pd.read_csv(path, comment='#')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f"Cannot read CSV {path}: {e}", {"path": str(path)})


def load_surface_field(path: str, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """
    Load a field on Gamma sampled on the polar grid.

    Args:
        path: CSV with columns r, theta, value (one row per grid node)
        r: radial cell centres of the target grid
        theta: angular nodes of the target grid

    Returns:
        Array of shape (len(r), len(theta))
    """
    df = read_artifact_csv(path)
    missing = {'r', 'theta', 'value'} - set(df.columns)
    if missing:
        raise ValidationError(f"Field file {path} lacks columns {sorted(missing)}", {"path": str(path)})
    if len(df) != len(r) * len(theta):
        raise ValidationError(
            f"Field file {path} has {len(df)} rows, grid needs {len(r) * len(theta)}",
            {"path": str(path), "rows": len(df), "n_r": len(r), "n_theta": len(theta)},
        )

    df = df.sort_values(['r', 'theta']).reset_index(drop=True)
    values = df['value'].to_numpy(dtype=float).reshape(len(r), len(theta))
    r_file = df['r'].to_numpy(dtype=float).reshape(len(r), len(theta))[:, 0]
    t_file = df['theta'].to_numpy(dtype=float).reshape(len(r), len(theta))[0, :]
    if not (np.allclose(r_file, r, atol=1e-9) and np.allclose(t_file, theta, atol=1e-9)):
        raise ValidationError(f"Field file {path} is not sampled on the working polar grid",
                              {"path": str(path)})
    logger.info(f"Loaded surface field from {path}: range [{values.min():.3e}, {values.max():.3e}]")
    return values


def surface_field_frame(r: np.ndarray, theta: np.ndarray, **fields: np.ndarray) -> pd.DataFrame:
    """Flatten polar-grid fields into a long table (r, theta, <fields>)."""
    rr, tt = np.meshgrid(r, theta, indexing='ij')
    data = {'r': rr.ravel(), 'theta': tt.ravel()}
    for name, values in fields.items():
        data[name] = np.asarray(values, dtype=float).reshape(rr.shape).ravel()
    return pd.DataFrame(data)
