"""
Export Service for fptlie

Writers for the CSV artifacts and their JSON metadata sidecars.

Features:
- Density CSV (t,rho) with 17 significant digits and LF line endings
- Crossing-time CSV with '# key: value' metadata header lines
- Side-by-side CSV of a reference density against the MC estimate
- <output>.meta.json sidecar (sorted keys, two-space indent)
- config_digest: SHA-256 of the canonical JSON of a configuration
"""
import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from ..config import ENVIRONMENT, OUTPUT_DIR
from ..errors import ConfigError
from ..logs import get_logger
from ..models import DensityCurve, FptSampleSet

logger = get_logger("export")

PathLike = Union[str, Path]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def canonical_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"))


def config_digest(payload: Mapping[str, Any]) -> str:
    """Reproducibility token: SHA-256 hex digest of the canonical JSON."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _fmt(value: float) -> str:
    return "%.17g" % value


def resolve_output(path: Optional[PathLike], default_name: str) -> Path:
    """Absolute output path; bare names land in the environment's output directory."""
    target = Path(path) if path else Path(default_name)
    if not target.is_absolute() and target.parent == Path("."):
        target = OUTPUT_DIR / target
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def write_columns(path: PathLike, header: Sequence[str], columns: Iterable[np.ndarray],
                  comments: Optional[Mapping[str, Any]] = None) -> Path:
    cols = [np.atleast_1d(np.asarray(c, dtype=float)) for c in columns]
    if len({c.size for c in cols}) > 1:
        raise ConfigError("CSV columns must have equal length")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in (comments or {}).items():
            f.write(f"# {key}: {value}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([_fmt(v) for v in row])
    logger.info(f"wrote {path} ({cols[0].size if cols else 0} rows)")
    return path


def write_density_csv(curve: DensityCurve, path: PathLike) -> Path:
    return write_columns(path, ["t", "rho"], [curve.t_grid, curve.rho])


def write_samples_csv(samples: FptSampleSet, path: PathLike) -> Path:
    comments = {
        "n_paths": samples.n_paths,
        "n_censored": samples.n_censored,
        "n_domain_exit": samples.n_domain_exit,
        "direction": samples.direction.value,
        "boundary": json.dumps(samples.boundary.to_config(), sort_keys=True),
        "horizon": _fmt(samples.horizon),
        "x0": _fmt(samples.x0),
        "config_digest": samples.config_digest,
    }
    return write_columns(path, ["crossing_time"], [samples.crossing_times], comments)


def read_samples_csv(path: PathLike) -> Dict[str, Any]:
    """Header metadata and crossing times of a file written by write_samples_csv."""
    meta: Dict[str, Any] = {}
    times = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip() and line.strip() != "crossing_time":
                times.append(float(line))
    meta["crossing_times"] = np.array(times)
    return meta


def write_side_by_side(columns: Mapping[str, np.ndarray], path: PathLike) -> Path:
    header = ["t", "rho", "rho_mc", "stderr", "z"]
    return write_columns(path, header, [columns[name] for name in header])


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_meta(path: PathLike, config: Mapping[str, Any], extra: Optional[Mapping[str, Any]] = None) -> Path:
    """Write <path>.meta.json with the effective config, environment, version and digest."""
    from .. import __version__
    payload = {
        "config": config,
        "config_digest": config_digest(config),
        "environment": ENVIRONMENT,
        "version": __version__,
        **(extra or {}),
    }
    return write_json(sidecar_path(path), payload)


def pretty_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2)


def write_json(path: PathLike, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(pretty_json(payload))
        f.write("\n")
    logger.info(f"wrote {path}")
    return path
