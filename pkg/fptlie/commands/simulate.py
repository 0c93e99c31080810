"""simulate: Monte Carlo crossing times of a process to a boundary."""
from typing import Any, Dict

import numpy as np

from ..logs import get_logger
from ..models import RunConfig
from ..services import export
from ..services.mc import empirical_density, simulate_fpt
from .common import direction_of, require, resolve_process, sde_config, time_points

logger = get_logger("commands")


def add_parser(subparsers, parent) -> None:
    p = subparsers.add_parser("simulate", parents=[parent], help="Monte Carlo crossing times")
    p.add_argument("--process")
    p.add_argument("--boundary")
    p.add_argument("--x0", type=float)
    p.add_argument("--t", dest="t_grid", help="t_min:t_max:n (t_max is the horizon)")
    p.add_argument("--direction", choices=["up", "down"])


def run(config: RunConfig) -> Dict[str, Any]:
    require(config, "process", "boundary", "x0")
    spec = resolve_process(config.process)
    t = time_points(config)
    cfg = sde_config(spec, config.x0, float(np.max(t)), config.mc)
    samples = simulate_fpt(cfg, config.boundary, direction_of(config, config.boundary, config.x0))

    path = export.resolve_output(config.output, "samples.csv")
    export.write_samples_csv(samples, path)
    summary = {
        "n_paths": samples.n_paths,
        "n_crossed": samples.n_crossed,
        "n_censored": samples.n_censored,
        "n_domain_exit": samples.n_domain_exit,
        "censored_fraction": samples.censored_fraction,
        "sample_digest": samples.config_digest,
    }
    artifacts = {"csv": str(path)}
    if samples.n_crossed >= 100:
        kde = empirical_density(samples, t)
        kde_path = path.with_name(path.stem + "_kde.csv")
        export.write_columns(kde_path, ["t", "rho_mc", "stderr"], [kde.t_grid, kde.rho, kde.meta["stderr"]])
        artifacts["kde"] = str(kde_path)
        summary["bandwidth"] = kde.meta["bandwidth"]
    artifacts["meta"] = str(export.write_meta(path, config.to_config(), {"samples": summary}))
    return {"command": "simulate", "process": spec.label, **summary, "artifacts": artifacts, "passed": True}
