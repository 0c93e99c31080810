"""transfer: map a process' density to a new boundary with a one- or two-parameter symmetry."""
from typing import Any, Dict

import numpy as np

from ..errors import ConfigError
from ..logs import get_logger
from ..models import RunConfig
from ..services.identities import TransferContext, transfer_density
from ..services.symmetry import family_symmetry, two_param_symmetry
from .common import density_callable, emit_density, require, resolve_process, time_points

logger = get_logger("commands")


def add_parser(subparsers, parent) -> None:
    p = subparsers.add_parser("transfer", parents=[parent],
                              help="density to g = mapped b from the density to b")
    p.add_argument("--process")
    p.add_argument("--boundary", help="source boundary b")
    p.add_argument("--x0", type=float, help="start of the target process")
    p.add_argument("--t", dest="t_grid")
    p.add_argument("--index", type=int, help="one-parameter symmetry index")
    p.add_argument("--eps", type=float)
    p.add_argument("--variant", type=int, help="two-parameter variant (1 or 2)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)


def build_map(spec, config: RunConfig, horizon: float):
    if (config.index is None) == (config.variant is None):
        raise ConfigError("give exactly one of --index (one-parameter) or --variant (two-parameter)")
    if config.index is not None:
        return family_symmetry(spec, config.index, config.eps, horizon=horizon)
    return two_param_symmetry(spec, config.variant, config.alpha, config.beta, horizon=horizon)


def run(config: RunConfig) -> Dict[str, Any]:
    require(config, "process", "boundary", "x0")
    spec = resolve_process(config.process)
    t = time_points(config)
    s = build_map(spec, config, float(np.max(t)))
    ctx = TransferContext(map=s, target_start=config.x0)
    source = density_callable(spec, config.boundary, ctx.source_start)
    curve = transfer_density(ctx, source, config.boundary, t)
    logger.info(f"transfer {spec.label} via {s.label}: mass on grid {curve.total_mass:.6g}")
    artifacts = emit_density(curve, config, "transfer.csv", {"map": s.label})
    return {"command": "transfer", "process": spec.label, "map": s.label, "total_mass": curve.total_mass,
            "artifacts": artifacts, "passed": True}
