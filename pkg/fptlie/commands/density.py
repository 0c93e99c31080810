"""density: FPT density of a process to a boundary through its reduction."""
from typing import Any, Dict

from ..logs import get_logger
from ..models import RunConfig
from .common import emit_density, reference_density, require, resolve_process, time_points

logger = get_logger("commands")


def add_parser(subparsers, parent) -> None:
    p = subparsers.add_parser("density", parents=[parent], help="closed-form FPT density via reduction")
    p.add_argument("--process", help="builtin name (e.g. coth:1, ou:1) or use --config")
    p.add_argument("--boundary", help="<kind>:<params>, e.g. const:1 or affine:1,0.5")
    p.add_argument("--x0", type=float)
    p.add_argument("--t", dest="t_grid", help="t_min:t_max:n")


def run(config: RunConfig) -> Dict[str, Any]:
    require(config, "process", "boundary", "x0")
    spec = resolve_process(config.process)
    curve = reference_density(spec, config.boundary, config.x0, time_points(config))
    logger.info(f"density {spec.label}: {curve.t_grid.size} points, mass on grid {curve.total_mass:.6g}")
    artifacts = emit_density(curve, config, "density.csv")
    return {"command": "density", "process": spec.label, "total_mass": curve.total_mass,
            "artifacts": artifacts, "passed": True}
