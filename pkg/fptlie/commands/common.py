"""Helpers shared by the CLI commands: process resolution, MC settings and artifact emission."""
from typing import Any, Dict, Optional

import numpy as np

from ..config import settings
from ..errors import ConfigError, DomainError
from ..logs import get_logger
from ..models import Boundary, BoundaryKind, DensityCurve, Direction, DriftSpec, Family, RunConfig, SdeConfig, TimeGrid
from ..services import export, families, identities
from ..services.identities import TransferContext
from ..services.symmetry import SymmetryMap, bessel_reduction, bm_reduction

logger = get_logger("commands")

# Fields of SdeConfig that the mc overrides may set
MC_FIELDS = ("dt", "n_paths", "seed", "bridge_correction", "workers", "block_size")


def resolve_process(process) -> DriftSpec:
    if process is None:
        raise ConfigError("--process is required")
    if isinstance(process, DriftSpec):
        return process
    if isinstance(process, dict):
        try:
            return DriftSpec.from_config(process)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid process: {exc}")
    return families.builtin_spec(str(process))


def require(config: RunConfig, *names: str) -> None:
    missing = [name for name in names if getattr(config, name) is None]
    if missing:
        raise ConfigError(f"{config.command.value} needs: {', '.join('--' + n.replace('_', '-') for n in missing)}")


def time_points(config: RunConfig, default: str = "0.1:3:100") -> np.ndarray:
    grid = config.t_grid or TimeGrid.parse(default)
    return grid.points()


def sde_config(drift, x0: float, horizon: float, overrides: Optional[Dict[str, Any]] = None) -> SdeConfig:
    """SdeConfig from settings defaults, overridden by the run's mc block."""
    values = {name: getattr(settings, name) for name in MC_FIELDS}
    for key, value in (overrides or {}).items():
        if key not in MC_FIELDS:
            raise ConfigError(f"unknown mc setting '{key}'")
        if value is not None:
            values[key] = value
    try:
        return SdeConfig(drift=drift, x0=x0, horizon=horizon, **values)
    except ValueError as exc:
        raise ConfigError(str(exc))


# Reference densities for the density and transfer commands

def pullback_boundary(s: SymmetryMap, g: Boundary, spec: DriftSpec) -> Boundary:
    """Boundary b of the reference process whose image under the reduction is g."""
    if spec.family == Family.F1:
        B = spec.B
        if B == 0.0:
            return g
        if g.kind in (BoundaryKind.CONSTANT, BoundaryKind.AFFINE, BoundaryKind.QUADRATIC):
            coeffs = list(g.params) + [0.0] * (3 - len(g.params))
            return Boundary(kind=BoundaryKind.QUADRATIC, params=[coeffs[0], coeffs[1], coeffs[2] - B])
    elif spec.family == Family.F2 and g.kind == BoundaryKind.CONSTANT:
        # b(tau) = p(t) g + q(t) = k (a + shift) sqrt(1 + tau)
        level = float(s.X(g.params[0], 0.0))
        return Boundary(kind=BoundaryKind.SQRT_SHIFT, params=[level, 1.0])
    elif spec.family == Family.F3:
        return g
    elif spec.family == Family.F4 and g.kind == BoundaryKind.CONSTANT:
        # b(tau) = k a sqrt(1 + tau)
        return Boundary(kind=BoundaryKind.SQRT_SHIFT, params=[float(s.X(g.params[0], 0.0)), 1.0])
    raise DomainError(f"no closed-form reference boundary for a {g.kind.value} boundary "
                      f"under the {spec.family.value} reduction")


def reference_density(spec: DriftSpec, g: Boundary, x0: float, t_grid) -> DensityCurve:
    """Density of spec from x0 to g through its reduction and a closed-form reference density."""
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if spec.family in (Family.F1, Family.F2):
        reduction = bm_reduction(spec)
        b = pullback_boundary(reduction, g, spec)
        route = identities.f1_to_bm if spec.family == Family.F1 else identities.f2_to_bm
        curve = route(spec, b, x0, t)
    elif spec.family in (Family.F3, Family.F4):
        delta = families.bessel_dimension(spec)
        if not np.isclose(delta, 3.0):
            raise DomainError(f"closed-form Bessel density needs delta = 3, got {delta:g}")
        reduction = bessel_reduction(spec)
        b = pullback_boundary(reduction, g, spec)
        start = TransferContext(map=reduction, target_start=x0).source_start
        route = identities.f3_to_bessel if spec.family == Family.F3 else identities.f4_to_bessel
        curve = route(spec, b, x0, t, identities.bessel3_boundary_density(b, start))
    else:
        raise DomainError(f"no closed-form density for {spec.label or spec.family.value} "
                          f"to a {g.kind.value} boundary")
    return curve.model_copy(update={"boundary": g})


def density_callable(spec: DriftSpec, b: Boundary, start: float):
    """tau -> rho of spec from start to b, for use as a transfer source."""
    def rho(tau):
        return reference_density(spec, b, start, np.atleast_1d(tau)).rho
    return rho


# Artifacts

def emit_density(curve: DensityCurve, config: RunConfig, default_name: str,
                 extra: Optional[Dict[str, Any]] = None) -> Dict[str, str]:
    path = export.resolve_output(config.output, default_name)
    export.write_density_csv(curve, path)
    meta = export.write_meta(path, config.to_config(), {"density": _density_meta(curve), **(extra or {})})
    return {"csv": str(path), "meta": str(meta)}


def _density_meta(curve: DensityCurve) -> Dict[str, Any]:
    meta = {k: v for k, v in curve.meta.items() if k != "stderr"}
    return {"x0": curve.x0, "direction": curve.direction.value, "total_mass": curve.total_mass,
            "boundary": curve.boundary.to_config(), **meta}


def direction_of(config: RunConfig, b: Boundary, x0: float) -> Direction:
    if config.direction is not None:
        return config.direction
    return Direction.DOWN if x0 > float(b(0.0)) else Direction.UP
