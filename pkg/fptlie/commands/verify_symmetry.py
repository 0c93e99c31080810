"""verify-symmetry: finite-difference check that a map sends FPKE solutions to FPKE solutions."""
from typing import Any, Dict

from ..config import settings
from ..errors import ConfigError
from ..logs import get_logger
from ..models import DriftSpec, Family, Grid, RunConfig
from ..services import export, families
from ..services.pdecheck import perturbed, probe_solution, reference_spec, verify_symmetry
from ..services.symmetry import bessel_reduction, bm_reduction, family_symmetry, two_param_symmetry
from .common import resolve_process

logger = get_logger("commands")

# Process checked when only --family is given
DEFAULT_PROCESS = {
    Family.F1: "coth:1",
    Family.F2: "ou:1",
    Family.F3: "bessel-drift:0.5,1",
    Family.F4: "radial-ou:0.5,1",
}


def add_parser(subparsers, parent) -> None:
    p = subparsers.add_parser("verify-symmetry", parents=[parent], help="PDE residual of a symmetry map")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--process")
    p.add_argument("--index", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--variant", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--reduction", action="store_true", default=None,
                   help="check the reduction to BM / Bessel instead of a symmetry")
    p.add_argument("--perturb", type=float, help="multiply f by e^{delta x} (sensitivity control)")


def default_grid(spec: DriftSpec) -> Grid:
    lo, hi = spec.domain
    anchor = spec.anchor if spec.anchor is not None else families.DEFAULT_ANCHORS[spec.family]
    x_lo = max(anchor - 0.5, 0.5 * (lo + anchor)) if lo > -1e300 else anchor - 0.5
    x_hi = min(anchor + 0.5, 0.5 * (hi + anchor)) if hi < 1e300 else anchor + 0.5
    return Grid(x_lo=x_lo, x_hi=x_hi, t_lo=0.5, t_hi=1.0, nx=21, nt=11)


def _spec(config: RunConfig) -> DriftSpec:
    if config.process is None:
        if config.family is None:
            raise ConfigError("verify-symmetry needs --family or --process")
        return resolve_process(DEFAULT_PROCESS[config.family])
    spec = resolve_process(config.process)
    if config.family is not None and spec.family != config.family:
        raise ConfigError(f"process {spec.label} is {spec.family.value}, not {config.family.value}")
    return spec


def run(config: RunConfig) -> Dict[str, Any]:
    spec = _spec(config)
    grid = default_grid(spec)
    horizon = grid.t_hi * 1.01
    if config.reduction:
        s = bm_reduction(spec) if spec.family in (Family.F1, Family.F2) else bessel_reduction(spec)
        source = reference_spec(spec)
        probe = probe_solution(source) if source is not None else probe_solution(None)
    else:
        if config.index is not None:
            s = family_symmetry(spec, config.index, config.eps, horizon=horizon)
        elif config.variant is not None:
            s = two_param_symmetry(spec, config.variant, config.alpha, config.beta, horizon=horizon)
        else:
            raise ConfigError("give --index, --variant or --reduction")
        source = spec
        probe = probe_solution(spec)
    if config.perturb:
        s = perturbed(s, config.perturb)

    report = verify_symmetry(s, spec, probe, grid, spec_source=source)
    passed = report.passed(settings.residual_tol)
    payload = {"report": report.to_dict(), "passed": passed, "tolerance": settings.residual_tol,
               "process": spec.to_config()}
    path = export.resolve_output(config.output, "verify_symmetry.json")
    export.write_json(path, payload)
    export.write_meta(path, config.to_config(), {"residual": report.max_abs_residual})
    return {"command": "verify-symmetry", "map": s.label, **payload, "artifacts": {"json": str(path)}}
