"""
reproduce: worked examples, each run through its closed-form pipeline and the MC oracle.

Every target returns a report with cross-route deviations, window-probability
z-scores of the density against Monte Carlo and, where the example is stated
through a Laplace or Mellin transform, the transform z-scores.
"""
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..errors import ConfigError, UnknownTargetError
from ..logs import get_logger
from ..models import Boundary, BoundaryKind, DensityCurve, FptSampleSet, RunConfig, TimeGrid
from ..services import export, families, identities
from ..services.mc import functional_estimate, side_by_side, simulate_fpt, window_z_scores
from ..services.symmetry import two_param_symmetry
from .common import reference_density, sde_config
from .laplace_check import Z_LIMIT, laplace_rows, write_rows

logger = get_logger("commands")

# Share of windows that must agree with the reference within Z_LIMIT
WINDOW_PASS_SHARE = 0.9
N_WINDOWS = 10
# Relative agreement required between two closed-form routes
ROUTE_TOL = 1e-8
# Routes through special-function evaluation or series
NUMERIC_ROUTE_TOL = 1e-6
DEFAULT_GRID = "0.2:2:50"
# Horizon of the simulations behind transform checks
LAPLACE_HORIZON = 10.0
MELLIN_HORIZON = 50.0

DEFAULTS: Dict[str, Dict[str, float]] = {
    "bachelier-levy": {"a": 1.0, "b": 0.5},
    "coth": {"omega": 1.0, "b": 1.0, "x0": 2.0, "slope": 0.0},
    "pearson": {"r": 1.0, "p": 0.0, "q": 1.0, "u0": 1.0, "h": 0.0},
    "ou-constant": {"lambda": 1.0, "a": 1.0, "x0": 0.0},
    "ou-two-param": {"lambda": 1.0, "a": 1.0, "alpha": 0.2, "beta": 0.1, "x0": 0.0},
    "erf-drift": {"lambda": 1.0, "a": 0.0, "x0": 1.0},
    "bessel-drift": {"omega": 0.5, "kappa": 1.0, "b": 0.5, "x0": 1.5},
    "radial-ou": {"omega": 0.5, "gamma": 1.0, "x0": 1.5, "b": 0.75,
                  "z0": 2.0, "c": 1.0, "cir_kappa": 1.0, "cir_theta": 1.0, "cir_sigma": 1.0,
                  "cir_u0": 1.0, "cir_h": 0.5625},
    "sinh-f4": {"kappa": 0.5, "x0": 1.5, "b": 1.0},
}
MELLIN_EXPONENTS = (-0.5, -1.0, -2.0)


def add_parser(subparsers, parent) -> None:
    p = subparsers.add_parser("reproduce", parents=[parent], help="run a worked example against the MC oracle")
    p.add_argument("target", choices=sorted(DEFAULTS))
    p.add_argument("--t", dest="t_grid")
    p.add_argument("--horizon", type=float)
    p.add_argument("--lams", type=lambda s: [float(v) for v in s.split(",")])
    for name in sorted({k for params in DEFAULTS.values() for k in params}):
        p.add_argument(f"--{name.replace('_', '-')}", dest=f"param_{name}", type=float)


class Run:
    """Shared state of one reproduce run: parameters, grid, MC settings and artifact paths."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.params = {**DEFAULTS[config.target], **config.target_params}
        self.t = (config.t_grid or TimeGrid.parse(DEFAULT_GRID)).points()
        self.base = export.resolve_output(config.output, f"reproduce_{config.target}.csv")
        self.report: Dict[str, Any] = {"target": config.target, "params": self.params}
        self.checks: List[bool] = []

    def path(self, suffix: str = "") -> Path:
        return self.base if not suffix else self.base.with_name(f"{self.base.stem}_{suffix}{self.base.suffix}")

    def simulate(self, drift, x0: float, boundary: Boundary, horizon: Optional[float] = None) -> FptSampleSet:
        horizon = horizon or max(float(self.t[-1]), self.config.horizon or 0.0)
        return simulate_fpt(sde_config(drift, x0, horizon, self.config.mc), boundary)

    def route(self, name: str, reference: np.ndarray, other: np.ndarray, tol: float = ROUTE_TOL) -> float:
        rel = np.abs(other - reference) / np.maximum(np.abs(reference), 1e-300)
        deviation = float(np.max(rel))
        self.report.setdefault("routes", {})[name] = deviation
        self.checks.append(deviation <= tol)
        return deviation

    def compare(self, curve: DensityCurve, samples: FptSampleSet, suffix: str = "") -> None:
        columns = side_by_side(curve, samples)
        export.write_side_by_side(columns, self.path(suffix))
        rows = window_z_scores(samples, curve, N_WINDOWS)
        share = float(np.mean([abs(r["z"]) <= Z_LIMIT for r in rows]))
        self.report.setdefault("windows", {})[suffix or "density"] = {
            "rows": rows, "share_within": share, "sample_digest": samples.config_digest,
            "censored_fraction": samples.censored_fraction,
        }
        self.checks.append(share >= WINDOW_PASS_SHARE)

    def transform(self, name: str, samples: FptSampleSet, rates: List[float], closed: List[float]) -> None:
        rows = laplace_rows(samples, rates, closed)
        write_rows(rows, self.path(name))
        self.report.setdefault("transforms", {})[name] = rows
        self.checks.append(all(abs(r["z"]) <= Z_LIMIT for r in rows))

    @property
    def lams(self) -> List[float]:
        return list(self.config.lams)

    def laplace_horizon(self) -> float:
        return max(self.config.horizon or LAPLACE_HORIZON, float(self.t[-1]))


# Targets

def _bachelier_levy(run: Run) -> None:
    a, slope = run.params["a"], run.params["b"]
    t = run.t if run.config.t_grid else TimeGrid.parse("0.1:3:100").points()
    routes = identities.bachelier_levy_routes(a, slope, t)
    closed = routes["closed_form"]
    run.route("galilean_vs_closed_form", closed, routes["galilean"].rho)
    if "projective" in routes:
        run.route("projective_vs_closed_form", closed, routes["projective"].rho)
        run.route("galilean_vs_projective", routes["galilean"].rho, routes["projective"].rho)
    line = Boundary.affine(a, slope)
    curve = routes["galilean"].model_copy(update={"boundary": line})
    samples = run.simulate(families.bm_spec(), 0.0, line, float(t[-1]))
    run.compare(curve, samples)


def _coth(run: Run) -> None:
    omega, b, x0, slope = (run.params[k] for k in ("omega", "b", "x0", "slope"))
    spec = families.coth_spec(omega)
    closed = identities.coth_sloped_line_density(omega, slope, b, x0, run.t)
    level = Boundary.constant(b)
    if slope == 0.0:
        route = reference_density(spec, level, x0, run.t)
    else:
        ctx = identities.TransferContext(map=two_param_symmetry(spec, 2, 0.0, slope), target_start=x0)
        source = lambda tau: reference_density(spec, level, ctx.source_start, np.atleast_1d(tau)).rho
        route = identities.transfer_density(ctx, source, level, run.t)
    run.route("reduction_vs_closed_form", closed.rho, route.rho, tol=NUMERIC_ROUTE_TOL)
    run.compare(closed, run.simulate(spec, x0, closed.boundary))


def _pearson(run: Run) -> None:
    r, p, q, u0, h = (run.params[k] for k in ("r", "p", "q", "u0", "h"))
    curve = identities.pearson_density(r, p, q, u0, h, run.t)
    spec = families.pearson_transformed_spec(r, p, q)
    grid = np.linspace(-1.0, 1.0, 21)
    residuals = {}
    for label, printed in (("symmetric", False), ("printed", True)):
        alpha, beta = families.pearson_symmetric_params(r, p, q, printed=printed)
        lspec = families.pearson_lamperti_spec(r, p, q, alpha, beta)
        mu = np.vectorize(lambda x: families.lamperti_drift(lspec, x))
        residuals[label] = families.ricatti_residual(mu, lambda x: np.full_like(x, r), grid)
    run.report["lamperti_ricatti_residuals"] = residuals
    run.checks.append(residuals["symmetric"] <= 1e-4)
    run.compare(curve, run.simulate(spec, curve.x0, Boundary.constant(curve.meta["x_level"])))


def _ou_constant(run: Run) -> None:
    lam, a, x0 = run.params["lambda"], run.params["a"], run.params["x0"]
    spec = families.ou_spec(lam)
    curve = identities.ou_constant_level_density(lam, a, x0, run.t)
    run.report["series"] = {k: v for k, v in curve.meta.items() if k.startswith("series")}
    route = reference_density(spec, Boundary.constant(a), x0, run.t)
    run.route("sqrt_boundary_route_vs_series", curve.rho, route.rho, tol=NUMERIC_ROUTE_TOL)
    samples = run.simulate(spec, x0, Boundary.constant(a), run.laplace_horizon())
    run.compare(curve, samples)
    run.transform("laplace", samples, run.lams, [identities.ou_laplace(lam, a, x0, s) for s in run.lams])


def _ou_two_param(run: Run) -> None:
    lam, a, alpha, beta, x0 = (run.params[k] for k in ("lambda", "a", "alpha", "beta", "x0"))
    spec = families.ou_spec(lam)
    rho_h, rho_q = identities.ou_two_param_densities(lam, a, alpha, beta, x0, run.t)
    run.compare(rho_h, run.simulate(spec, x0, rho_h.boundary), "h")
    run.compare(rho_q, run.simulate(spec, x0, rho_q.boundary), "q")


def _erf_drift(run: Run) -> None:
    lam, a, x0 = run.params["lambda"], run.params["a"], run.params["x0"]
    spec = families.erf_spec(lam)
    curve = identities.erf_drift_density(lam, a, x0, run.t)
    samples = run.simulate(spec, x0, Boundary.constant(a), run.laplace_horizon())
    run.compare(curve, samples)
    run.transform("laplace", samples, run.lams, [identities.family_laplace(spec, x0, a, s) for s in run.lams])


def _bessel_drift(run: Run) -> None:
    omega, kappa, b, x0 = (run.params[k] for k in ("omega", "kappa", "b", "x0"))
    spec = families.bessel_drift_spec(omega, kappa)
    closed = [identities.bessel_drift_laplace(omega, kappa, x0, b, lam) for lam in run.lams]
    generic = [identities.family_laplace(spec, x0, b, lam) for lam in run.lams]
    run.route("closed_form_vs_generic_laplace", np.array(closed), np.array(generic), tol=NUMERIC_ROUTE_TOL)
    samples = run.simulate(spec, x0, Boundary.constant(b), run.laplace_horizon())
    run.transform("laplace", samples, run.lams, closed)
    if math.isclose(families.bessel_dimension(spec), 3.0):
        run.compare(reference_density(spec, Boundary.constant(b), x0, run.t), samples)


def _radial_ou(run: Run) -> None:
    omega, gamma, x0, b = (run.params[k] for k in ("omega", "gamma", "x0", "b"))
    spec = families.radial_ou_spec(omega, gamma)
    rates = [2.0 * lam * gamma for lam in run.lams]
    closed = [identities.radial_ou_laplace(omega, gamma, x0, b, lam) for lam in run.lams]
    generic = [identities.family_laplace(spec, x0, b, s) for s in rates]
    run.route("closed_form_vs_generic_laplace", np.array(closed), np.array(generic), tol=NUMERIC_ROUTE_TOL)
    run.transform("laplace", run.simulate(spec, x0, Boundary.constant(b), run.laplace_horizon()), rates, closed)

    # Bessel(3) to c sqrt(1 + t): Mellin transform E[(T + 1)^lam]
    z0, c = run.params["z0"], run.params["c"]
    bessel = families.bessel_spec(3.0)
    samples = run.simulate(bessel, z0, Boundary(kind=BoundaryKind.SQRT_SHIFT, params=[c, 1.0]),
                           max(run.config.horizon or MELLIN_HORIZON, MELLIN_HORIZON))
    rows = []
    for lam in MELLIN_EXPONENTS:
        value = identities.bessel_sqrt_mellin(3.0, c, z0, lam)
        estimate = functional_estimate(samples, lambda t, lam=lam: (1.0 + np.asarray(t)) ** lam)
        rows.append({"lam": lam, "closed_form": value, "mc_lower": estimate.lower, "mc_upper": estimate.upper,
                     "stderr": estimate.stderr, "z": estimate.z_score(value)})
    write_rows(rows, run.path("mellin"))
    run.report.setdefault("transforms", {})["mellin"] = rows
    run.checks.append(all(abs(r["z"]) <= Z_LIMIT for r in rows))

    cir = (run.params["cir_kappa"], run.params["cir_theta"], run.params["cir_sigma"])
    cir_omega, cir_gamma = families.cir_to_radial_ou(*cir)
    u0, h = run.params["cir_u0"], run.params["cir_h"]
    # CIR from u0 down to h, in the Lamperti coordinate x = 2 sqrt(u) / sigma
    x_start, x_level = 2.0 * math.sqrt(u0) / cir[2], 2.0 * math.sqrt(h) / cir[2]
    lamperti = families.cir_lamperti_spec(*cir)
    run.route("cir_lamperti_coordinate", np.array([x_start, x_level]),
              np.array([families.lamperti_forward(lamperti, u0), families.lamperti_forward(lamperti, h)]),
              tol=NUMERIC_ROUTE_TOL)
    cir_rates = [2.0 * lam * cir_gamma for lam in run.lams]
    cir_closed = [identities.radial_ou_laplace(cir_omega, cir_gamma, x_start, x_level, lam) for lam in run.lams]
    cir_samples = run.simulate(families.radial_ou_spec(cir_omega, cir_gamma), x_start,
                               Boundary.constant(x_level), run.laplace_horizon())
    run.transform("cir_laplace", cir_samples, cir_rates, cir_closed)
    run.report["cir_to_radial_ou"] = {"kappa": cir[0], "theta": cir[1], "sigma": cir[2],
                                      "omega": cir_omega, "gamma": cir_gamma,
                                      "x0": x_start, "level": x_level}


def _sinh_f4(run: Run) -> None:
    kappa, x0, b = run.params["kappa"], run.params["x0"], run.params["b"]
    spec = families.sinh_f4_spec(kappa)
    rates = [4.0 * kappa * lam for lam in run.lams]
    closed = [identities.sinh_f4_laplace(kappa, x0, b, lam) for lam in run.lams]
    generic = [identities.family_laplace(spec, x0, b, s) for s in rates]
    run.route("closed_form_vs_generic_laplace", np.array(closed), np.array(generic), tol=NUMERIC_ROUTE_TOL)
    run.transform("laplace", run.simulate(spec, x0, Boundary.constant(b), run.laplace_horizon()), rates, closed)


TARGETS: Dict[str, Callable[[Run], None]] = {
    "bachelier-levy": _bachelier_levy,
    "coth": _coth,
    "pearson": _pearson,
    "ou-constant": _ou_constant,
    "ou-two-param": _ou_two_param,
    "erf-drift": _erf_drift,
    "bessel-drift": _bessel_drift,
    "radial-ou": _radial_ou,
    "sinh-f4": _sinh_f4,
}


def run(config: RunConfig) -> Dict[str, Any]:
    if config.target is None:
        raise ConfigError("reproduce needs a target")
    if config.target not in TARGETS:
        raise UnknownTargetError(f"unknown target '{config.target}' (choose from {', '.join(sorted(TARGETS))})")
    unknown = set(config.target_params) - set(DEFAULTS[config.target])
    if unknown:
        raise ConfigError(f"{config.target} does not take {', '.join(sorted(unknown))}")

    state = Run(config)
    logger.info(f"reproduce {config.target}: params {state.params}")
    TARGETS[config.target](state)
    passed = all(state.checks)
    state.report["passed"] = passed
    meta = export.write_meta(state.base, config.to_config(), {"report": state.report})
    logger.info(f"reproduce {config.target}: {'pass' if passed else 'FAIL'}")
    return {"command": "reproduce", **state.report, "artifacts": {"csv": str(state.base), "meta": str(meta)}}
