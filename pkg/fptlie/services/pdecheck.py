"""
PDE Check Service for fptlie

Finite-difference verification that symmetry maps send solutions of one
forward Kolmogorov equation u_t = u_xx/2 - (mu u)_x to solutions of another.

Features:
- Normalized residual of a candidate solution with 4th-order central stencils
- verify_symmetry: probe checked on its own equation first, then mapped and checked
- Free-space probe kernels for every family (heat or Bessel kernel through the reduction)
- Exponent selection for the two-parameter maps (exactly one candidate must pass)
- Perturbed maps as a sensitivity control
"""
import math
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy import special

from ..config import settings
from ..errors import DomainError, ProbeFailure
from ..logs import get_logger
from ..models import DriftSpec, Family, Grid, ResidualReport
from . import families
from .symmetry import SymmetryMap, bessel_reduction, bm_reduction, two_param_symmetry

logger = get_logger("pdecheck")

Drift = Union[None, DriftSpec, Callable]


def _drift_fn(spec: Drift) -> Callable:
    if spec is None:
        return lambda x: np.zeros_like(x)
    if isinstance(spec, DriftSpec):
        return lambda x: np.asarray(families.drift_mu(spec, x), dtype=float)
    return spec


def _d1(f_m2, f_m1, f_p1, f_p2, h):
    return (f_m2 - 8.0 * f_m1 + 8.0 * f_p1 - f_p2) / (12.0 * h)


def _d2(f_m2, f_m1, f_0, f_p1, f_p2, h):
    return (-f_m2 + 16.0 * f_m1 - 30.0 * f_0 + 16.0 * f_p1 - f_p2) / (12.0 * h * h)


def fpk_residual(u: Callable, spec: Drift, grid: Grid, hx: Optional[float] = None, ht: Optional[float] = None,
                 label: Optional[str] = None) -> ResidualReport:
    """
    max |u_xx/2 - (mu u)_x - u_t| / max|u| over the interior grid points.

    Default steps: hx = 0.01 min(1, x-range), ht = 1e-3 min(1, t_lo).
    """
    xs, ts = grid.axes()
    xs, ts = xs[1:-1], ts[1:-1]
    hx = hx or 0.01 * min(1.0, grid.x_hi - grid.x_lo)
    ht = ht or 1e-3 * min(1.0, grid.t_lo)
    if ts.size == 0 or xs.size == 0:
        raise DomainError("grid has no interior points")
    if ts[0] - 2.0 * ht <= 0:
        raise DomainError("time stencil reaches t <= 0; raise t_lo or lower ht")
    mu = _drift_fn(spec)
    X, T = np.meshgrid(xs, ts, indexing="ij")

    def ev(x, t):
        with np.errstate(all="ignore"):
            return np.asarray(u(x, t), dtype=float) * np.ones_like(x)

    x_shift = [X + k * hx for k in (-2, -1, 0, 1, 2)]
    u_x = [ev(x, T) for x in x_shift]
    flux = [np.asarray(mu(x), dtype=float) * v for x, v in zip(x_shift, u_x)]
    u_t = [ev(X, T + k * ht) for k in (-2, -1, 1, 2)]

    residual = (0.5 * _d2(*u_x, hx) - _d1(flux[0], flux[1], flux[3], flux[4], hx) - _d1(*u_t, ht))
    scale = float(np.nanmax(np.abs(u_x[2])))
    if not np.isfinite(scale) or scale == 0.0:
        raise ProbeFailure(f"{label or 'solution'}: not finite or identically zero on the grid")
    normalized = np.abs(residual) / scale
    if not np.all(np.isfinite(normalized)):
        bad = np.argwhere(~np.isfinite(normalized))[0]
        raise ProbeFailure(f"{label or 'solution'}: evaluation failed near x={xs[bad[0]]:g}, t={ts[bad[1]]:g}")
    worst = np.unravel_index(int(np.argmax(normalized)), normalized.shape)
    return ResidualReport(max_abs_residual=float(normalized[worst]), grid=grid,
                          location_of_max=(float(xs[worst[0]]), float(ts[worst[1]])), scale=scale, label=label)


def source_grid(s: SymmetryMap, grid: Grid) -> Grid:
    """Grid covering the image (X(x, t), T(t)) of grid."""
    xs, ts = grid.axes()
    corners = np.concatenate([np.atleast_1d(s.X(grid.x_lo, ts)), np.atleast_1d(s.X(grid.x_hi, ts))])
    tau = np.atleast_1d(s.T(ts))
    return Grid(x_lo=float(corners.min()), x_hi=float(corners.max()), t_lo=float(tau.min()),
                t_hi=float(tau.max()), nx=grid.nx, nt=grid.nt)


def verify_symmetry(s: SymmetryMap, spec: Drift, probe: Callable, grid: Grid, spec_source: Drift = "same",
                    tol: Optional[float] = None) -> ResidualReport:
    """
    Residual of u = f * probe(X, T) under the target equation.

    spec_source defaults to spec (same-process symmetry); pass None for the heat
    equation or a Bessel spec for cross-process reductions.
    """
    tol = tol or settings.residual_tol
    source = spec if isinstance(spec_source, str) else spec_source
    image = source_grid(s, grid)
    probe_report = fpk_residual(probe, source, image, label=f"probe for {s.label}")
    if not probe_report.passed(tol):
        raise ProbeFailure(f"{s.label}: probe is not a solution of the source equation "
                           f"(residual {probe_report.max_abs_residual:.3g})")
    report = fpk_residual(s.apply(probe), spec, grid, label=s.label)
    logger.info(f"verify_symmetry {s.label}: residual {report.max_abs_residual:.3g} "
                f"at {report.location_of_max} ({'pass' if report.passed(tol) else 'FAIL'})")
    return report


# Probe solutions

def heat_kernel(z0: float = 0.0) -> Callable:
    def kernel(x, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-(np.asarray(x) - z0) ** 2 / (2.0 * t)) / np.sqrt(2.0 * math.pi * t)
    return kernel


def bessel_kernel(delta: float, z0: float = 1.0) -> Callable:
    """Transition density of Bessel(delta) from z0: (x/t)(x/z0)^nu e^{-(x^2+z0^2)/2t} I_nu(x z0/t)."""
    nu = 0.5 * delta - 1.0

    def kernel(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        arg = x * z0 / t
        with np.errstate(divide="ignore", invalid="ignore"):
            log_p = np.log(x / t) + nu * np.log(x / z0) - (x - z0) ** 2 / (2.0 * t) + np.log(special.ive(nu, arg))
        return np.exp(log_p)
    return kernel


def probe_solution(spec: Optional[DriftSpec], z0: Optional[float] = None) -> Callable:
    """Free-space solution of the spec's forward equation (heat kernel when spec is None)."""
    if spec is None:
        return heat_kernel(z0 or 0.0)
    if spec.family in (Family.F1, Family.F2):
        return bm_reduction(spec).apply(heat_kernel(z0 or 0.0))
    delta = families.bessel_dimension(spec)
    return bessel_reduction(spec).apply(bessel_kernel(delta, z0 or 1.0))


def reference_spec(spec: Optional[DriftSpec]) -> Optional[DriftSpec]:
    """Source equation of the spec's reduction: heat (None) or Bessel(delta)."""
    if spec is None or spec.family in (Family.F1, Family.F2):
        return None
    return families.bessel_spec(families.bessel_dimension(spec))


# Exponent selection and controls

def _select(candidates: Dict[str, SymmetryMap], spec: DriftSpec, grid: Grid, tol: float) -> Dict[str, object]:
    probe = probe_solution(spec)
    residuals = {name: verify_symmetry(s, spec, probe, grid, tol=tol).max_abs_residual
                 for name, s in candidates.items()}
    passing = [name for name, r in residuals.items() if r <= tol]
    if len(passing) != 1:
        raise ProbeFailure(f"expected exactly one passing candidate, got {passing or 'none'} "
                           f"(residuals {residuals})")
    logger.info(f"exponent selection: {passing[0]} passes, residuals {residuals}")
    return {"selected": passing[0], "residuals": residuals}


def select_alpha_power(spec: DriftSpec, alpha: float, beta: float, grid: Grid,
                       tol: Optional[float] = None) -> Dict[str, object]:
    """Run the F1 two-parameter map with alpha^3 and alpha^4 in the quadratic term; exactly one must pass."""
    if spec.family != Family.F1:
        raise DomainError("alpha-power selection applies to F1")
    candidates = {str(p): two_param_symmetry(spec, 1, alpha, beta, alpha_power=p) for p in (3, 4)}
    result = _select(candidates, spec, grid, tol or settings.residual_tol)
    result["alpha_power"] = int(result["selected"])
    return result


def select_t_minus_power(spec: DriftSpec, alpha: float, beta: float, grid: Grid,
                         tol: Optional[float] = None) -> Dict[str, object]:
    """F2/F4 variant 1 with the derived and the printed T- power; exactly one must pass."""
    if spec.family not in (Family.F2, Family.F4):
        raise DomainError("T- power selection applies to F2 and F4")
    horizon = grid.t_hi * 1.01
    candidates = {flag: two_param_symmetry(spec, 1, alpha, beta, printed=(flag == "printed"), horizon=horizon)
                  for flag in ("derived", "printed")}
    return _select(candidates, spec, grid, tol or settings.residual_tol)


def perturbed(s: SymmetryMap, delta: float) -> SymmetryMap:
    """Same map with f multiplied by e^{delta x}."""
    base = s.log_f_fn
    return s.model_copy(update={"log_f_fn": lambda x, t: base(x, t) + delta * np.asarray(x, dtype=float),
                                "label": f"{s.label}+perturbed({delta:g})"})
