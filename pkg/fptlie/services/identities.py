"""
Identities Service for fptlie

First-passage-time densities obtained by carrying a known density through a
symmetry map, plus the reference densities and Laplace transforms they start from.

Features:
- Density transfer through any SymmetryMap (ratio form, evaluated in log-space)
- Brownian densities to constant, affine and square-root boundaries
- Reductions F1/F2 -> Brownian motion and F3/F4 -> Bessel process
- Ornstein-Uhlenbeck series densities (constant level and two-parameter boundaries)
- h-transform between drifts sharing (A, B, D), e.g. erf drift from OU
- Laplace transforms: generic (psi_s / theta) and the closed forms of the worked examples
"""
import math
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize, special

from ..config import settings
from ..errors import (
    ConvergenceError,
    DomainError,
    FamilyMismatchError,
    HorizonError,
    NegativeDensityError,
    RootFindingError,
)
from ..logs import get_logger
from ..models import Boundary, BoundaryKind, DensityCurve, Direction, DriftSpec, Family, FptSampleSet, FunctionalEstimate
from . import families, specfun
from .symmetry import (
    SymmetryMap,
    bessel_reduction,
    bm_reduction,
    compose,
    heat_symmetries,
    map_boundary,
    two_param_symmetry,
)

logger = get_logger("identities")

# Step of the nu-scan bracketing zeros of nu -> D_nu(z)
ZERO_SCAN_STEP = 0.05
# Central-difference step in nu for dD_nu/dnu
NU_DIFF_STEP = 1e-5
# Negative values above -NEGATIVE_ROUNDING * max|rho| are treated as rounding noise
NEGATIVE_ROUNDING = 1e-12
# Last-term/partial-sum ratio above which an unconverged series is an error
SERIES_ACCEPT = 1e-8


def _direction(b0: float, x0: float) -> Direction:
    return Direction.DOWN if x0 > b0 else Direction.UP


# Transfer engine

class TransferContext(BaseModel):
    """Symmetry map, start point of the target process and optional diffusion coefficient."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    map: SymmetryMap
    target_start: float
    sigma_fn: Optional[Callable] = None

    @property
    def source_start(self) -> float:
        return float(self.map.X(self.target_start, 0.0))


def transfer_density(ctx: TransferContext, rho_b: Callable, b: Boundary, t_grid,
                     direction: Optional[Direction] = None, meta: Optional[Dict] = None) -> DensityCurve:
    """
    Density of the target process to g = map_boundary(map, b):

        rho_g(t) = [sigma^2(g, t) / sigma^2(b(T), T)] * [f(g, t) / f(x0, 0)]
                   * p(t) * p(0) * rho_b(T(t))

    with rho_b the density of the source process from X(x0, 0) to b.
    """
    m = ctx.map
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    tau = np.atleast_1d(m.T(t))
    if np.any(tau <= 0):
        raise HorizonError(f"{m.label}: mapped time T(t) <= 0 on the grid")
    g = map_boundary(m, b)
    gt = np.atleast_1d(g(t))

    log_ratio = (m.log_f(gt, t) - m.log_f(ctx.target_start, 0.0)
                 + np.log(np.abs(m.p(t))) + math.log(abs(float(m.p(0.0)))))
    if ctx.sigma_fn is not None:
        log_ratio = log_ratio + 2.0 * (np.log(ctx.sigma_fn(gt, t)) - np.log(ctx.sigma_fn(b(tau), tau)))

    base = np.atleast_1d(np.asarray(rho_b(tau), dtype=float))
    scale = float(np.max(np.abs(base))) if base.size else 0.0
    if np.any(base < -NEGATIVE_ROUNDING * scale):
        worst = int(np.argmin(base))
        raise NegativeDensityError(
            f"{m.label}: source density negative ({base[worst]:.3g}) at T={tau[worst]:.6g}")
    base = np.where(base < 0, 0.0, base)
    rho = np.exp(log_ratio) * base
    if direction is None:
        direction = _direction(float(gt[0]), ctx.target_start)
    return DensityCurve(t_grid=t, rho=rho, x0=ctx.target_start, boundary=g, direction=direction,
                        meta={"map": m.label, "source_start": ctx.source_start, **(meta or {})})


# Brownian reference densities

def bm_constant_density(a: float, x0: float, t):
    """|a - x0| / sqrt(2 pi t^3) * exp(-(a - x0)^2 / (2t))."""
    if a == x0:
        raise DomainError("boundary level equals the start point")
    t = np.asarray(t, dtype=float)
    d = abs(a - x0)
    return (d / np.sqrt(2.0 * math.pi * t ** 3) * np.exp(-d * d / (2.0 * t)))[()]


def bm_affine_density(a: float, b_slope: float, x0: float, t):
    """Bachelier-Levy density of BM from x0 to the line a + b t."""
    if a == x0:
        raise DomainError("boundary starts at the start point")
    t = np.asarray(t, dtype=float)
    d = a - x0
    return (abs(d) / np.sqrt(2.0 * math.pi * t ** 3) * np.exp(-(d + b_slope * t) ** 2 / (2.0 * t)))[()]


def _scaled_d(nu: float, z: float) -> float:
    """D_nu(z) / Gamma(nu/2 + 1): same zeros in nu, no overflow for large nu."""
    sign, log_abs, _ = specfun.parabolic_d_log(nu, z)
    return float(sign[0] * math.exp(log_abs[0] - special.gammaln(0.5 * nu + 1.0)))


@lru_cache(maxsize=64)
def parabolic_zeros(z: float, count: int) -> Tuple[float, ...]:
    """First `count` zeros nu > 0 of nu -> D_nu(z), bracketed on a 0.05 scan and refined by brentq."""
    zeros = []
    nu = 0.0
    prev = _scaled_d(nu, z)
    limit = 4.0 * count + 20.0 + z * z
    while len(zeros) < count:
        nxt = nu + ZERO_SCAN_STEP
        if nxt > limit:
            raise RootFindingError(f"found only {len(zeros)} of {count} zeros of D_nu({z:g}) below nu={limit:g}")
        cur = _scaled_d(nxt, z)
        if prev == 0.0:
            zeros.append(nu)
        elif prev * cur < 0:
            zeros.append(optimize.brentq(lambda v: _scaled_d(v, z), nu, nxt, xtol=1e-14))
        nu, prev = nxt, cur
    return tuple(zeros)


def _series_coefficients(z_level: float, z_start: float, count: int):
    """(zeros, D_{nu_j}(z_start) / dD_nu(z_level)/dnu at nu_j)."""
    zeros = np.array(parabolic_zeros(float(z_level), int(count)))
    coefs = np.empty_like(zeros)
    for j, nu in enumerate(zeros):
        h = NU_DIFF_STEP
        slope = (_scaled_d(nu + h, z_level) - _scaled_d(nu - h, z_level)) / (2.0 * h)
        coefs[j] = _scaled_d(nu, z_start) / slope
    return zeros, coefs


def _sum_series(zeros, coefs, decay: Callable, tol: float):
    """Sum coef_j * decay(nu_j) until |term| < tol * |partial| on every point."""
    total = None
    achieved = math.inf
    used = 0
    for nu, coef in zip(zeros, coefs):
        term = coef * decay(nu)
        total = term if total is None else total + term
        used += 1
        with np.errstate(divide="ignore", invalid="ignore"):
            achieved = float(np.max(np.abs(term) / np.maximum(np.abs(total), 1e-300)))
        if used > 1 and achieved < tol:
            break
    return total, {"series_terms": used, "series_tolerance": achieved, "series_converged": achieved < tol}


def _converged_series(z_level: float, z_start: float, decay: Callable, n_terms: Optional[int],
                      tol: Optional[float], label: str):
    """
    Zeros and partial sum of the spectral series, doubling the term count up to settings.series_max_terms.

    Returns (zeros, total, meta). Raises ConvergenceError when the last term is still above
    SERIES_ACCEPT times the partial sum at the cap.
    """
    count = n_terms or settings.series_terms
    cap = max(count, settings.series_max_terms)
    tol = tol or settings.series_tol
    while True:
        zeros, coefs = _series_coefficients(z_level, z_start, count)
        total, meta = _sum_series(zeros, coefs, decay, tol)
        if meta["series_converged"]:
            return zeros, total, meta
        if count >= cap:
            break
        logger.info(f"{label}: {count} terms reach {meta['series_tolerance']:.3g}; retrying with more")
        count = min(2 * count, cap)
    if meta["series_tolerance"] > SERIES_ACCEPT:
        raise ConvergenceError(f"{label}: series not converged with {count} terms "
                               f"(last/partial {meta['series_tolerance']:.3g}); start the time grid later "
                               f"or raise FPTLIE_SERIES_MAX_TERMS")
    logger.warning(f"{label}: series stopped at {count} terms (last/partial {meta['series_tolerance']:.3g})")
    return zeros, total, meta


def bm_sqrt_boundary_density(c: float, w0: float, tau_grid, n_terms: Optional[int] = None,
                             tol: Optional[float] = None) -> DensityCurve:
    """
    Density of BM from w0 to c * sqrt(1 + tau).

    rho(tau) = -1/2 e^{(w0^2 - c^2)/4} sum_j D_{nu_j}(-w0) / dD_nu(-c)/dnu |nu_j (1 + tau)^{-nu_j/2 - 1},
    nu_j the zeros of nu -> D_nu(-c) (reflected to (c, w0) when w0 > c).
    """
    if w0 == c:
        raise DomainError("start point lies on the boundary")
    sgn = -1.0 if w0 < c else 1.0
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    zeros, total, meta = _converged_series(sgn * c, sgn * w0, lambda nu: (1.0 + tau) ** (-0.5 * nu - 1.0),
                                           n_terms, tol, f"bm_sqrt_boundary_density(c={c:g}, w0={w0:g})")
    rho = -0.5 * math.exp(0.25 * (w0 * w0 - c * c)) * total
    return DensityCurve(t_grid=tau, rho=rho, x0=w0, boundary=Boundary(kind=BoundaryKind.SQRT_SHIFT, params=[c, 1.0]),
                        direction=Direction.UP if w0 < c else Direction.DOWN, meta={"zeros": zeros[:meta["series_terms"]].tolist(), **meta})


class _SeriesDensity:
    """Callable tau -> rho for a BM square-root boundary, keeping the last series diagnostics."""

    def __init__(self, c: float, w0: float, s: float):
        self.c, self.w0, self.s = c, w0, s
        self.meta: Dict = {}

    def __call__(self, tau):
        # c sqrt(tau + s) = (c sqrt(s)) sqrt(1 + tau/s); rescale time by s
        curve = bm_sqrt_boundary_density(self.c * math.sqrt(self.s), self.w0, np.asarray(tau) / self.s)
        self.meta = curve.meta
        return curve.rho / self.s


def bm_boundary_density(b: Boundary, w0: float) -> Callable:
    """Closed-form BM density tau -> rho to a constant, affine or c*sqrt(t + s) boundary."""
    if b.kind == BoundaryKind.CONSTANT:
        a = b.params[0]
        return lambda tau: bm_constant_density(a, w0, tau)
    if b.kind == BoundaryKind.AFFINE:
        a, slope = b.params
        return lambda tau: bm_affine_density(a, slope, w0, tau)
    if b.kind == BoundaryKind.SQRT_SHIFT and b.params[1] > 0:
        c, s = b.params
        return _SeriesDensity(c, w0 / math.sqrt(s), s)
    raise DomainError(f"no closed-form Brownian density for a {b.kind.value} boundary")


def bessel3_level_density(b: float, x0: float, t):
    """Bessel(3) from x0 down to 0 < b < x0: (b/x0) times the Brownian density."""
    if not 0 < b < x0:
        raise DomainError("Bessel(3) closed form covers down-crossings 0 < b < x0")
    return (b / x0) * bm_constant_density(b, x0, t)


def bessel3_boundary_density(b: Boundary, z0: float) -> Callable:
    """Bessel(3) from z0 down to a positive boundary b: tau -> (b(tau)/z0) times the Brownian density to b."""
    if not 0 < float(b(0.0)) < z0:
        raise DomainError("Bessel(3) closed form covers down-crossings of a boundary starting in (0, z0)")
    rho_bm = bm_boundary_density(b, z0)

    def rho(tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        level = np.asarray(b(tau), dtype=float)
        if np.any(level <= 0.0):
            raise DomainError("boundary leaves the positive half-line")
        return level / z0 * np.asarray(rho_bm(tau), dtype=float)
    return rho


def bachelier_levy_routes(a: float, b_slope: float, t_grid) -> Dict[str, object]:
    """
    BM from 0 to a + b t by two symmetry routes and the closed form.

    Galilean route: constant level a through the heat map with parameter b.
    Projective route: scaling ln(b/a) after the projective map b/a, from the constant level b.
    """
    if a == 0.0:
        raise DomainError("the line must not start at the origin")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    line = Boundary.affine(a, b_slope)
    galilean = transfer_density(TransferContext(map=heat_symmetries(3, b_slope), target_start=0.0),
                                lambda tau: bm_constant_density(a, 0.0, tau), Boundary.constant(a), t)
    result = {"closed_form": np.asarray(bm_affine_density(a, b_slope, 0.0, t)), "galilean": galilean,
              "boundary": line}
    if b_slope / a > 0:
        ratio = b_slope / a
        route = compose(heat_symmetries(2, math.log(ratio)), heat_symmetries(1, ratio))
        result["projective"] = transfer_density(TransferContext(map=route, target_start=0.0),
                                                lambda tau: bm_constant_density(b_slope, 0.0, tau),
                                                Boundary.constant(b_slope), t)
    else:
        logger.info("bachelier_levy_routes: projective route needs a/b > 0; skipped")
    closed = result["closed_form"]
    deviation = 0.0
    for key in ("galilean", "projective"):
        if key in result:
            rel = np.abs(result[key].rho - closed) / np.maximum(np.abs(closed), 1e-300)
            deviation = max(deviation, float(np.max(rel)))
    result["max_relative_deviation"] = deviation
    return result


# Reductions

def _require(spec: DriftSpec, family: Family) -> None:
    if spec.family != family:
        raise FamilyMismatchError(f"expected a {family.value} drift, got {spec.family.value}")


def _reduce(spec: DriftSpec, reduction: SymmetryMap, b: Boundary, x0: float, t_grid,
            rho_source: Optional[Callable]) -> DensityCurve:
    ctx = TransferContext(map=reduction, target_start=x0)
    rho = rho_source if rho_source is not None else bm_boundary_density(b, ctx.source_start)
    curve = transfer_density(ctx, rho, b, t_grid, meta={"process": spec.label or spec.family.value})
    if isinstance(rho, _SeriesDensity):
        curve.meta.update(rho.meta)
    return curve


def f1_to_bm(spec: DriftSpec, b: Boundary, x0: float, t_grid, rho_bm: Optional[Callable] = None) -> DensityCurve:
    """
    F1 density to g(t) = b(t) + B t^2 from the BM density to b:

        rho_g = theta(g)/theta(x0) exp(2B^2 t^3/3 - C t - 2B t g) rho_b.
    """
    _require(spec, Family.F1)
    return _reduce(spec, bm_reduction(spec), b, x0, t_grid, rho_bm)


def f2_to_bm(spec: DriftSpec, b: Boundary, x0: float, t_grid, rho_bm: Optional[Callable] = None) -> DensityCurve:
    """F2 density to g(t) = e^{-st} b(e^{2st} - 1) / k - 2B/A from the BM density to b (s = sqrt(A), k = sqrt(2s))."""
    _require(spec, Family.F2)
    return _reduce(spec, bm_reduction(spec), b, x0, t_grid, rho_bm)


def f3_to_bessel(spec: DriftSpec, b: Boundary, x0: float, t_grid, rho_bessel: Callable) -> DensityCurve:
    """F3 density to b from the Bessel(delta) density to the same b, delta = 2 + sqrt(4D + 1)."""
    _require(spec, Family.F3)
    return _reduce(spec, bessel_reduction(spec), b, x0, t_grid, rho_bessel)


def f4_to_bessel(spec: DriftSpec, b: Boundary, x0: float, t_grid, rho_bessel: Callable) -> DensityCurve:
    """F4 density to g(t) = e^{-st} b(e^{2st} - 1) / k from the Bessel density to b, started at k x0."""
    _require(spec, Family.F4)
    return _reduce(spec, bessel_reduction(spec), b, x0, t_grid, rho_bessel)


# Ornstein-Uhlenbeck series

def ou_constant_level_density(lambda_: float, a: float, x0: float, t_grid,
                              n_terms: Optional[int] = None, tol: Optional[float] = None) -> DensityCurve:
    """
    OU (dX = -lambda X dt + dW) density from x0 to the level a:

        rho(t) = -lambda e^{lambda (x0^2 - a^2)/2} sum_j D_{nu_j}(-x0 r) / dD_nu(-a r)/dnu |nu_j e^{-lambda nu_j t},

    r = sqrt(2 lambda), nu_j the zeros of nu -> D_nu(-a r) (signs flipped for x0 > a).
    """
    if not lambda_ > 0:
        raise DomainError("OU needs lambda > 0")
    if a == x0:
        raise DomainError("start point lies on the boundary")
    r = math.sqrt(2.0 * lambda_)
    sgn = -1.0 if x0 < a else 1.0
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    zeros, total, meta = _converged_series(sgn * a * r, sgn * x0 * r, lambda nu: np.exp(-lambda_ * nu * t),
                                           n_terms, tol,
                                           f"ou_constant_level_density(lambda={lambda_:g}, a={a:g}, x0={x0:g})")
    rho = -lambda_ * math.exp(0.5 * lambda_ * (x0 * x0 - a * a)) * total
    meta["leading_rate"] = float(lambda_ * zeros[0])
    return DensityCurve(t_grid=t, rho=rho, x0=x0, boundary=Boundary.constant(a),
                        direction=_direction(a, x0), meta=meta)


def ou_two_param_densities(lambda_: float, a: float, alpha: float, beta: float, x0: float,
                           t_grid) -> Tuple[DensityCurve, DensityCurve]:
    """
    OU densities to the two boundary families generated from the level a.

    h(t) = a + alpha e^{-lambda t} + beta e^{lambda t}   (translations, start x0 - alpha - beta)
    q(t) = a sqrt(T+(t) T-(t) / (1 + alpha + beta))      (dilations, start x0 / sqrt(1 + alpha + beta))
    """
    spec = families.ou_spec(lambda_)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    level = Boundary.constant(a)

    def ou_from(start):
        return lambda tau: ou_constant_level_density(lambda_, a, start, np.atleast_1d(tau)).rho

    translation = two_param_symmetry(spec, 2, beta, alpha)
    ctx_h = TransferContext(map=translation, target_start=x0)
    rho_h = transfer_density(ctx_h, ou_from(ctx_h.source_start), level, t,
                             meta={"boundary_family": "exp_combo"})
    rho_h = rho_h.model_copy(update={"boundary": Boundary(kind=BoundaryKind.EXP_COMBO,
                                                          params=[a, alpha, beta, lambda_])})

    dilation = two_param_symmetry(spec, 1, alpha, beta, horizon=float(t[-1]))
    ctx_q = TransferContext(map=dilation, target_start=x0)
    rho_q = transfer_density(ctx_q, ou_from(ctx_q.source_start), level, t,
                             meta={"boundary_family": "sqrt_combination"})
    return rho_h, rho_q


# h-transforms between drifts with the same (A, B, D)

def h_transform_density(target: DriftSpec, reference: DriftSpec, b: Boundary, x0: float, t_grid,
                        rho_reference: Callable) -> DensityCurve:
    """
    rho_target(t) = [theta_t(g)/theta_t(x0)] / [theta_r(g)/theta_r(x0)] e^{-(C_t - C_r) t} rho_reference(t).

    Valid for any boundary g: u_t / theta_t and u_r / theta_r solve the same equation up to e^{-(C_t - C_r) t}.
    """
    if target.family != reference.family or (target.A, target.B, target.D) != (reference.A, reference.B, reference.D):
        raise FamilyMismatchError("h-transform needs drifts of one family with equal A, B, D")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    g = np.atleast_1d(b(t))
    log_w = (families.log_theta(target, g) - families.log_theta(target, x0)
             - families.log_theta(reference, g) + families.log_theta(reference, x0)
             - (target.C - reference.C) * t)
    rho = np.exp(log_w) * np.asarray(rho_reference(t), dtype=float)
    return DensityCurve(t_grid=t, rho=rho, x0=x0, boundary=b, direction=_direction(float(g[0]), x0),
                        meta={"process": target.label, "reference": reference.label})


def erf_drift_density(lambda_: float, a: float, x0: float, t_grid) -> DensityCurve:
    """Density of the erf-drift process (theta = D_{-1}(sqrt(2 lambda) x)) to the level a, from the OU series."""
    ou = ou_constant_level_density(lambda_, a, x0, t_grid)
    curve = h_transform_density(families.erf_spec(lambda_), families.ou_spec(lambda_), Boundary.constant(a),
                                x0, t_grid, lambda t: ou.rho)
    curve.meta.update({k: v for k, v in ou.meta.items() if k.startswith("series")})
    return curve


# Worked-example closed forms

def coth_sloped_line_density(omega: float, a: float, b: float, x0: float, t_grid) -> DensityCurve:
    """
    Coth-drift process (mu = |w| coth(|w| x)) from x0 to the line a t + b:

        |b - x0| / sqrt(2 pi t^3) sinh(|w|(a t + b)) / sinh(|w| x0)
        * exp(-(w^2 + a^2) t / 2 - a (b - x0) - (b - x0)^2 / (2t)).
    """
    if not (x0 > 0 and b > 0):
        raise DomainError("coth process lives on x > 0")
    w = abs(omega)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    line = b + a * t
    if np.any(line <= 0):
        raise DomainError("the line leaves x > 0 on the grid")
    d = b - x0
    log_rho = (math.log(abs(d)) - 0.5 * np.log(2.0 * math.pi * t ** 3)
               + np.log(-np.expm1(-2.0 * w * line)) + w * line
               - math.log(-math.expm1(-2.0 * w * x0)) - w * x0
               - 0.5 * (w * w + a * a) * t - a * d - d * d / (2.0 * t))
    return DensityCurve(t_grid=t, rho=np.exp(log_rho), x0=x0, boundary=Boundary.affine(b, a),
                        direction=_direction(b, x0), meta={"process": f"coth:{omega:g}"})


def pearson_density(r: float, p: float, q: float, u0: float, h: float, t_grid) -> DensityCurve:
    """
    Density of the symmetric Pearson diffusion from u0 to the level h.

    Lamperti coordinates x = F(u) turn it into the F1 drift of pearson_transformed_spec;
    the density follows from the BM density between F(u0) and F(h).
    """
    spec = families.pearson_transformed_spec(r, p, q)
    x0 = float(families.pearson_to_x(r, p, q, u0))
    level = float(families.pearson_to_x(r, p, q, h))
    curve = f1_to_bm(spec, Boundary.constant(level), x0, t_grid)
    curve.meta.update({"u0": u0, "h": h, "x0": x0, "x_level": level,
                       "drift_params": list(families.pearson_symmetric_params(r, p, q))})
    return curve


# Laplace transforms

def _recessive_log(spec: DriftSpec, x, s: float, upper: bool) -> np.ndarray:
    """log psi_s(x): solution of psi'' = (RHS + 2s) psi decaying toward the upper (or lower) end."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    C = spec.C + s
    if spec.family == Family.F1:
        if abs(spec.B) >= families.B_ZERO_THRESHOLD:
            if (spec.B > 0) != upper:
                raise DomainError("no decaying Airy solution toward that end")
            k = float(np.cbrt(4.0 * spec.B))
            return specfun.airy_log(k * (x + C / (2.0 * spec.B)), "ai")[1]
        if not C > 0:
            raise DomainError("Laplace transform needs C + s > 0")
        w = math.sqrt(2.0 * C)
        return -w * x if upper else w * x
    if spec.family == Family.F2:
        sa = math.sqrt(spec.A)
        order = (2.0 * spec.B ** 2 / spec.A - 0.5 * sa - C) / sa
        z = math.sqrt(2.0 * sa) * (x + families.f2_shift(spec))
        return specfun.parabolic_d_log(order, z if upper else -z)[1]
    if not C > 0 and spec.family == Family.F3:
        raise DomainError("Laplace transform needs C + s > 0")
    order = families.bessel_index(spec)
    if spec.family == Family.F3:
        a = math.sqrt(2.0 * C)
        fn = specfun.bessel_k_log if upper else specfun.bessel_i_log
        return fn(order, a * x)[1] + 0.5 * np.log(x)
    sa = math.sqrt(spec.A)
    lam, mu = -C / (2.0 * sa), 0.5 * order
    fn = specfun.whittaker_w_log if upper else specfun.whittaker_m_log
    return fn(lam, mu, sa * x * x)[1] - 0.5 * np.log(x)


def family_laplace(spec: DriftSpec, x0: float, b: float, s: float) -> float:
    """E[e^{-s T}] for the constant level b: phi(x0)/phi(b), phi = psi_s/theta."""
    if x0 == b:
        return 1.0
    upper = x0 > b
    points = np.array([x0, b])
    log_psi = _recessive_log(spec, points, s, upper)
    log_theta = families.log_theta(spec, points)
    return float(math.exp((log_psi[0] - log_theta[0]) - (log_psi[1] - log_theta[1])))


def _require_down(x0: float, b: float) -> None:
    if not x0 > b > 0:
        raise DomainError("closed form covers down-crossings 0 < b < x0")


def bessel_level_laplace(delta: float, x0: float, b: float, lam: float) -> float:
    """Bessel(delta) from x0 to b < x0: (x0/b)^{-w} K_w(x0 sqrt(2 lam)) / K_w(b sqrt(2 lam)), w = delta/2 - 1."""
    _require_down(x0, b)
    w = 0.5 * delta - 1.0
    r = math.sqrt(2.0 * lam)
    log_k = specfun.bessel_k_log(w, np.array([x0 * r, b * r]))[1]
    return float(math.exp(-w * math.log(x0 / b) + log_k[0] - log_k[1]))


def bessel_drift_laplace(omega: float, kappa: float, x0: float, b: float, lam: float) -> float:
    """theta = sqrt(x) I_w(kappa x): I_w(kappa b)/I_w(kappa x0) * K_w(x0 r)/K_w(b r), r = sqrt(2 lam + kappa^2)."""
    _require_down(x0, b)
    r = math.sqrt(2.0 * lam + kappa * kappa)
    log_i = specfun.bessel_i_log(omega, np.array([kappa * b, kappa * x0]))[1]
    log_k = specfun.bessel_k_log(omega, np.array([x0 * r, b * r]))[1]
    return float(math.exp(log_i[0] - log_i[1] + log_k[0] - log_k[1]))


def radial_ou_laplace(omega: float, gamma: float, x0: float, b: float, lam: float) -> float:
    """
    E[e^{-2 lam gamma T}] for the radial OU process from x0 down to b:

        (x0/b)^{-(w+1)} e^{gamma (x0^2 - b^2)/2} W_{(w+1)/2 - lam, |w|/2}(gamma x0^2) / W(gamma b^2).
    """
    _require_down(x0, b)
    kappa, mu = 0.5 * (omega + 1.0) - lam, 0.5 * abs(omega)
    log_w = specfun.whittaker_w_log(kappa, mu, gamma * np.array([x0 * x0, b * b]))[1]
    return float(math.exp(-(omega + 1.0) * math.log(x0 / b) + 0.5 * gamma * (x0 * x0 - b * b)
                          + log_w[0] - log_w[1]))


def sinh_f4_laplace(kappa: float, x0: float, b: float, lam: float) -> float:
    """
    E[e^{-4 kappa lam T}] for theta = sinh(kappa x^2)/sqrt(x) from x0 down to b:

        (1 - e^{-2k b^2}) / (1 - e^{-2k x0^2}) e^{k (b^2 - x0^2)} W_{-lam,1/2}(2k x0^2) / W_{-lam,1/2}(2k b^2).
    """
    _require_down(x0, b)
    zb, z0 = 2.0 * kappa * b * b, 2.0 * kappa * x0 * x0
    log_w = specfun.whittaker_w_log(-lam, 0.5, np.array([z0, zb]))[1]
    return float(math.exp(math.log(-math.expm1(-zb)) - math.log(-math.expm1(-z0)) + 0.5 * (zb - z0)
                          + log_w[0] - log_w[1]))


def bessel_sqrt_mellin(delta: float, c: float, z0: float, lam: float) -> float:
    """
    E[(T + 1)^lam] for Bessel(delta >= 2) from z0 down to c sqrt(1 + t):

        (z0/c)^{-delta/2} e^{(z0^2 - c^2)/4} W_{lam + delta/4, delta/4 - 1/2}(z0^2/2) / W(c^2/2).
    """
    if delta < 2.0:
        raise DomainError("Mellin identity needs delta >= 2")
    return radial_ou_laplace(0.5 * delta - 1.0, 1.0, z0 / math.sqrt(2.0), c / math.sqrt(2.0), -lam)


def ou_laplace(lambda_: float, a: float, x0: float, s: float) -> float:
    """E[e^{-sT}] for OU from x0 to a: e^{lam x0^2/2} D_{-s/lam}(-x0 r) / (e^{lam a^2/2} D_{-s/lam}(-a r)), r = sqrt(2 lam)."""
    sgn = -1.0 if x0 < a else 1.0
    r = math.sqrt(2.0 * lambda_)
    log_d = specfun.parabolic_d_log(-s / lambda_, sgn * r * np.array([x0, a]))[1]
    return float(math.exp(0.5 * lambda_ * (x0 * x0 - a * a) + log_d[0] - log_d[1]))


def empirical_laplace_check(samples: FptSampleSet, lam: float, closed_form: float) -> float:
    """Standardized deviation of the MC estimate of E[e^{-lam T}] from closed_form."""
    from .mc import laplace_estimate
    if not lam > 0:
        raise DomainError("lam must be positive")
    estimate = laplace_estimate(samples, lam)
    z = estimate.z_score(closed_form)
    logger.info(f"laplace check lam={lam:g}: closed={closed_form:.6g} "
                f"mc=[{estimate.lower:.6g}, {estimate.upper:.6g}] se={estimate.stderr:.3g} z={z:.3f}")
    return z


def reweighted_laplace(samples: FptSampleSet, weight_fn: Callable, lam: float) -> FunctionalEstimate:
    """E_target[e^{-lam T}] from reference samples, with rho_target(t) = weight_fn(t) rho_reference(t)."""
    n = samples.n_paths
    times = samples.crossing_times
    values = np.zeros(n)
    values[:times.size] = np.asarray(weight_fn(times), dtype=float) * np.exp(-lam * times)
    lower = float(values.sum() / n)
    stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    censored = n - times.size
    tail = float(np.asarray(weight_fn(samples.horizon)) * math.exp(-lam * samples.horizon))
    return FunctionalEstimate(lower=lower, upper=lower + censored * tail / n, stderr=stderr, n_paths=n)
