"""
Ricatti drift families, their theta-functions and the Lamperti transform.

For a drift mu in one of the families F1..F4, mu' + mu^2 equals

    F1: 4Bx + 2C          F2: Ax^2 + 4Bx + 2C
    F3: 2C + D/x^2        F4: Ax^2 + 2C + D/x^2

and mu = theta'/theta with theta a positive solution of theta'' = RHS * theta.
theta and theta' are evaluated in log-space (sign, log|.|) because the ratios
used by the boundary-crossing identities divide exponentially large values.
"""
import math
from typing import Callable, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate, optimize, special

from ..errors import DomainError, FamilyMismatchError, QuadratureError, RootFindingError, UnknownTargetError
from ..logs import get_logger
from ..models import DriftSpec, Family
from . import specfun

logger = get_logger("families")

# |B| below this switches F1 from the Airy branch to the exponential/linear branches
B_ZERO_THRESHOLD = 1e-12
# Half-width scanned around the anchor when looking for zeros of theta
SCAN_HALF_WIDTH = 12.0
SCAN_STEP = 5e-3
# Points used to check theta > 0 on the working domain
POSITIVITY_GRID = 1000
# theta zeros closer than this to x = 0 are placed at 0
ZERO_SNAP = 1e-12

DEFAULT_ANCHORS = {Family.F1: 0.0, Family.F2: 0.0, Family.F3: 1.0, Family.F4: 1.0}


def _log_combine(*terms):
    """
    Signed sum of coef * sign * exp(log) in log-space.

    terms: (coef, sign_array, log_array); returns (sign, log_abs) arrays.
    """
    active = [(c, s, l) for c, s, l in terms if c != 0.0]
    logs = [math.log(abs(c)) + l for c, _, l in active]
    stacked = np.stack(np.broadcast_arrays(*logs))
    peak = np.max(stacked, axis=0)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    total = np.zeros_like(peak)
    for (c, s, _), lg in zip(active, logs):
        with np.errstate(over="ignore", invalid="ignore"):
            total = total + math.copysign(1.0, c) * s * np.exp(lg - peak)
    with np.errstate(divide="ignore"):
        return np.sign(total), peak + np.log(np.abs(total))


def _plain(values: np.ndarray):
    sign = np.sign(values)
    with np.errstate(divide="ignore"):
        return sign, np.log(np.abs(values))


# Family constants

def f2_shift(spec: DriftSpec) -> float:
    """2B/A: F2 is centred at y = x + 2B/A."""
    return 2.0 * spec.B / spec.A


def f2_nu(spec: DriftSpec) -> float:
    """nu with theta built from D_{2 nu}: (2B^2/A - sqrt(A)/2 - C) / (2 sqrt(A))."""
    s = math.sqrt(spec.A)
    return (2.0 * spec.B ** 2 / spec.A - 0.5 * s - spec.C) / (2.0 * s)


def f4_nu(spec: DriftSpec) -> float:
    """nu = -1/4 - C / (2 sqrt(A)); the Whittaker index is nu + 1/4."""
    return -0.25 - spec.C / (2.0 * math.sqrt(spec.A))


def bessel_index(spec: DriftSpec) -> float:
    """sqrt(1/4 + D), the Bessel order of the inverse-square term."""
    return math.sqrt(0.25 + spec.D)


def bessel_dimension(spec: DriftSpec) -> float:
    """delta = 2 + sqrt(4D + 1) of the reference Bessel process."""
    if spec.family not in (Family.F3, Family.F4):
        raise FamilyMismatchError("Bessel dimension is defined for F3 and F4")
    return 2.0 + math.sqrt(4.0 * spec.D + 1.0)


def ricatti_rhs(spec: DriftSpec, x, coefficients: Optional[dict] = None):
    """mu' + mu^2 of the family, optionally with overridden A, B, C, D."""
    c = {"A": spec.A, "B": spec.B, "C": spec.C, "D": spec.D}
    if coefficients:
        c.update(coefficients)
    x = np.asarray(x, dtype=float)
    if spec.family == Family.F1:
        out = 4.0 * c["B"] * x + 2.0 * c["C"]
    elif spec.family == Family.F2:
        out = c["A"] * x ** 2 + 4.0 * c["B"] * x + 2.0 * c["C"]
    elif spec.family == Family.F3:
        out = 2.0 * c["C"] + c["D"] / x ** 2
    else:
        out = c["A"] * x ** 2 + 2.0 * c["C"] + c["D"] / x ** 2
    return np.asarray(out)[()]


# theta and theta' per family: each returns ((sign, log), (sign', log'))

def _theta_f1(spec: DriftSpec, x: np.ndarray):
    c1, c2, B, C = spec.c1, spec.c2, spec.B, spec.C
    if abs(B) >= B_ZERO_THRESHOLD:
        k = float(np.cbrt(4.0 * B))
        xi = k * (x + C / (2.0 * B))
        ai, bi = specfun.airy_log(xi, "ai"), specfun.airy_log(xi, "bi")
        aip, bip = specfun.airy_log(xi, "ai", True), specfun.airy_log(xi, "bi", True)
        value = _log_combine((c1, *ai), (c2, *bi))
        prime = _log_combine((c1 * k, *aip), (c2 * k, *bip))
        return value, prime
    if C > 0:
        w = math.sqrt(2.0 * C)
        up, down = 0.5 * (c1 + c2), 0.5 * (c2 - c1)
        ones = np.ones_like(x)
        value = _log_combine((up, ones, w * x), (down, ones, -w * x))
        prime = _log_combine((up * w, ones, w * x), (-down * w, ones, -w * x))
        return value, prime
    if C == 0:
        return _plain(c1 * x + c2), _plain(np.full_like(x, c1))
    w = math.sqrt(-2.0 * C)
    return (_plain(c1 * np.sin(w * x) + c2 * np.cos(w * x)),
            _plain(w * (c1 * np.cos(w * x) - c2 * np.sin(w * x))))


def _theta_f2(spec: DriftSpec, x: np.ndarray):
    s = math.sqrt(spec.A)
    k = math.sqrt(2.0 * s)            # fourth root of 4A
    order = 2.0 * f2_nu(spec)
    z = k * (x + f2_shift(spec))
    plus_s, plus_l, _ = specfun.parabolic_d_log(order, z)
    minus_s, minus_l, _ = specfun.parabolic_d_log(order, -z)
    value = _log_combine((spec.c1, plus_s, plus_l), (spec.c2, minus_s, minus_l))
    # D'(z) = (z/2) D(z) - D_{order+1}(z); theta' = k (c1 D'(z) - c2 D'(-z))
    next_plus_s, next_plus_l, _ = specfun.parabolic_d_log(order + 1.0, z)
    next_minus_s, next_minus_l, _ = specfun.parabolic_d_log(order + 1.0, -z)
    with np.errstate(divide="ignore"):
        half_z = np.log(np.abs(0.5 * z))
    prime = _log_combine(
        (spec.c1 * k, np.sign(z) * plus_s, half_z + plus_l),
        (-spec.c1 * k, next_plus_s, next_plus_l),
        (spec.c2 * k, np.sign(z) * minus_s, half_z + minus_l),
        (spec.c2 * k, next_minus_s, next_minus_l),
    )
    return value, prime


def _theta_f3(spec: DriftSpec, x: np.ndarray):
    order = bessel_index(spec)
    C = spec.C
    log_x = np.log(x)
    if C == 0:
        up, down = 0.5 + order, 0.5 - order
        ones = np.ones_like(x)
        value = _log_combine((spec.c1, ones, up * log_x), (spec.c2, ones, down * log_x))
        prime = _log_combine((spec.c1 * up, ones, (up - 1.0) * log_x),
                             (spec.c2 * down, ones, (down - 1.0) * log_x))
        return value, prime
    if C > 0:
        a = math.sqrt(2.0 * C)
        i_s, i_l = specfun.bessel_i_log(order, a * x)
        k_s, k_l = specfun.bessel_k_log(order, a * x)
        ip_s, ip_l = _plain_scaled(0.5 * (special.ive(order - 1, a * x) + special.ive(order + 1, a * x)), a * x)
        kp_s, kp_l = _plain_scaled(-0.5 * (special.kve(order - 1, a * x) + special.kve(order + 1, a * x)), -a * x)
    else:
        a = math.sqrt(-2.0 * C)
        i_s, i_l = _plain(special.jv(order, a * x))
        k_s, k_l = _plain(special.yv(order, a * x))
        ip_s, ip_l = _plain(0.5 * (special.jv(order - 1, a * x) - special.jv(order + 1, a * x)))
        kp_s, kp_l = _plain(0.5 * (special.yv(order - 1, a * x) - special.yv(order + 1, a * x)))
    # theta = sqrt(x) Z(ax), theta' = Z(ax) / (2 sqrt(x)) + a sqrt(x) Z'(ax)
    value = _log_combine((spec.c1, i_s, i_l + 0.5 * log_x), (spec.c2, k_s, k_l + 0.5 * log_x))
    prime = _log_combine(
        (0.5 * spec.c1, i_s, i_l - 0.5 * log_x),
        (0.5 * spec.c2, k_s, k_l - 0.5 * log_x),
        (a * spec.c1, ip_s, ip_l + 0.5 * log_x),
        (a * spec.c2, kp_s, kp_l + 0.5 * log_x),
    )
    return value, prime


def _plain_scaled(scaled: np.ndarray, log_scale: np.ndarray):
    sign, log_abs = _plain(np.asarray(scaled))
    return sign, log_abs + log_scale


def _whittaker_prime_log(which: str, lam: float, mu: float, z: np.ndarray):
    """(sign, log) of M'_{lam,mu}(z) or W'_{lam,mu}(z) by the product rule."""
    a, b = mu - lam + 0.5, 1.0 + 2.0 * mu
    log_env = -0.5 * z + (mu + 0.5) * np.log(z)
    if which == "m":
        value = specfun.whittaker_m_log(lam, mu, z)
        coef, inner = a / b, _plain(np.atleast_1d(special.hyp1f1(a + 1.0, b + 1.0, z)))
    else:
        value = specfun.whittaker_w_log(lam, mu, z)
        coef, inner = -a, specfun.kummer_u_log(a + 1.0, b + 1.0, z)
    factor_s, factor_l = _plain(-0.5 + (mu + 0.5) / z)
    return _log_combine(
        (1.0, value[0] * factor_s, value[1] + factor_l),
        (coef, inner[0], inner[1] + log_env),
    )


def _theta_f4(spec: DriftSpec, x: np.ndarray):
    s = math.sqrt(spec.A)
    lam = f4_nu(spec) + 0.25
    mu = 0.5 * bessel_index(spec)
    z = s * x * x
    log_x = np.log(x)
    m_s, m_l = specfun.whittaker_m_log(lam, mu, z) if spec.c1 != 0.0 else (np.ones_like(z), np.zeros_like(z))
    w_s, w_l = specfun.whittaker_w_log(lam, mu, z) if spec.c2 != 0.0 else (np.ones_like(z), np.zeros_like(z))
    w_sum = _log_combine((spec.c1, m_s, m_l), (spec.c2, w_s, w_l))
    mp = _whittaker_prime_log("m", lam, mu, z) if spec.c1 != 0.0 else (np.ones_like(z), np.zeros_like(z))
    wp = _whittaker_prime_log("w", lam, mu, z) if spec.c2 != 0.0 else (np.ones_like(z), np.zeros_like(z))
    w_prime = _log_combine((spec.c1, *mp), (spec.c2, *wp))
    # theta = x^{-1/2} w(s x^2), theta' = -x^{-3/2} w / 2 + 2 s x^{1/2} w'
    value = (w_sum[0], w_sum[1] - 0.5 * log_x)
    prime = _log_combine(
        (-0.5, w_sum[0], w_sum[1] - 1.5 * log_x),
        (2.0 * s, w_prime[0], w_prime[1] + 0.5 * log_x),
    )
    return value, prime


_THETA = {Family.F1: _theta_f1, Family.F2: _theta_f2, Family.F3: _theta_f3, Family.F4: _theta_f4}


def _theta_pair(spec: DriftSpec, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return _THETA[spec.family](spec, x)


def _check_in_domain(spec: DriftSpec, x) -> None:
    lo, hi = spec.domain
    x = np.asarray(x, dtype=float)
    if np.any(~((x > lo) & (x < hi))):
        raise DomainError(f"x outside the domain ({lo:g}, {hi:g}) of the {spec.family.value} drift")


def log_theta(spec: DriftSpec, x):
    """log theta(x) on the domain (theta > 0 there)."""
    _check_in_domain(spec, x)
    (_, log_abs), _ = _theta_pair(spec, x)
    return log_abs.reshape(np.shape(x))[()]


def theta(spec: DriftSpec, x) -> Tuple:
    """(log|theta(x)|, sign) from the family's closed form."""
    _check_in_domain(spec, x)
    (sign, log_abs), _ = _theta_pair(spec, x)
    shape = np.shape(x)
    return log_abs.reshape(shape)[()], sign.reshape(shape)[()]


def theta_prime(spec: DriftSpec, x) -> Tuple:
    """(log|theta'(x)|, sign) from analytic derivatives of the closed form."""
    _check_in_domain(spec, x)
    _, (sign, log_abs) = _theta_pair(spec, x)
    shape = np.shape(x)
    return log_abs.reshape(shape)[()], sign.reshape(shape)[()]


def drift_mu(spec: DriftSpec, x):
    """mu(x) = theta'(x) / theta(x)."""
    _check_in_domain(spec, x)
    (s, l), (sp, lp) = _theta_pair(spec, x)
    mu = s * sp * np.exp(lp - l)
    return mu.reshape(np.shape(x))[()]


def ricatti_residual(mu_fn: Callable, rhs_fn: Callable, grid) -> float:
    """max |mu' + mu^2 - RHS| with mu' by central differences, h = 1e-5 * max(1, |x|)."""
    x = np.asarray(grid, dtype=float)
    h = 1e-5 * np.maximum(1.0, np.abs(x))
    mu_prime = (mu_fn(x + h) - mu_fn(x - h)) / (2.0 * h)
    return float(np.max(np.abs(mu_prime + mu_fn(x) ** 2 - rhs_fn(x))))


def verify_ricatti(spec: DriftSpec, grid, coefficients: Optional[dict] = None) -> float:
    """Residual of the family's Ricatti equation for the closed-form drift."""
    return ricatti_residual(lambda x: drift_mu(spec, x),
                            lambda x: ricatti_rhs(spec, x, coefficients), grid)


def integrate_theta(spec: DriftSpec, x_anchor: float, x_end: float) -> float:
    """theta(x_end) / theta(x_anchor) by integrating theta'' = RHS * theta from the anchor."""
    mu0 = float(drift_mu(spec, x_anchor))

    def rhs(x, y):
        return [y[1], ricatti_rhs(spec, x) * y[0]]

    solution = integrate.solve_ivp(rhs, (x_anchor, x_end), [1.0, mu0], method="DOP853",
                                   rtol=1e-12, atol=1e-14)
    if not solution.success:
        raise QuadratureError(f"theta integration failed: {solution.message}")
    return float(solution.y[0, -1])


# Domain resolution (called from DriftSpec validation)

def _theta_sign(spec: DriftSpec, x: np.ndarray) -> np.ndarray:
    (sign, log_abs), _ = _theta_pair(spec, x)
    # overflowed magnitudes keep their sign; only exact zeros count as zeros
    return np.where(log_abs == -np.inf, 0.0, np.where(np.isnan(sign), 1.0, sign))


def _first_zero(spec: DriftSpec, anchor: float, end: float) -> Optional[float]:
    """Nearest zero of theta between anchor and end, or None."""
    n = max(int(abs(end - anchor) / SCAN_STEP), 2)
    xs = np.linspace(anchor, end, n + 1)
    signs = _theta_sign(spec, xs)
    bad = np.flatnonzero(signs <= 0)
    if bad.size == 0:
        return None
    j = bad[0]
    lo, hi = xs[j - 1], xs[j]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _theta_sign(spec, np.array([mid]))[0] > 0:
            lo = mid
        else:
            hi = mid
    return 0.0 if abs(hi) < ZERO_SNAP else float(hi)


def resolve_domain(spec: DriftSpec) -> Tuple[float, float]:
    """Maximal zero-free interval of theta around the anchor (or the given domain)."""
    if spec.domain is not None:
        return spec.domain
    lo, hi = (0.0, math.inf) if spec.family in (Family.F3, Family.F4) else (-math.inf, math.inf)
    anchor = spec.anchor if spec.anchor is not None else DEFAULT_ANCHORS[spec.family]
    if not lo < anchor < hi:
        raise ValueError(f"anchor {anchor:g} outside ({lo:g}, {hi:g})")
    if _theta_sign(spec, np.array([anchor]))[0] <= 0:
        raise ValueError(f"theta is not positive at the anchor {anchor:g}")
    right = _first_zero(spec, anchor, min(hi, anchor + SCAN_HALF_WIDTH) if math.isfinite(hi)
                        else anchor + SCAN_HALF_WIDTH)
    left_end = max(lo + 1e-9, anchor - SCAN_HALF_WIDTH) if math.isfinite(lo) else anchor - SCAN_HALF_WIDTH
    left = _first_zero(spec, anchor, left_end)
    return (lo if left is None else left, hi if right is None else right)


def check_positive(spec: DriftSpec) -> None:
    """theta > 0 on a dense grid of the (clipped) domain; raises ValueError otherwise."""
    lo, hi = spec.domain
    anchor = spec.anchor if spec.anchor is not None else DEFAULT_ANCHORS[spec.family]
    if not lo < anchor < hi:
        anchor = 0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else (
            lo + 1.0 if math.isfinite(lo) else hi - 1.0 if math.isfinite(hi) else 0.0)
    a = max(lo, anchor - SCAN_HALF_WIDTH)
    b = min(hi, anchor + SCAN_HALF_WIDTH)
    xs = np.linspace(a, b, POSITIVITY_GRID + 2)[1:-1]
    if np.any(_theta_sign(spec, xs) <= 0):
        raise ValueError(f"theta is not positive on ({lo:g}, {hi:g})")
    if spec.is_experimental:
        logger.warning(f"F1 spec with B={spec.B:g} < 0 uses the real cube root (experimental)")


# Builtin processes

def _parse_args(name: str, text: str, count: int):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UnknownTargetError(f"builtin '{name}' needs numeric parameters, got '{text}'")
    if len(values) != count:
        raise UnknownTargetError(f"builtin '{name}' needs {count} parameter(s)")
    return values


def bm_spec() -> DriftSpec:
    return DriftSpec(family=Family.F1, c1=0.0, c2=1.0, label="bm")


def bessel_spec(delta: float) -> DriftSpec:
    """Bessel process of dimension delta: theta = x^{(delta-1)/2}."""
    D = (delta - 1.0) * (delta - 3.0) / 4.0
    c1, c2 = (1.0, 0.0) if delta >= 2.0 else (0.0, 1.0)
    return DriftSpec(family=Family.F3, D=D, c1=c1, c2=c2, label=f"bessel:{delta:g}")


def ou_spec(lambda_: float) -> DriftSpec:
    """Ornstein-Uhlenbeck dX = -lambda X dt + dW: theta = exp(-lambda x^2 / 2)."""
    return DriftSpec(family=Family.F2, A=lambda_ ** 2, C=-0.5 * lambda_, c1=1.0, c2=0.0,
                     label=f"ou:{lambda_:g}")


def radial_ou_spec(omega: float, gamma: float) -> DriftSpec:
    """Radial OU: theta = x^{omega+1/2} exp(-gamma x^2 / 2), written through W."""
    return DriftSpec(family=Family.F4, A=gamma ** 2, C=-gamma * (omega + 1.0), D=omega ** 2 - 0.25,
                     c1=0.0, c2=1.0, label=f"radial-ou:{omega:g},{gamma:g}")


def coth_spec(omega: float) -> DriftSpec:
    """theta = sinh(|omega| x) on (0, inf): mu = |omega| coth(|omega| x)."""
    return DriftSpec(family=Family.F1, C=0.5 * omega ** 2, c1=1.0, c2=0.0, anchor=1.0,
                     label=f"coth:{omega:g}")


def erf_spec(lambda_: float) -> DriftSpec:
    """theta = D_{-1}(sqrt(2 lambda) x) = e^{lambda x^2/2} sqrt(pi/2) erfc(sqrt(lambda) x)."""
    return DriftSpec(family=Family.F2, A=lambda_ ** 2, C=0.5 * lambda_, c1=1.0, c2=0.0,
                     label=f"erf:{lambda_:g}")


def bessel_drift_spec(omega: float, kappa: float) -> DriftSpec:
    """Bessel process with drift: theta = sqrt(x) I_omega(kappa x)."""
    return DriftSpec(family=Family.F3, C=0.5 * kappa ** 2, D=omega ** 2 - 0.25, c1=1.0, c2=0.0,
                     label=f"bessel-drift:{omega:g},{kappa:g}")


def sinh_f4_spec(kappa: float) -> DriftSpec:
    """theta = M_{0,1/2}(2 kappa x^2) / (2 sqrt(x)) = sinh(kappa x^2) / sqrt(x)."""
    return DriftSpec(family=Family.F4, A=4.0 * kappa ** 2, D=0.75, c1=0.5, c2=0.0,
                     label=f"sinh-f4:{kappa:g}")


def tanh_f4_spec() -> DriftSpec:
    """theta = cosh(x^2) / sqrt(x) = (M_{0,1/2}(2x^2) / 2 + W_{0,1/2}(2x^2)) / sqrt(x)."""
    return DriftSpec(family=Family.F4, A=4.0, D=0.75, c1=0.5, c2=1.0, label="tanh-f4")


def pearson_spec(r: float, p: float, q: float) -> DriftSpec:
    return pearson_transformed_spec(r, p, q)


BUILTINS = {
    "bm": (0, lambda: bm_spec()),
    "bessel": (1, bessel_spec),
    "ou": (1, ou_spec),
    "radial-ou": (2, radial_ou_spec),
    "coth": (1, coth_spec),
    "pearson": (3, pearson_spec),
    "erf": (1, erf_spec),
    "bessel-drift": (2, bessel_drift_spec),
    "sinh-f4": (1, sinh_f4_spec),
    "tanh-f4": (0, lambda: tanh_f4_spec()),
}


def builtin_spec(name: str) -> DriftSpec:
    """Parse 'name' or 'name:<p1>,<p2>' into a DriftSpec."""
    key, _, args = name.partition(":")
    key = key.strip().lower()
    if key not in BUILTINS:
        raise UnknownTargetError(f"unknown process '{key}' (choose from {', '.join(sorted(BUILTINS))})")
    count, factory = BUILTINS[key]
    values = _parse_args(key, args, count) if count else []
    try:
        return factory(*values)
    except ValueError as exc:
        raise DomainError(f"invalid parameters for '{name}': {exc}")


# Lamperti transform

class LampertiSpec(BaseModel):
    """Original diffusion dU = nu(U)dt + sigma(U)dW and the reference point y0."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nu_fn: Callable
    sigma_fn: Callable
    y0: float = 0.0
    sigma_prime_fn: Optional[Callable] = None
    u_domain: Tuple[float, float] = (-math.inf, math.inf)


def lamperti_forward(spec: LampertiSpec, u: float) -> float:
    """x = integral of 1/sigma from y0 to u (adaptive quadrature, relative tolerance 1e-10)."""
    def integrand(v):
        sigma = spec.sigma_fn(v)
        if not sigma > 0:
            raise QuadratureError(f"sigma({v:g}) = {sigma:g} is not positive; Lamperti map not monotone")
        return 1.0 / sigma

    value, error, info = integrate.quad(integrand, spec.y0, u, epsabs=0.0, epsrel=1e-10,
                                        limit=200, full_output=1)[:3]
    if not math.isfinite(value) or (abs(value) > 0 and error > 1e-8 * abs(value)):
        raise QuadratureError(f"Lamperti quadrature failed at u={u:g} (error estimate {error:.3g})")
    return float(value)


def lamperti_inverse(spec: LampertiSpec, x: float) -> float:
    """u with lamperti_forward(u) = x by bracketed root finding."""
    lo_bound, hi_bound = spec.u_domain
    if x == 0.0:
        return spec.y0
    step, direction = 1.0, 1.0 if x > 0 else -1.0
    near, far = spec.y0, spec.y0
    for _ in range(200):
        candidate = spec.y0 + direction * step
        if not lo_bound < candidate < hi_bound:
            candidate = hi_bound - 1e-12 if direction > 0 else lo_bound + 1e-12
        far = candidate
        if (lamperti_forward(spec, far) - x) * direction >= 0:
            break
        near = far
        step *= 2.0
    else:
        raise RootFindingError(f"could not bracket the Lamperti inverse of x={x:g}")
    a, b = sorted((near, far))
    return float(optimize.brentq(lambda u: lamperti_forward(spec, u) - x, a, b, xtol=1e-14, rtol=1e-13))


def lamperti_drift(spec: LampertiSpec, x: float) -> float:
    """mu(x) = (nu/sigma - sigma'/2) at u = F^{-1}(x)."""
    u = lamperti_inverse(spec, x)
    if spec.sigma_prime_fn is not None:
        sigma_prime = spec.sigma_prime_fn(u)
    else:
        h = 1e-6 * max(1.0, abs(u))
        sigma_prime = (spec.sigma_fn(u + h) - spec.sigma_fn(u - h)) / (2.0 * h)
    return float(spec.nu_fn(u) / spec.sigma_fn(u) - 0.5 * sigma_prime)


def cir_to_radial_ou(kappa: float, theta_level: float, sigma: float) -> Tuple[float, float]:
    """(omega, gamma) of X = 2 sqrt(U) / sigma for dU = kappa(theta - U)dt + sigma sqrt(U) dW."""
    return 2.0 * kappa * theta_level / sigma ** 2 - 1.0, 0.5 * kappa


def cir_lamperti_spec(kappa: float, theta_level: float, sigma: float) -> LampertiSpec:
    return LampertiSpec(
        nu_fn=lambda u: kappa * (theta_level - u),
        sigma_fn=lambda u: sigma * math.sqrt(u),
        sigma_prime_fn=lambda u: 0.5 * sigma / math.sqrt(u),
        y0=0.0,
        u_domain=(0.0, math.inf),
    )


# Pearson diffusions dU = (alpha U + beta)dt + sqrt(r U^2 + p U + q) dW

def _pearson_d(r: float, p: float, q: float) -> float:
    if not r > 0:
        raise DomainError("Pearson diffusion needs r > 0")
    d = 4.0 * r * q - p * p
    if not d > 0:
        raise DomainError(f"Pearson diffusion needs d = 4rq - p^2 > 0, got {d:g}")
    return d


def pearson_symmetric_params(r: float, p: float, q: float, printed: bool = False) -> Tuple[float, float]:
    """
    Linear-drift coefficients (alpha, beta) for which the Lamperti image is in F1.

    The image has drift [(alpha - r/2)(u + p/2r) + beta - p/4 - (alpha - r/2) p/2r] / sigma(u),
    which solves mu' + mu^2 = r only for (3r/2, 3p/4). printed=True returns (3r/4, 3p/4).
    """
    _pearson_d(r, p, q)
    if printed:
        return 0.75 * r, 0.75 * p
    return 1.5 * r, 0.75 * p


def pearson_lamperti_spec(r: float, p: float, q: float, alpha: float, beta: float) -> LampertiSpec:
    d = _pearson_d(r, p, q)
    shift = -p / (2.0 * r) + (1.0 - d / (4.0 * r)) / (2.0 * math.sqrt(r))
    return LampertiSpec(
        nu_fn=lambda u: alpha * u + beta,
        sigma_fn=lambda u: math.sqrt(r * u * u + p * u + q),
        sigma_prime_fn=lambda u: (2.0 * r * u + p) / (2.0 * math.sqrt(r * u * u + p * u + q)),
        y0=shift,
    )


def pearson_transformed_spec(r: float, p: float, q: float) -> DriftSpec:
    """F1 spec (B = 0, C = r/2) with theta = e^{sqrt(r) x} + (d/4r) e^{-sqrt(r) x}."""
    ratio = _pearson_d(r, p, q) / (4.0 * r)
    return DriftSpec(family=Family.F1, C=0.5 * r, c1=1.0 - ratio, c2=1.0 + ratio,
                     label=f"pearson:{r:g},{p:g},{q:g}")


def pearson_to_x(r: float, p: float, q: float, u) -> np.ndarray:
    """Closed-form Lamperti coordinate x = ln(sigma(u) + sqrt(r) u + p / (2 sqrt(r))) / sqrt(r)."""
    _pearson_d(r, p, q)
    u = np.asarray(u, dtype=float)
    sr = math.sqrt(r)
    return (np.log(np.sqrt(r * u * u + p * u + q) + sr * u + p / (2.0 * sr)) / sr)[()]


def pearson_from_x(r: float, p: float, q: float, x) -> np.ndarray:
    d = _pearson_d(r, p, q)
    x = np.asarray(x, dtype=float)
    sr = math.sqrt(r)
    return (-p / (2.0 * r) + (np.exp(sr * x) - d / (4.0 * r) * np.exp(-sr * x)) / (2.0 * sr))[()]
