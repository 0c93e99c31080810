"""
Symmetry Service for fptlie

Realized point symmetries u(x, t) = f(x, t) * U(X(x, t), T(t)) of the heat
equation and of the Fokker-Planck equations of the four Ricatti families.

Features:
- SymmetryMap with affine X = p(t) x + q(t) and log-space multiplier f
- One-parameter heat maps S1..S6 and family maps per F1..F4
- Two-parameter family maps (variants 1 and 2)
- Composition, inversion and boundary mapping g = (b(T) - q) / p
- Reductions of each family to the heat equation (F1, F2) or to a Bessel process (F3, F4)
- Numerical closure check of the two-parameter families under one-parameter maps
"""
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize

from ..errors import FamilyMismatchError, HorizonError, ParameterRangeError, SymmetryIndexError
from ..logs import get_logger
from ..models import Boundary, DriftSpec, Family
from . import families

logger = get_logger("symmetry")


def _arr(t):
    return np.asarray(t, dtype=float)


class SymmetryMap(BaseModel):
    """Affine point map of solutions: u(x, t) = exp(log_f(x, t)) * U(p(t) x + q(t), T(t))."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    p_fn: Callable
    q_fn: Callable
    T_fn: Callable
    log_f_fn: Callable
    T_inv_fn: Optional[Callable] = None
    t_max: float = math.inf             # first t where T stops being finite and increasing
    label: str = "map"

    def _check(self, t) -> np.ndarray:
        t = _arr(t)
        if np.any(t >= self.t_max):
            raise HorizonError(f"{self.label}: t={float(np.max(t)):g} beyond the validity horizon {self.t_max:g}")
        return t

    def p(self, t):
        t = self._check(t)
        return (_arr(self.p_fn(t)) + 0.0 * t)[()]

    def q(self, t):
        t = self._check(t)
        return (_arr(self.q_fn(t)) + 0.0 * t)[()]

    def T(self, t):
        t = self._check(t)
        return (_arr(self.T_fn(t)) + 0.0 * t)[()]

    def T_inv(self, tau):
        if self.T_inv_fn is None:
            raise HorizonError(f"{self.label}: no closed-form inverse of T")
        return _arr(self.T_inv_fn(_arr(tau)))[()]

    def X(self, x, t):
        t = self._check(t)
        return (_arr(self.p_fn(t)) * _arr(x) + _arr(self.q_fn(t)))[()]

    def log_f(self, x, t):
        t = self._check(t)
        x = _arr(x)
        return (_arr(self.log_f_fn(x, t)) + 0.0 * x + 0.0 * t)[()]

    def f(self, x, t):
        return np.exp(self.log_f(x, t))

    def psi(self, y):
        """Inverse of x -> X(x, 0)."""
        return ((_arr(y) - self.q(0.0)) / self.p(0.0))[()]

    def psi_prime(self) -> float:
        return float(1.0 / self.p(0.0))

    def apply(self, solution: Callable) -> Callable:
        """The mapped solution (x, t) -> f(x, t) * solution(X(x, t), T(t))."""
        def mapped(x, t):
            x, t = np.broadcast_arrays(_arr(x), _arr(t))
            return np.exp(self.log_f(x, t)) * solution(self.X(x, t), self.T(t))
        return mapped


# Building blocks

def identity_map() -> SymmetryMap:
    return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: 0.0, T_fn=lambda t: t,
                       log_f_fn=lambda x, t: 0.0, T_inv_fn=lambda tau: tau, label="identity")


def time_shift(eps: float) -> SymmetryMap:
    return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: 0.0, T_fn=lambda t: t + eps,
                       log_f_fn=lambda x, t: 0.0, T_inv_fn=lambda tau: tau - eps,
                       label=f"time-shift({eps:g})")


def scalar(eps: float) -> SymmetryMap:
    return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: 0.0, T_fn=lambda t: t,
                       log_f_fn=lambda x, t: eps, T_inv_fn=lambda tau: tau, label=f"scalar({eps:g})")


def compose(s1: SymmetryMap, s2: SymmetryMap) -> SymmetryMap:
    """
    Map obtained by applying s1, then s2.

    X = X1(X2(x, t), T2(t)), T = T1(T2(t)), f = f2(x, t) * f1(X2(x, t), T2(t)).
    """
    def log_f(x, t):
        return s2.log_f(x, t) + s1.log_f(s2.X(x, t), s2.T(t))

    t_inv = None
    if s1.T_inv_fn is not None and s2.T_inv_fn is not None:
        t_inv = lambda tau: s2.T_inv(s1.T_inv(tau))

    t_max = s2.t_max
    if math.isfinite(s1.t_max) and s2.T_inv_fn is not None:
        try:
            limit = float(s2.T_inv(s1.t_max))
            if math.isfinite(limit) and limit > 0:
                t_max = min(t_max, limit)
        except (FloatingPointError, ValueError, HorizonError):
            pass

    return SymmetryMap(
        p_fn=lambda t: s1.p(s2.T(t)) * s2.p(t),
        q_fn=lambda t: s1.p(s2.T(t)) * s2.q(t) + s1.q(s2.T(t)),
        T_fn=lambda t: s1.T(s2.T(t)),
        log_f_fn=log_f,
        T_inv_fn=t_inv,
        t_max=t_max,
        label=f"{s2.label}*{s1.label}",
    )


def inverse(s: SymmetryMap) -> SymmetryMap:
    """Map undoing s: compose(s, inverse(s)) is the identity."""
    if s.T_inv_fn is None:
        raise HorizonError(f"{s.label}: cannot invert without T^-1")

    def log_f(x, t):
        tau = s.T_inv(t)
        return -s.log_f((x - s.q(tau)) / s.p(tau), tau)

    return SymmetryMap(
        p_fn=lambda t: 1.0 / s.p(s.T_inv(t)),
        q_fn=lambda t: -s.q(s.T_inv(t)) / s.p(s.T_inv(t)),
        T_fn=lambda t: s.T_inv(t),
        log_f_fn=log_f,
        T_inv_fn=lambda tau: s.T(tau),
        label=f"inverse({s.label})",
    )


def map_boundary(s: SymmetryMap, b: Boundary) -> Boundary:
    """g(t) = (b(T(t)) - q(t)) / p(t), exact because X is affine in x."""
    def g(t):
        t = _arr(t)
        return (_arr(b(s.T(t))) - s.q(t)) / s.p(t)

    return Boundary.from_callable(g, label=f"{b.label or b.kind.value} via {s.label}")


# Heat equation u_t = u_xx / 2

def heat_symmetries(index: int, eps: float) -> SymmetryMap:
    """
    One-parameter maps of the heat equation.

    1 projective, 2 scaling, 3 Galilean, 4 space shift, 5 time shift, 6 scalar.
    """
    if index == 1:
        t_max = -1.0 / eps if eps < 0 else math.inf
        return SymmetryMap(
            p_fn=lambda t: 1.0 / (1.0 + eps * t),
            q_fn=lambda t: 0.0,
            T_fn=lambda t: t / (1.0 + eps * t),
            log_f_fn=lambda x, t: -0.5 * np.log1p(eps * t) - eps * x * x / (2.0 * (1.0 + eps * t)),
            T_inv_fn=lambda tau: tau / (1.0 - eps * tau),
            t_max=t_max,
            label=f"heat-S1({eps:g})",
        )
    if index == 2:
        scale = math.exp(eps)
        return SymmetryMap(p_fn=lambda t: scale, q_fn=lambda t: 0.0, T_fn=lambda t: scale ** 2 * t,
                           log_f_fn=lambda x, t: 0.0, T_inv_fn=lambda tau: tau / scale ** 2,
                           label=f"heat-S2({eps:g})")
    if index == 3:
        return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: -eps * t, T_fn=lambda t: t,
                           log_f_fn=lambda x, t: -eps * x + 0.5 * eps * eps * t,
                           T_inv_fn=lambda tau: tau, label=f"heat-S3({eps:g})")
    if index == 4:
        return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: eps, T_fn=lambda t: t,
                           log_f_fn=lambda x, t: 0.0, T_inv_fn=lambda tau: tau,
                           label=f"heat-S4({eps:g})")
    if index == 5:
        return time_shift(eps)
    if index == 6:
        return scalar(eps)
    raise SymmetryIndexError(f"heat symmetry index must be 1..6, got {index}")


def heat_two_param(alpha: float, beta: float) -> SymmetryMap:
    """Scaling by alpha after the projective map with parameter alpha*beta."""
    if alpha == 0.0:
        raise ParameterRangeError("alpha must be non-zero")
    ab = alpha * beta
    return SymmetryMap(
        p_fn=lambda t: alpha / (1.0 + ab * t),
        q_fn=lambda t: 0.0,
        T_fn=lambda t: alpha * alpha * t / (1.0 + ab * t),
        log_f_fn=lambda x, t: -0.5 * np.log1p(ab * t) - ab * x * x / (2.0 * (1.0 + ab * t)),
        T_inv_fn=lambda tau: tau / (alpha * alpha - ab * tau),
        t_max=-1.0 / ab if ab < 0 else math.inf,
        label=f"heat-two-param({alpha:g},{beta:g})",
    )


# Reductions to reference processes

def _require(spec: DriftSpec, allowed, what: str) -> None:
    if spec.family not in allowed:
        names = "/".join(f.value for f in allowed)
        raise FamilyMismatchError(f"{what} needs a {names} drift, got {spec.family.value}")


def _f1_log_r(spec: DriftSpec):
    B, C = spec.B, spec.C

    def log_r(x, t):
        return families.log_theta(spec, x) + 2.0 * B * B * t ** 3 / 3.0 - C * t - 2.0 * B * x * t
    return log_r


def _f2_constants(spec: DriftSpec):
    s = math.sqrt(spec.A)
    return s, families.f2_shift(spec), families.f2_nu(spec)


def bm_reduction(spec: DriftSpec) -> SymmetryMap:
    """Map sending heat-equation solutions to solutions of the F1/F2 equation."""
    _require(spec, (Family.F1, Family.F2), "reduction to Brownian motion")
    if spec.family == Family.F1:
        B = spec.B
        return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: -B * t * t, T_fn=lambda t: t,
                           log_f_fn=_f1_log_r(spec), T_inv_fn=lambda tau: tau,
                           label=f"bm-reduction({spec.label or 'F1'})")
    s, shift, nu = _f2_constants(spec)
    k = math.sqrt(2.0 * s)

    def log_f(x, t):
        y = x + shift
        return families.log_theta(spec, x) + 0.5 * s * y * y + s * (2.0 * nu + 1.0) * t

    return SymmetryMap(
        p_fn=lambda t: k * np.exp(s * t),
        q_fn=lambda t: k * np.exp(s * t) * shift,
        T_fn=lambda t: np.expm1(2.0 * s * t),
        log_f_fn=log_f,
        T_inv_fn=lambda tau: np.log1p(tau) / (2.0 * s),
        label=f"bm-reduction({spec.label or 'F2'})",
    )


def bessel_reduction(spec: DriftSpec) -> SymmetryMap:
    """Map sending Bessel(delta) FPKE solutions to solutions of the F3/F4 equation."""
    _require(spec, (Family.F3, Family.F4), "reduction to a Bessel process")
    delta = families.bessel_dimension(spec)
    C = spec.C
    if spec.family == Family.F3:
        def log_f(x, t):
            return families.log_theta(spec, x) - 0.5 * (delta - 1.0) * np.log(x) - C * t

        return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: 0.0, T_fn=lambda t: t,
                           log_f_fn=log_f, T_inv_fn=lambda tau: tau,
                           label=f"bessel-reduction({spec.label or 'F3'})")
    s = math.sqrt(spec.A)
    k = math.sqrt(2.0 * s)

    def log_f4(x, t):
        return (families.log_theta(spec, x) + 0.5 * (1.0 - delta) * (math.log(k) + np.log(x) + s * t)
                + 0.5 * s * x * x + (0.5 * s - C) * t)

    return SymmetryMap(
        p_fn=lambda t: k * np.exp(s * t),
        q_fn=lambda t: 0.0,
        T_fn=lambda t: np.expm1(2.0 * s * t),
        log_f_fn=log_f4,
        T_inv_fn=lambda tau: np.log1p(tau) / (2.0 * s),
        label=f"bessel-reduction({spec.label or 'F4'})",
    )


# One-parameter family maps

def family_map_names(spec: DriftSpec) -> List[int]:
    """Valid indices of family_symmetry for the spec's family."""
    return [1, 2, 3, 4, 5, 6] if spec.family in (Family.F1, Family.F2) else [1, 2, 3, 4]


def _theta_ratio(spec: DriftSpec):
    def ratio(x, mapped):
        return families.log_theta(spec, x) - families.log_theta(spec, mapped)
    return ratio


def _f1_symmetry(spec: DriftSpec, index: int, eps: float) -> SymmetryMap:
    if index == 5:
        return time_shift(eps)
    if index == 6:
        return scalar(eps)
    reduction = bm_reduction(spec)
    conjugated = compose(compose(inverse(reduction), heat_symmetries(index, eps)), reduction)
    return conjugated.model_copy(update={"label": f"F1-S{index}({eps:g})"})


def _f2_one_sided(spec: DriftSpec, upper: bool, eps: float, shift: float) -> SymmetryMap:
    s = math.sqrt(spec.A)
    nu = families.f2_nu(spec) if spec.family == Family.F2 else families.f4_nu(spec)
    if not eps > -1.0:
        raise ParameterRangeError(f"eps must exceed -1, got {eps:g}")
    t_max = math.inf
    if upper and eps < 0:
        t_max = -math.log(-eps) / (2.0 * s)
    sign = 1.0 if upper else -1.0

    def ramp(t):
        return 1.0 + eps * np.exp(sign * 2.0 * s * t)

    def log_k(x, t):
        y = x + shift
        if upper:
            return families.log_theta(spec, x) + 2.0 * s * nu * t - 0.5 * s * y * y
        return families.log_theta(spec, x) + 2.0 * s * (nu + 0.5) * t + 0.5 * s * y * y

    if upper:
        T_fn = lambda t: -np.log(eps + np.exp(-2.0 * s * t)) / (2.0 * s)
        T_inv = lambda tau: -np.log(np.exp(-2.0 * s * tau) - eps) / (2.0 * s)
    else:
        T_fn = lambda t: np.log(eps + np.exp(2.0 * s * t)) / (2.0 * s)
        T_inv = lambda tau: np.log(np.exp(2.0 * s * tau) - eps) / (2.0 * s)

    def X(x, t):
        return (x + shift) / np.sqrt(ramp(t)) - shift

    def log_f(x, t):
        return log_k(x, t) - log_k(X(x, t), T_fn(t))

    return SymmetryMap(
        p_fn=lambda t: 1.0 / np.sqrt(ramp(t)),
        q_fn=lambda t: shift / np.sqrt(ramp(t)) - shift,
        T_fn=T_fn,
        log_f_fn=log_f,
        T_inv_fn=T_inv,
        t_max=t_max,
        label=f"{spec.family.value}-S{1 if upper else 2}({eps:g})",
    )


def _f2_translation(spec: DriftSpec, alpha: float, beta: float, label: str) -> SymmetryMap:
    """X = x - alpha e^{st} - beta e^{-st} (F2 only)."""
    s, shift, _ = _f2_constants(spec)
    ratio = _theta_ratio(spec)

    def q(t):
        return -alpha * np.exp(s * t) - beta * np.exp(-s * t)

    def log_f(x, t):
        y = x + shift
        return (ratio(x, x + q(t)) - s * y * (alpha * np.exp(s * t) - beta * np.exp(-s * t))
                + 0.5 * s * (alpha * alpha * np.exp(2.0 * s * t) - beta * beta * np.exp(-2.0 * s * t)))

    return SymmetryMap(p_fn=lambda t: 1.0, q_fn=q, T_fn=lambda t: t, log_f_fn=log_f,
                       T_inv_fn=lambda tau: tau, label=label)


def _f3_projective(spec: DriftSpec, alpha: float, beta: float, label: str) -> SymmetryMap:
    """X = alpha x / (1 + alpha beta t), T = alpha^2 t / (1 + alpha beta t) (F3)."""
    if alpha == 0.0:
        raise ParameterRangeError("alpha must be non-zero")
    ab, C = alpha * beta, spec.C
    ratio = _theta_ratio(spec)
    T_fn = lambda t: alpha * alpha * t / (1.0 + ab * t)

    def log_f(x, t):
        return (ratio(x, alpha * x / (1.0 + ab * t)) - ab * x * x / (2.0 * (1.0 + ab * t))
                + C * (T_fn(t) - t) - 0.5 * np.log1p(ab * t))

    return SymmetryMap(p_fn=lambda t: alpha / (1.0 + ab * t), q_fn=lambda t: 0.0, T_fn=T_fn,
                       log_f_fn=log_f, T_inv_fn=lambda tau: tau / (alpha * alpha - ab * tau),
                       t_max=-1.0 / ab if ab < 0 else math.inf, label=label)


def _f3_symmetry(spec: DriftSpec, index: int, eps: float) -> SymmetryMap:
    if index == 1:
        return _f3_projective(spec, 1.0, eps, f"F3-S1({eps:g})")
    if index == 2:
        scale, C = math.exp(-0.5 * eps), spec.C
        ratio = _theta_ratio(spec)

        def log_f(x, t):
            return ratio(x, x * scale) + C * t * (math.exp(-eps) - 1.0)

        return SymmetryMap(p_fn=lambda t: scale, q_fn=lambda t: 0.0, T_fn=lambda t: t * math.exp(-eps),
                           log_f_fn=log_f, T_inv_fn=lambda tau: tau * math.exp(eps),
                           label=f"F3-S2({eps:g})")
    if index == 3:
        return time_shift(eps)
    return scalar(eps)


def family_symmetry(spec: DriftSpec, index: int, eps: float, horizon: Optional[float] = None) -> SymmetryMap:
    """
    One-parameter symmetry of the family's FPKE.

    F1/F2: 1..6 (F2: 1 upper, 2 lower, 3 and 4 translations, 5 time shift, 6 scalar);
    F3: 1 projective, 2 scaling, 3 time shift, 4 scalar; F4: 1 upper, 2 lower, 3 time shift, 4 scalar.
    """
    if index not in family_map_names(spec):
        raise SymmetryIndexError(
            f"{spec.family.value} has symmetries {family_map_names(spec)}, got index {index}")
    if spec.family == Family.F1:
        result = _f1_symmetry(spec, index, eps)
    elif spec.family == Family.F3:
        result = _f3_symmetry(spec, index, eps)
    elif spec.family == Family.F2:
        s, shift, _ = _f2_constants(spec)
        if index in (1, 2):
            result = _f2_one_sided(spec, index == 1, eps, shift)
        elif index == 3:
            result = _f2_translation(spec, eps, 0.0, f"F2-S3({eps:g})")
        elif index == 4:
            result = _f2_translation(spec, 0.0, eps, f"F2-S4({eps:g})")
        elif index == 5:
            result = time_shift(eps)
        else:
            result = scalar(eps)
    else:
        if index in (1, 2):
            result = _f2_one_sided(spec, index == 1, eps, 0.0)
        elif index == 3:
            result = time_shift(eps)
        else:
            result = scalar(eps)
    _check_horizon(result, horizon)
    return result


def _check_horizon(s: SymmetryMap, horizon: Optional[float]) -> None:
    if horizon is not None and s.t_max <= horizon:
        raise ParameterRangeError(f"{s.label} is only valid up to t={s.t_max:g} < horizon {horizon:g}")


# Two-parameter family maps

def _f1_two_param(spec: DriftSpec, alpha: float, beta: float, alpha_power: int) -> SymmetryMap:
    if alpha == 0.0:
        raise ParameterRangeError("alpha must be non-zero")
    B, ab = spec.B, alpha * beta
    log_r = _f1_log_r(spec)
    lift = B * alpha ** alpha_power

    def X(x, t):
        return alpha * (x - B * t * t) / (1.0 + ab * t) + lift * t * t / (1.0 + ab * t) ** 2

    T_fn = lambda t: alpha * alpha * t / (1.0 + ab * t)

    def log_f(x, t):
        y = x - B * t * t
        heat = -0.5 * np.log1p(ab * t) - ab * y * y / (2.0 * (1.0 + ab * t))
        return log_r(x, t) + heat - log_r(X(x, t), T_fn(t))

    return SymmetryMap(
        p_fn=lambda t: alpha / (1.0 + ab * t),
        q_fn=lambda t: -alpha * B * t * t / (1.0 + ab * t) + lift * t * t / (1.0 + ab * t) ** 2,
        T_fn=T_fn,
        log_f_fn=log_f,
        T_inv_fn=lambda tau: tau / (alpha * alpha - ab * tau),
        t_max=-1.0 / ab if ab < 0 else math.inf,
        label=f"F1-two-param-1({alpha:g},{beta:g})" + ("" if alpha_power == 4 else f"[alpha^{alpha_power}]"),
    )


def _f1_translation(spec: DriftSpec, alpha: float, beta: float) -> SymmetryMap:
    """X = x - alpha - beta t (F1 variant 2)."""
    B = spec.B
    ratio = _theta_ratio(spec)

    def log_f(x, t):
        return (ratio(x, x - alpha - beta * t) - 2.0 * alpha * B * t - beta * x
                - beta * B * t * t + 0.5 * beta * beta * t)

    return SymmetryMap(p_fn=lambda t: 1.0, q_fn=lambda t: -alpha - beta * t, T_fn=lambda t: t,
                       log_f_fn=log_f, T_inv_fn=lambda tau: tau,
                       label=f"F1-two-param-2({alpha:g},{beta:g})")


def _t_pm_horizon(s: float, alpha: float, beta: float) -> float:
    """First zero on t > 0 of T+ = alpha + 1 + beta e^{2st} or T- = beta + 1 + alpha e^{-2st}."""
    if not 1.0 + alpha + beta > 0:
        raise ParameterRangeError(f"1 + alpha + beta must be positive, got {1.0 + alpha + beta:g}")
    t_max = math.inf
    if beta < 0:
        t_max = min(t_max, math.log(-(alpha + 1.0) / beta) / (2.0 * s))
    if beta + 1.0 < 0:
        t_max = min(t_max, -math.log(-(beta + 1.0) / alpha) / (2.0 * s))
    return t_max


def _f2_two_param(spec: DriftSpec, alpha: float, beta: float, printed: bool) -> SymmetryMap:
    s = math.sqrt(spec.A)
    if spec.family == Family.F2:
        shift, nu = families.f2_shift(spec), families.f2_nu(spec)
    else:
        shift, nu = 0.0, families.f4_nu(spec)
    t_max = _t_pm_horizon(s, alpha, beta)
    lower_power = (nu - 0.5) if printed else (nu + 0.5)
    norm = math.sqrt(1.0 + alpha + beta)
    ratio = _theta_ratio(spec)

    def t_plus(t):
        return alpha + 1.0 + beta * np.exp(2.0 * s * t)

    def t_minus(t):
        return beta + 1.0 + alpha * np.exp(-2.0 * s * t)

    def p(t):
        return norm / np.sqrt(t_plus(t) * t_minus(t))

    def X(x, t):
        return (x + shift) * p(t) - shift

    def log_f(x, t):
        y = x + shift
        e = np.exp(2.0 * s * t)
        tp, tm = t_plus(t), t_minus(t)
        quad = s * y * y * (alpha * (alpha + 1.0) / e - beta * (beta + 1.0) * e) / (2.0 * tp * tm)
        return ratio(x, X(x, t)) + quad + nu * np.log(tp) - lower_power * np.log(tm)

    return SymmetryMap(
        p_fn=p,
        q_fn=lambda t: shift * p(t) - shift,
        T_fn=lambda t: t + np.log(t_minus(t) / t_plus(t)) / (2.0 * s),
        log_f_fn=log_f,
        t_max=t_max,
        label=f"{spec.family.value}-two-param-1({alpha:g},{beta:g})" + ("[printed]" if printed else ""),
    )


def two_param_symmetry(spec: DriftSpec, variant: int, alpha: float, beta: float,
                       alpha_power: int = 4, printed: bool = False,
                       horizon: Optional[float] = None) -> SymmetryMap:
    """
    Two-parameter symmetry with T(0) = 0.

    Variant 1 exists for every family, variant 2 (pure translations) for F1 and F2.
    alpha_power selects the exponent of the F1 quadratic term; printed selects the
    alternative power of T- in the F2/F4 multiplier.
    """
    if variant not in (1, 2):
        raise SymmetryIndexError(f"variant must be 1 or 2, got {variant}")
    if variant == 2 and spec.family not in (Family.F1, Family.F2):
        raise SymmetryIndexError(f"{spec.family.value} has no second two-parameter variant")
    if spec.family == Family.F1:
        result = (_f1_two_param(spec, alpha, beta, alpha_power) if variant == 1
                  else _f1_translation(spec, alpha, beta))
    elif spec.family == Family.F3:
        result = _f3_projective(spec, alpha, beta, f"F3-two-param-1({alpha:g},{beta:g})")
    elif variant == 1:
        result = _f2_two_param(spec, alpha, beta, printed)
    else:
        result = _f2_translation(spec, alpha, beta, f"F2-two-param-2({alpha:g},{beta:g})")
    _check_horizon(result, horizon)
    return result


# Closure of the two-parameter families

def _probe_points(spec: DriftSpec, t_max: float, n: int = 9) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = spec.domain
    anchor = spec.anchor if spec.anchor is not None else families.DEFAULT_ANCHORS[spec.family]
    if not lo < anchor < hi:
        anchor = 0.5 * (lo + hi)
    a = max(anchor - 0.5, lo + 0.25 * (anchor - lo)) if math.isfinite(lo) else anchor - 0.5
    b = min(anchor + 0.5, hi - 0.25 * (hi - anchor)) if math.isfinite(hi) else anchor + 0.5
    t_end = min(0.5, 0.5 * t_max)
    xs, ts = np.meshgrid(np.linspace(a, b, n), np.linspace(0.0, t_end, n))
    return xs.ravel(), ts.ravel()


def closure_check(spec: DriftSpec, variant: int, alpha: float, beta: float, eps: float,
                  index: int) -> Tuple[float, float, float]:
    """
    Fit (alpha_hat, beta_hat) with S^eps after Sym^{alpha,beta} = time shift after Sym^{alpha_hat,beta_hat}.

    Compares p, q, T and log f (up to an additive constant) on probe points and
    returns (alpha_hat, beta_hat, max deviation); a failed fit gives an infinite deviation.
    """
    base = two_param_symmetry(spec, variant, alpha, beta)
    target = compose(base, family_symmetry(spec, index, eps))
    xs, ts = _probe_points(spec, min(base.t_max, target.t_max))
    try:
        tp, tq, tT = target.p(ts), target.q(ts), target.T(ts)
        tf = target.log_f(xs, ts)
        shift = float(target.T(0.0))
    except (HorizonError, FloatingPointError, ValueError) as exc:
        logger.warning(f"closure_check: composite map not evaluable on probes ({exc})")
        return alpha, beta, math.inf

    def residuals(params):
        a_hat, b_hat = params
        try:
            model = compose(time_shift(shift), two_param_symmetry(spec, variant, a_hat, b_hat))
            df = tf - model.log_f(xs, ts)
            out = np.concatenate([tp - model.p(ts), tq - model.q(ts), tT - model.T(ts), df - np.mean(df)])
        except Exception:
            return np.full(4 * xs.size, 1e6)
        return np.where(np.isfinite(out), out, 1e6)

    try:
        fit = optimize.least_squares(residuals, x0=[alpha, beta], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    except Exception as exc:
        logger.warning(f"closure_check: fit failed ({exc})")
        return alpha, beta, math.inf
    a_hat, b_hat = (float(v) for v in fit.x)
    deviation = float(np.max(np.abs(residuals(fit.x))))
    logger.info(f"closure_check {spec.family.value} variant {variant} S{index}({eps:g}): "
                f"({alpha:g},{beta:g}) -> ({a_hat:.10g},{b_hat:.10g}), deviation {deviation:.3g}")
    return a_hat, b_hat, deviation
