"""
Real-argument special functions used by theta-functions and base densities.

Kummer's confluent hypergeometric functions M(a, b, z) and U(a, b, z) are the
kernel; parabolic cylinder functions D_nu and Whittaker functions M/W are
derived from them. Airy, Bessel, erf and Gamma come from scipy.special.
Points where scipy returns a non-finite value inside the supported ranges are
recomputed in log-space with mpmath.

Every function accepts scalars or numpy arrays in its argument and returns a
numpy scalar or array. Plain-value functions raise SpecialOverflowError when
the result does not fit a float; log_* variants return SpecialFunctionResult
(sign and log-magnitude) for scalar arguments, or (sign, log_abs) arrays
through the *_log helpers used by the families module.
"""
import math
from typing import Callable

import mpmath
import numpy as np
from scipy import special

from ..errors import DomainError, PoleError, SpecialOverflowError
from ..logs import get_logger
from ..models import SpecialFunctionResult

logger = get_logger("specfun")

# D_nu: Kummer-M combination for z below this, Kummer-U representation above
PARABOLIC_Z_SWITCH = 3.0
# U(a, b, z): two-M connection formula below this (non-integer b only), library U above
KUMMER_U_Z_SWITCH = 2.0
# Distance of b from an integer below which the connection formula is not used
KUMMER_U_B_GUARD = 1e-3
# Term/sum ratio that flags cancellation beyond six digits
CANCELLATION_LIMIT = 1e6
# Working precision of the mpmath fallback
MP_DPS = 30


def _out(values):
    return np.asarray(values)[()]


def _is_nonpositive_integer(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x <= 0) & (x == np.round(x))


def _finite_or_raise(values, name: str, log_variant: str):
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise SpecialOverflowError(f"{name} does not fit a float here; use {log_variant}")
    return _out(values)


def _mp_signed_log(fn: Callable, *args):
    """(sign, log|fn(*args)|) evaluated with mpmath at MP_DPS digits."""
    with mpmath.workdps(MP_DPS):
        value = mpmath.re(fn(*args))
        if value == 0:
            return 0.0, -math.inf
        return float(mpmath.sign(value)), float(mpmath.log(abs(value)))


def _repair(sign: np.ndarray, log_abs: np.ndarray, mask: np.ndarray, fn: Callable, args_at: Callable, name: str):
    """Recompute the masked entries of (sign, log_abs) with mpmath; args_at(i) gives fn's arguments."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return
    logger.debug(f"{name}: {idx.size} point(s) recomputed with mpmath")
    for i in idx:
        sign[i], log_abs[i] = _mp_signed_log(fn, *args_at(i))


def _bad(sign: np.ndarray, log_abs: np.ndarray) -> np.ndarray:
    return ~(np.isfinite(sign) & np.isfinite(log_abs))


# Airy

def airy_ai(x):
    return _out(special.airy(np.asarray(x, dtype=float))[0])


def airy_bi(x):
    return _finite_or_raise(special.airy(np.asarray(x, dtype=float))[2], "airy_bi", "log_airy_bi")


def airy_ai_prime(x):
    return _out(special.airy(np.asarray(x, dtype=float))[1])


def airy_bi_prime(x):
    return _finite_or_raise(special.airy(np.asarray(x, dtype=float))[3], "airy_bi_prime", "airy_log")


def airy_log(x, which: str = "ai", derivative: bool = False):
    """
    Sign and log|.| of Ai, Bi (or their derivatives), exponentially scaled on x > 0.

    Returns (sign, log_abs) arrays.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sign = np.empty_like(x)
    log_abs = np.empty_like(x)
    pos = x > 0
    idx = (1 if derivative else 0) + (2 if which == "bi" else 0)
    if np.any(pos):
        zeta = 2.0 / 3.0 * x[pos] ** 1.5
        scaled = special.airye(x[pos])[idx]
        sign[pos] = np.sign(scaled)
        with np.errstate(divide="ignore"):
            log_abs[pos] = np.log(np.abs(scaled)) + (zeta if which == "bi" else -zeta)
    if np.any(~pos):
        plain = special.airy(x[~pos])[idx]
        sign[~pos] = np.sign(plain)
        with np.errstate(divide="ignore"):
            log_abs[~pos] = np.log(np.abs(plain))
    return sign, log_abs


def log_airy_bi(x: float) -> SpecialFunctionResult:
    """Bi(x) without overflow for large x."""
    sign, log_abs = airy_log(x, "bi")
    return SpecialFunctionResult(sign=int(sign[0]), log_abs=float(log_abs[0]))


# Modified Bessel

def _check_positive(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"{name} requires x > 0")
    return x


def bessel_i(nu, x):
    x = _check_positive(x, "bessel_i")
    return _out(special.iv(nu, x))


def bessel_k(nu, x):
    x = _check_positive(x, "bessel_k")
    return _out(special.kv(nu, x))


def bessel_i_prime(nu, x):
    x = _check_positive(x, "bessel_i_prime")
    return _out(0.5 * (special.iv(nu - 1, x) + special.iv(nu + 1, x)))


def bessel_k_prime(nu, x):
    x = _check_positive(x, "bessel_k_prime")
    return _out(-0.5 * (special.kv(nu - 1, x) + special.kv(nu + 1, x)))


def bessel_i_log(nu, x):
    """(sign, log|I_nu(x)|) via the exponentially scaled ive."""
    x = _check_positive(x, "bessel_i")
    scaled = np.atleast_1d(special.ive(nu, x))
    with np.errstate(divide="ignore"):
        return np.sign(scaled), np.log(np.abs(scaled)) + np.atleast_1d(x)


def bessel_k_log(nu, x):
    """(sign, log K_nu(x)) via the exponentially scaled kve."""
    x = _check_positive(x, "bessel_k")
    scaled = np.atleast_1d(special.kve(nu, x))
    with np.errstate(divide="ignore"):
        return np.sign(scaled), np.log(np.abs(scaled)) - np.atleast_1d(x)


def log_bessel_i(nu: float, x: float) -> SpecialFunctionResult:
    sign, log_abs = bessel_i_log(nu, x)
    return SpecialFunctionResult(sign=int(sign[0]), log_abs=float(log_abs[0]))


def log_bessel_k(nu: float, x: float) -> SpecialFunctionResult:
    sign, log_abs = bessel_k_log(nu, x)
    return SpecialFunctionResult(sign=int(sign[0]), log_abs=float(log_abs[0]))


# Kummer (confluent hypergeometric)

def kummer_m(a, b, z):
    """Kummer's M(a, b, z) = 1F1(a; b; z)."""
    if np.any(_is_nonpositive_integer(b)):
        raise PoleError("kummer_m undefined for non-positive integer b")
    return _out(special.hyp1f1(a, b, np.asarray(z, dtype=float)))


def kummer_m_prime(a, b, z):
    return _out(np.asarray(a) / np.asarray(b) * kummer_m(a + 1.0, b + 1.0, z))


def _kummer_u_scipy(a: float, b: float, z: np.ndarray) -> np.ndarray:
    if abs(b - round(b)) < KUMMER_U_B_GUARD:
        return np.atleast_1d(special.hyperu(a, b, z))
    out = np.empty_like(z)
    small = z < KUMMER_U_Z_SWITCH
    if np.any(small):
        zs = z[small]
        first = special.gamma(1.0 - b) * special.rgamma(a - b + 1.0) * special.hyp1f1(a, b, zs)
        second = (special.gamma(b - 1.0) * special.rgamma(a) * zs ** (1.0 - b)
                  * special.hyp1f1(a - b + 1.0, 2.0 - b, zs))
        out[small] = first + second
    if np.any(~small):
        out[~small] = special.hyperu(a, b, z[~small])
    return out


def kummer_u_log(a: float, b: float, z):
    """(sign, log|U(a, b, z)|) for z > 0; non-finite library values are redone with mpmath."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0):
        raise DomainError("kummer_u requires z > 0")
    values = _kummer_u_scipy(a, b, z)
    sign = np.sign(values)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs = np.log(np.abs(values))
    _repair(sign, log_abs, _bad(sign, log_abs), mpmath.hyperu, lambda i: (a, b, z[i]), "kummer_u")
    return sign, log_abs


def kummer_u(a, b, z):
    """
    Tricomi's U(a, b, z) for z > 0.

    Small z with b away from integers uses the two-M connection formula;
    otherwise scipy's hyperu.
    """
    sign, log_abs = kummer_u_log(a, b, z)
    with np.errstate(over="ignore"):
        values = sign * np.exp(log_abs)
    return _finite_or_raise(values.reshape(np.shape(z)), "kummer_u", "kummer_u_log")


def kummer_u_prime(a, b, z):
    return _out(-a * kummer_u(a + 1.0, b + 1.0, z))


# Parabolic cylinder

def _parabolic_d_m_form(nu: float, z: np.ndarray):
    """Kummer-M combination; returns (bracket, precision_loss) with D = 2^{nu/2} e^{-z^2/4} bracket."""
    w = 0.5 * z * z
    first = math.sqrt(math.pi) * special.rgamma(0.5 - 0.5 * nu) * special.hyp1f1(-0.5 * nu, 0.5, w)
    second = (-math.sqrt(2.0 * math.pi) * z * special.rgamma(-0.5 * nu)
              * special.hyp1f1(0.5 - 0.5 * nu, 1.5, w))
    total = first + second
    scale = np.maximum(np.abs(first), np.abs(second))
    with np.errstate(divide="ignore", invalid="ignore"):
        loss = scale > CANCELLATION_LIMIT * np.abs(total)
    return total, loss


def _parabolic_d_minus_one_log(z: np.ndarray) -> np.ndarray:
    """log D_{-1}(z) = log(sqrt(pi/2) e^{z^2/4} erfc(z/sqrt(2))), through erfcx on z >= 0."""
    w = z / math.sqrt(2.0)
    half_log = 0.5 * math.log(0.5 * math.pi)
    with np.errstate(over="ignore", divide="ignore"):
        right = half_log - 0.25 * z * z + np.log(special.erfcx(w))
        left = half_log + 0.25 * z * z + np.log(special.erfc(w))
    return np.where(z >= 0, right, left)


def parabolic_d_log(nu: float, z):
    """
    (sign, log|D_nu(z)|, precision_loss) arrays.

    D_nu(z) = 2^{nu/2} e^{-z^2/4} U(-nu/2, 1/2, z^2/2) for z >= PARABOLIC_Z_SWITCH,
    and the equivalent two-M combination (entire in z) below it. Points whose
    M combination loses more than six digits are flagged and recomputed with
    mpmath, as are points where the library value is not finite.
    nu = -1 uses the erfc closed form.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    loss = np.zeros(z.shape, dtype=bool)
    if nu == -1.0:
        return np.ones_like(z), _parabolic_d_minus_one_log(z), loss
    sign = np.empty_like(z)
    log_abs = np.empty_like(z)
    prefactor = 0.5 * nu * math.log(2.0) - 0.25 * z * z

    upper = z >= PARABOLIC_Z_SWITCH
    if np.any(upper):
        u_val = np.atleast_1d(special.hyperu(-0.5 * nu, 0.5, 0.5 * z[upper] ** 2))
        sign[upper] = np.sign(u_val)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_abs[upper] = prefactor[upper] + np.log(np.abs(u_val))
    lower = ~upper
    if np.any(lower):
        bracket, lost = _parabolic_d_m_form(nu, z[lower])
        sign[lower] = np.sign(bracket)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_abs[lower] = prefactor[lower] + np.log(np.abs(np.atleast_1d(bracket)))
        loss[np.flatnonzero(lower)[np.atleast_1d(lost)]] = True
    _repair(sign, log_abs, loss | _bad(sign, log_abs), mpmath.pcfd, lambda i: (nu, z[i]), "parabolic_d")
    return sign, log_abs, loss


def parabolic_d(nu: float, z):
    """Weber parabolic cylinder function D_nu(z)."""
    sign, log_abs, _ = parabolic_d_log(nu, z)
    with np.errstate(over="ignore"):
        values = sign * np.exp(log_abs)
    return _finite_or_raise(values.reshape(np.shape(z)), "parabolic_d", "log_parabolic_d")


def parabolic_d_prime(nu: float, z):
    """D'_nu(z) = (z/2) D_nu(z) - D_{nu+1}(z)."""
    z = np.asarray(z, dtype=float)
    return _out(0.5 * z * parabolic_d(nu, z) - parabolic_d(nu + 1.0, z))


def log_parabolic_d(nu: float, z: float) -> SpecialFunctionResult:
    sign, log_abs, loss = parabolic_d_log(nu, z)
    return SpecialFunctionResult(sign=int(sign[0]), log_abs=float(log_abs[0]),
                                 precision_loss=bool(loss[0]))


def hk_function(v: float, z):
    """
    HK(v, z) = Gamma(-2v) e^{z^2/4} D_{2v}(-z), defined for v < 0.

    Equal to the integral of exp(z s - s^2/2) s^{-2v-1} over s > 0.
    """
    if not v < 0:
        raise DomainError("hk_function requires v < 0")
    z = np.asarray(z, dtype=float)
    sign, log_abs, _ = parabolic_d_log(2.0 * v, -z)
    with np.errstate(over="ignore"):
        values = gamma(-2.0 * v) * sign * np.exp(0.25 * z * z + log_abs)
    return _finite_or_raise(values.reshape(np.shape(z)), "hk_function", "parabolic_d_log")


# Whittaker

def _whittaker_check(mu: float, z, name: str) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError(f"{name} requires z > 0")
    return z


def whittaker_m_log(lam: float, mu: float, z):
    """(sign, log|M_{lam,mu}(z)|); M = e^{-z/2} z^{mu+1/2} M(mu-lam+1/2, 1+2mu, z)."""
    z = np.atleast_1d(_whittaker_check(mu, z, "whittaker_m"))
    if _is_nonpositive_integer(1.0 + 2.0 * mu):
        raise PoleError(f"whittaker_m undefined for 2mu = {2.0 * mu:g} (negative integer)")
    kummer = np.atleast_1d(special.hyp1f1(mu - lam + 0.5, 1.0 + 2.0 * mu, z))
    sign = np.sign(kummer)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_kummer = np.log(np.abs(kummer))
    _repair(sign, log_kummer, _bad(sign, log_kummer), mpmath.hyp1f1,
            lambda i: (mu - lam + 0.5, 1.0 + 2.0 * mu, z[i]), "whittaker_m")
    return sign, -0.5 * z + (mu + 0.5) * np.log(z) + log_kummer


def whittaker_w_log(lam: float, mu: float, z):
    """(sign, log|W_{lam,mu}(z)|); W = e^{-z/2} z^{mu+1/2} U(mu-lam+1/2, 1+2mu, z)."""
    z = np.atleast_1d(_whittaker_check(mu, z, "whittaker_w"))
    sign, log_kummer = kummer_u_log(mu - lam + 0.5, 1.0 + 2.0 * mu, z)
    return sign, -0.5 * z + (mu + 0.5) * np.log(z) + log_kummer


def whittaker_m(lam: float, mu: float, z):
    sign, log_abs = whittaker_m_log(lam, mu, z)
    with np.errstate(over="ignore"):
        values = sign * np.exp(log_abs)
    return _finite_or_raise(values.reshape(np.shape(z)), "whittaker_m", "log_whittaker_m")


def whittaker_w(lam: float, mu: float, z):
    sign, log_abs = whittaker_w_log(lam, mu, z)
    with np.errstate(over="ignore"):
        values = sign * np.exp(log_abs)
    return _finite_or_raise(values.reshape(np.shape(z)), "whittaker_w", "log_whittaker_w")


def whittaker_m_prime(lam: float, mu: float, z):
    z = _whittaker_check(mu, z, "whittaker_m_prime")
    a, b = mu - lam + 0.5, 1.0 + 2.0 * mu
    envelope = np.exp(-0.5 * z) * z ** (mu + 0.5)
    value = envelope * special.hyp1f1(a, b, z)
    return _out(value * (-0.5 + (mu + 0.5) / z) + envelope * (a / b) * special.hyp1f1(a + 1.0, b + 1.0, z))


def whittaker_w_prime(lam: float, mu: float, z):
    z = _whittaker_check(mu, z, "whittaker_w_prime")
    a, b = mu - lam + 0.5, 1.0 + 2.0 * mu
    envelope = np.exp(-0.5 * z) * z ** (mu + 0.5)
    value = envelope * kummer_u(a, b, z)
    return _out(value * (-0.5 + (mu + 0.5) / z) + envelope * kummer_u_prime(a, b, z))


def log_whittaker_m(lam: float, mu: float, z: float) -> SpecialFunctionResult:
    sign, log_abs = whittaker_m_log(lam, mu, z)
    return SpecialFunctionResult(sign=int(sign[0]), log_abs=float(log_abs[0]))


def log_whittaker_w(lam: float, mu: float, z: float) -> SpecialFunctionResult:
    sign, log_abs = whittaker_w_log(lam, mu, z)
    return SpecialFunctionResult(sign=int(sign[0]), log_abs=float(log_abs[0]))


# Elementary-special

def erf(x):
    return _out(special.erf(np.asarray(x, dtype=float)))


def gamma(x):
    x = np.asarray(x, dtype=float)
    if np.any(_is_nonpositive_integer(x)):
        raise PoleError("gamma has poles at non-positive integers")
    return _out(special.gamma(x))
