"""Special functions against closed forms, identities and an mpmath oracle."""
import math

import mpmath
import numpy as np
import pytest

from fptlie.errors import DomainError, PoleError, SpecialOverflowError
from fptlie.models import SpecialFunctionResult
from fptlie.services import specfun

mpmath.mp.dps = 50


def test_airy_values_at_zero():
    assert specfun.airy_ai(0.0) == pytest.approx(0.35502805388781724, rel=1e-13)
    assert specfun.airy_bi(0.0) == pytest.approx(0.6149266274460007, rel=1e-13)


@pytest.mark.parametrize("x", [-2.0, 0.0, 3.0])
def test_airy_wronskian(x):
    w = specfun.airy_ai(x) * specfun.airy_bi_prime(x) - specfun.airy_ai_prime(x) * specfun.airy_bi(x)
    assert w == pytest.approx(1.0 / math.pi, rel=1e-9)


def test_airy_bi_large_argument_stays_in_log_space():
    result = specfun.log_airy_bi(200.0)
    assert result.sign == 1
    assert math.isfinite(result.log_abs)
    assert result.log_abs == pytest.approx(float(mpmath.log(mpmath.airybi(200))), rel=1e-12)


def test_bessel_values():
    assert specfun.bessel_i(0, 1.0) == pytest.approx(1.2660658777520082, rel=1e-13)
    assert specfun.bessel_k(0, 1.0) == pytest.approx(0.42102443824070834, rel=1e-13)


def test_bessel_wronskian():
    nu, x = 0.5, 2.0
    value = specfun.bessel_i(nu, x) * specfun.bessel_k(nu + 1, x) + specfun.bessel_i(nu + 1, x) * specfun.bessel_k(nu, x)
    assert value == pytest.approx(1.0 / x, rel=1e-9)


def test_bessel_rejects_nonpositive_argument():
    with pytest.raises(DomainError):
        specfun.bessel_k(0, 0.0)


def test_bessel_log_forms_match_plain_values():
    sign, log_abs = specfun.bessel_k_log(1.5, np.array([0.5, 5.0, 50.0]))
    plain = specfun.bessel_k(1.5, np.array([0.5, 5.0, 50.0]))
    assert np.all(sign == 1)
    np.testing.assert_allclose(np.exp(log_abs), plain, rtol=1e-12)


def test_parabolic_d_minus_one_is_erfc():
    z = 0.7
    expected = math.exp(z * z / 4) * math.sqrt(math.pi / 2) * math.erfc(z / math.sqrt(2))
    assert specfun.parabolic_d(-1.0, z) == pytest.approx(expected, rel=1e-10)


def test_parabolic_d_zero_order_is_gaussian():
    assert specfun.parabolic_d(0.0, 1.3) == pytest.approx(math.exp(-1.3 ** 2 / 4), rel=1e-12)


@pytest.mark.parametrize("z", [-20.0, -5.0, 5.0, 20.0])
def test_parabolic_d_minus_one_tails(z):
    result = specfun.log_parabolic_d(-1.0, z)
    assert result.sign == 1
    with mpmath.workdps(30):
        expected = float(mpmath.log(mpmath.pcfd(-1, z)))
    assert result.log_abs == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("nu,z", [(1.5, 0.4), (-2.3, -1.7), (0.7, 2.999), (0.7, 3.001), (-0.4, 6.0)])
def test_parabolic_d_matches_oracle(nu, z):
    expected = float(mpmath.pcfd(nu, z))
    assert specfun.parabolic_d(nu, z) == pytest.approx(expected, rel=1e-8)


def test_parabolic_d_satisfies_weber_equation():
    nu, h = 0.7, 1e-3
    for z in np.linspace(-2.0, 2.0, 9):
        d = [specfun.parabolic_d(nu, z + k * h) for k in (-1, 0, 1)]
        second = (d[0] - 2 * d[1] + d[2]) / h ** 2
        residual = second - (z * z / 4 - nu - 0.5) * d[1]
        assert abs(residual) <= 1e-6 * max(1.0, abs(d[1]))


def test_parabolic_d_derivative_identity():
    nu, z, h = 1.2, 0.9, 1e-5
    numeric = (specfun.parabolic_d(nu, z + h) - specfun.parabolic_d(nu, z - h)) / (2 * h)
    assert specfun.parabolic_d_prime(nu, z) == pytest.approx(numeric, rel=1e-7)


def test_hk_function_integral_form():
    v, z = -0.8, 0.6
    integral = mpmath.quad(lambda s: mpmath.exp(z * s - s * s / 2) * s ** (-2 * v - 1), [0, mpmath.inf])
    assert specfun.hk_function(v, z) == pytest.approx(float(integral), rel=1e-8)


def test_hk_function_domain():
    with pytest.raises(DomainError):
        specfun.hk_function(0.5, 1.0)


def test_whittaker_m_sinh_case():
    z = 0.9
    assert specfun.whittaker_m(0.0, 0.5, 2 * z) == pytest.approx(2 * math.sinh(z), rel=1e-12)


def test_whittaker_connection_formula():
    lam, mu, z = 0.3, 0.7, 1.1
    w = (specfun.gamma(-2 * mu) / specfun.gamma(0.5 - mu - lam) * specfun.whittaker_m(lam, mu, z)
         + specfun.gamma(2 * mu) / specfun.gamma(0.5 + mu - lam) * specfun.whittaker_m(lam, -mu, z))
    assert specfun.whittaker_w(lam, mu, z) == pytest.approx(w, rel=1e-9)


@pytest.mark.parametrize("lam,mu,z", [(1.2, 0.4, 3.0), (-0.75, 0.35, 0.3), (2.0, 1.5, 20.0)])
def test_whittaker_w_matches_oracle(lam, mu, z):
    assert specfun.whittaker_w(lam, mu, z) == pytest.approx(float(mpmath.whitw(lam, mu, z)), rel=1e-8)


def test_whittaker_m_pole():
    with pytest.raises(PoleError):
        specfun.whittaker_m(0.0, -1.0, 1.0)


def test_whittaker_derivatives_match_differences():
    lam, mu, z, h = -0.3, 0.5, 1.7, 1e-5
    for fn, prime in ((specfun.whittaker_m, specfun.whittaker_m_prime),
                      (specfun.whittaker_w, specfun.whittaker_w_prime)):
        numeric = (fn(lam, mu, z + h) - fn(lam, mu, z - h)) / (2 * h)
        assert prime(lam, mu, z) == pytest.approx(numeric, rel=1e-7)


def test_kummer_u_seam_is_continuous():
    a, b = 0.3, 0.5
    below = specfun.kummer_u(a, b, specfun.KUMMER_U_Z_SWITCH - 1e-9)
    above = specfun.kummer_u(a, b, specfun.KUMMER_U_Z_SWITCH + 1e-9)
    assert below == pytest.approx(above, rel=1e-8)
    assert above == pytest.approx(float(mpmath.hyperu(a, b, specfun.KUMMER_U_Z_SWITCH)), rel=1e-8)


def test_erf_and_gamma():
    assert specfun.erf(0.0) == 0.0
    assert specfun.erf(1.0) == pytest.approx(0.8427007929497149, rel=1e-14)
    assert specfun.gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    with pytest.raises(PoleError):
        specfun.gamma(-1.0)


def test_log_scaled_result_round_trip():
    value = -3.7e-250
    result = SpecialFunctionResult.encode(value)
    assert result.sign == -1
    assert result.decode() == pytest.approx(value, rel=1e-13)
    assert SpecialFunctionResult.encode(0.0).value == 0.0


def _log_oracle(value):
    return int(mpmath.sign(value)), float(mpmath.log(abs(value)))


def test_parabolic_d_random_points_match_oracle():
    draws = np.random.default_rng(2024)
    for nu, z in zip(draws.uniform(-50.0, 50.0, 500), draws.uniform(-30.0, 30.0, 500)):
        result = specfun.log_parabolic_d(nu, z)
        sign, log_abs = _log_oracle(mpmath.pcfd(nu, z))
        assert result.sign == sign, (nu, z)
        assert result.log_abs == pytest.approx(log_abs, abs=1e-8), (nu, z)


def test_whittaker_w_random_points_match_oracle():
    draws = np.random.default_rng(2025)
    points = zip(draws.uniform(-20.0, 20.0, 500), draws.uniform(0.0, 10.0, 500), draws.uniform(1e-3, 60.0, 500))
    for lam, mu, z in points:
        result = specfun.log_whittaker_w(lam, mu, z)
        sign, log_abs = _log_oracle(mpmath.whitw(lam, mu, z))
        assert result.sign == sign, (lam, mu, z)
        assert result.log_abs == pytest.approx(log_abs, abs=1e-8), (lam, mu, z)


@pytest.mark.parametrize("nu,z", [(46.6, 3.73), (-31.0, 12.5), (40.3, -25.0)])
def test_parabolic_d_is_finite_for_large_orders(nu, z):
    value = specfun.parabolic_d(nu, z)
    assert math.isfinite(value)
    assert value == pytest.approx(float(mpmath.pcfd(nu, z)), rel=1e-8)


def test_whittaker_w_is_finite_for_large_index():
    lam, mu, z = 19.09, 0.6, 55.07
    value = specfun.whittaker_w(lam, mu, z)
    assert math.isfinite(value)
    assert value == pytest.approx(float(mpmath.whitw(lam, mu, z)), rel=1e-8)


def test_overflow_raises_and_points_to_log_form():
    with pytest.raises(SpecialOverflowError, match="log_airy_bi"):
        specfun.airy_bi(200.0)
    with pytest.raises(SpecialOverflowError, match="log_parabolic_d"):
        specfun.parabolic_d(10.5, -60.0)
    result = specfun.log_parabolic_d(10.5, -60.0)
    assert result.log_abs == pytest.approx(float(mpmath.log(abs(mpmath.pcfd(10.5, -60)))), rel=1e-10)


def _second_difference(fn, x, h):
    return (fn(x - h) - 2.0 * fn(x) + fn(x + h)) / (h * h)


def test_airy_satisfies_its_equation():
    h = 1e-4
    for x in np.random.default_rng(3).uniform(-6.0, 3.0, 100):
        for fn in (specfun.airy_ai, specfun.airy_bi):
            residual = _second_difference(fn, x, h) - x * fn(x)
            assert abs(residual) <= 1e-6 * max(1.0, abs(x * fn(x)))


def test_parabolic_d_satisfies_weber_equation_at_random_points():
    h = 1e-3
    draws = np.random.default_rng(4)
    for nu, z in zip(draws.uniform(-3.0, 3.0, 100), draws.uniform(-4.0, 6.0, 100)):
        d = lambda s: specfun.parabolic_d(nu, s)  # noqa: E731
        coeff = z * z / 4 - nu - 0.5
        residual = _second_difference(d, z, h) - coeff * d(z)
        assert abs(residual) <= 1e-6 * max(1.0, abs(coeff * d(z))), (nu, z)


def test_whittaker_functions_satisfy_their_equation():
    # lam < mu + 1/2 keeps both solutions zero-free
    h = 1e-3
    draws = np.random.default_rng(5)
    for mu, z in zip(draws.uniform(0.0, 2.0, 100), draws.uniform(1.0, 10.0, 100)):
        lam = draws.uniform(-2.0, mu + 0.4)
        coeff = 0.25 - lam / z + (mu * mu - 0.25) / (z * z)
        for fn in (specfun.whittaker_m, specfun.whittaker_w):
            w = lambda s: fn(lam, mu, s)  # noqa: E731
            residual = _second_difference(w, z, h) - coeff * w(z)
            assert abs(residual) <= 1e-5 * (1.0 + abs(coeff)) * abs(w(z)), (fn.__name__, lam, mu, z)
