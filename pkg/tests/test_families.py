"""Drift families: theta closed forms, Ricatti residuals, builtins and the Lamperti transform."""
import math

import numpy as np
import pytest

from fptlie.errors import DomainError, UnknownTargetError
from fptlie.models import DriftSpec, Family
from fptlie.services import families


def test_coth_theta_is_sinh():
    log_abs, sign = families.theta(families.coth_spec(1.0), 2.0)
    assert sign == 1
    assert log_abs == pytest.approx(math.log(math.sinh(2.0)), rel=1e-13)


def test_brownian_theta_is_one():
    x = np.linspace(-3.0, 3.0, 7)
    np.testing.assert_allclose(families.log_theta(families.bm_spec(), x), 0.0, atol=1e-15)


def test_power_theta_vanishes_in_log_at_one():
    spec = DriftSpec(family=Family.F3, D=2.0, c1=1.0, c2=0.0)
    assert families.log_theta(spec, 1.0) == pytest.approx(0.0, abs=1e-14)
    expected = (0.5 + math.sqrt(0.25 + 2.0)) * math.log(2.0)
    assert families.log_theta(spec, 2.0) == pytest.approx(expected, rel=1e-12)


def test_drift_values():
    assert families.drift_mu(families.coth_spec(1.0), 1.0) == pytest.approx(1.0 / math.tanh(1.0), rel=1e-12)
    assert families.drift_mu(families.bessel_spec(3.0), 2.0) == pytest.approx(0.5, rel=1e-12)
    assert families.drift_mu(families.radial_ou_spec(0.5, 1.0), 1.0) == pytest.approx(0.0, abs=1e-10)


def test_coth_domain_is_positive_half_line():
    assert families.coth_spec(1.0).domain == (0.0, math.inf)
    with pytest.raises(DomainError):
        families.drift_mu(families.coth_spec(1.0), -0.5)


@pytest.mark.parametrize("name", ["coth:1", "ou:1", "erf:1", "bessel:3", "bessel-drift:0.5,1",
                                  "radial-ou:0.5,1", "sinh-f4:0.5", "tanh-f4", "pearson:1,0,1"])
def test_closed_form_drift_solves_its_ricatti_equation(name, rng):
    spec = families.builtin_spec(name)
    lo, hi = spec.domain
    a = max(lo + 0.3, -3.0)
    b = min(hi - 0.3, 3.0) if math.isfinite(hi) else 3.0
    grid = np.sort(rng.uniform(a, b, 200))
    assert families.verify_ricatti(spec, grid) <= 1e-6


def test_ricatti_residual_detects_wrong_constant():
    spec = families.coth_spec(1.0)
    grid = np.linspace(0.5, 3.0, 50)
    residual = families.verify_ricatti(spec, grid, {"C": spec.C + 0.1})
    assert residual == pytest.approx(0.2, abs=1e-5)


def test_drift_is_invariant_under_theta_scaling():
    x = np.linspace(0.5, 3.0, 11)
    base = DriftSpec(family=Family.F3, C=0.5, D=0.0, c1=1.0, c2=0.0)
    scaled = DriftSpec(family=Family.F3, C=0.5, D=0.0, c1=3.0, c2=0.0)
    np.testing.assert_allclose(families.drift_mu(scaled, x), families.drift_mu(base, x), rtol=1e-12)


@pytest.mark.parametrize("name,x0,x1", [("coth:1", 1.0, 2.0), ("ou:1", 0.0, 1.5),
                                         ("bessel-drift:0.5,1", 1.0, 2.5), ("radial-ou:0.5,1", 1.0, 2.0)])
def test_theta_matches_direct_integration(name, x0, x1):
    spec = families.builtin_spec(name)
    closed = math.exp(families.log_theta(spec, x1) - families.log_theta(spec, x0))
    assert families.integrate_theta(spec, x0, x1) == pytest.approx(closed, rel=1e-6)


def test_family_parameters_are_enforced():
    with pytest.raises(ValueError):
        DriftSpec(family=Family.F1, A=1.0, c1=0.0, c2=1.0)
    with pytest.raises(ValueError):
        DriftSpec(family=Family.F4, A=0.0, D=0.75)


def test_builtin_names():
    assert families.builtin_spec("ou:2").A == pytest.approx(4.0)
    with pytest.raises(UnknownTargetError):
        families.builtin_spec("heston:1")


def test_drift_spec_config_round_trip():
    spec = families.radial_ou_spec(0.5, 1.0)
    again = DriftSpec.from_config(spec.to_config())
    assert again.domain == spec.domain
    assert (again.A, again.C, again.D, again.c1, again.c2) == (spec.A, spec.C, spec.D, spec.c1, spec.c2)


def test_lamperti_constant_volatility():
    spec = families.LampertiSpec(nu_fn=lambda u: 0.0, sigma_fn=lambda u: 2.0)
    assert families.lamperti_forward(spec, 3.0) == pytest.approx(1.5, rel=1e-12)
    assert families.lamperti_drift(spec, 0.7) == pytest.approx(0.0, abs=1e-12)


def test_cir_lamperti_coordinate():
    spec = families.cir_lamperti_spec(1.0, 1.0, 2.0)
    assert families.lamperti_forward(spec, 4.0) == pytest.approx(2.0, rel=1e-8)


def test_cir_to_radial_ou():
    omega, gamma = families.cir_to_radial_ou(1.0, 1.0, 1.0)
    assert omega == pytest.approx(1.0)
    assert gamma == pytest.approx(0.5)


def test_pearson_coordinate_matches_quadrature():
    r, p, q = 1.0, 0.5, 1.0
    spec = families.LampertiSpec(nu_fn=lambda u: 0.0, sigma_fn=lambda u: math.sqrt(r * u * u + p * u + q))
    for u in (-1.0, 0.5, 2.0):
        closed = families.pearson_to_x(r, p, q, u) - families.pearson_to_x(r, p, q, 0.0)
        assert families.lamperti_forward(spec, u) == pytest.approx(closed, rel=1e-9)
        assert families.pearson_from_x(r, p, q, families.pearson_to_x(r, p, q, u)) == pytest.approx(u, abs=1e-12)


def test_pearson_parameters():
    assert families.pearson_symmetric_params(1.0, 0.0, 1.0, printed=True) == pytest.approx((0.75, 0.0))
    assert families.pearson_symmetric_params(4.0, 2.0, 1.0, printed=True) == pytest.approx((3.0, 1.5))
    assert families.pearson_symmetric_params(1.0, 0.0, 1.0) == pytest.approx((1.5, 0.0))
    with pytest.raises(DomainError):
        families.pearson_symmetric_params(1.0, 4.0, 1.0)


def test_pearson_image_drift_is_in_f1_only_for_symmetric_parameters():
    r, p, q = 1.0, 0.0, 1.0
    grid = np.linspace(-1.0, 1.0, 11)
    residuals = {}
    for printed in (False, True):
        alpha, beta = families.pearson_symmetric_params(r, p, q, printed=printed)
        lspec = families.pearson_lamperti_spec(r, p, q, alpha, beta)
        mu = np.vectorize(lambda x: families.lamperti_drift(lspec, x))
        residuals[printed] = families.ricatti_residual(mu, lambda x: np.full_like(x, r), grid)
    assert residuals[False] <= 1e-5
    assert residuals[True] > 1e-2


def test_pearson_transformed_drift_matches_lamperti_image():
    r, p, q = 1.0, 0.0, 1.0
    alpha, beta = families.pearson_symmetric_params(r, p, q)
    lspec = families.pearson_lamperti_spec(r, p, q, alpha, beta)
    spec = families.pearson_transformed_spec(r, p, q)
    for x in (-0.8, 0.0, 0.9):
        assert families.lamperti_drift(lspec, x) == pytest.approx(families.drift_mu(spec, x), rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("name", ["bm", "bessel:3", "ou:1", "radial-ou:0.5,1", "coth:1", "pearson:1,0,1",
                                  "erf:1", "bessel-drift:0.5,1", "sinh-f4:0.5", "tanh-f4"])
def test_constructor_built_specs_keep_their_domain(name):
    spec = families.builtin_spec(name)
    lo, hi = spec.domain
    assert lo < hi
    assert DriftSpec.from_config(spec.to_config()).domain == spec.domain
    x = np.linspace(max(lo, -2.0) + 0.25, min(hi, 2.0) - 0.25, 9)
    assert np.all(np.isfinite(families.drift_mu(spec, x)))


@pytest.mark.parametrize("c1,c2", [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])
def test_airy_branch_solves_its_ricatti_equation(c1, c2, rng):
    spec = DriftSpec(family=Family.F1, B=0.5, C=0.2, c1=c1, c2=c2)
    lo, hi = spec.domain
    grid = np.sort(rng.uniform(max(lo + 0.3, -3.0), min(hi - 0.3, 3.0), 200))
    assert families.verify_ricatti(spec, grid) <= 1e-6


def test_airy_branch_meets_the_exponential_branch_as_b_vanishes():
    x = np.linspace(-1.0, 2.0, 13)
    exponential = families.drift_mu(DriftSpec(family=Family.F1, B=0.0, C=0.5, c1=1.0, c2=1.0), x)
    below_threshold = DriftSpec(family=Family.F1, B=0.1 * families.B_ZERO_THRESHOLD, C=0.5, c1=1.0, c2=1.0)
    np.testing.assert_allclose(families.drift_mu(below_threshold, x), exponential, rtol=1e-12)
    # Bi grows like exp(+sqrt(2C) x) once C / B is large
    airy = DriftSpec(family=Family.F1, B=1e-6, C=0.5, c1=0.0, c2=1.0)
    np.testing.assert_allclose(families.drift_mu(airy, x), exponential, rtol=1e-5)
    assert families.verify_ricatti(airy, x) <= 1e-6
