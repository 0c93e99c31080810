"""Symmetry maps: heat table, family maps, composition, boundary mapping and closure."""
import math

import numpy as np
import pytest

from fptlie.errors import HorizonError, ParameterRangeError, SymmetryIndexError
from fptlie.models import Boundary
from fptlie.services import families
from fptlie.services.symmetry import (
    bessel_reduction,
    bm_reduction,
    closure_check,
    compose,
    family_map_names,
    family_symmetry,
    heat_symmetries,
    heat_two_param,
    identity_map,
    inverse,
    map_boundary,
    two_param_symmetry,
)

X_PROBES = np.linspace(0.6, 2.4, 5)
T_PROBES = np.linspace(0.0, 0.8, 4)


def assert_same_map(s1, s2, xs=X_PROBES, ts=T_PROBES, tol=1e-10):
    x, t = np.meshgrid(xs, ts)
    np.testing.assert_allclose(s1.X(x, t), s2.X(x, t), rtol=tol, atol=tol)
    np.testing.assert_allclose(s1.T(ts), s2.T(ts), rtol=tol, atol=tol)
    np.testing.assert_allclose(s1.log_f(x, t), s2.log_f(x, t), rtol=tol, atol=tol)


def test_galilean_multiplier():
    s = heat_symmetries(3, 1.0)
    assert s.f(1.0, 2.0) == pytest.approx(1.0, rel=1e-14)
    assert s.X(1.0, 2.0) == pytest.approx(-1.0)


def test_time_shift_map():
    s = heat_symmetries(5, 0.3)
    assert s.T(1.0) == pytest.approx(1.3)
    assert s.X(0.7, 1.0) == pytest.approx(0.7)
    assert s.f(0.7, 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("index", range(1, 7))
def test_zero_parameter_is_identity(index):
    assert_same_map(heat_symmetries(index, 0.0), identity_map())


def test_heat_index_out_of_range():
    with pytest.raises(SymmetryIndexError):
        heat_symmetries(7, 0.1)


def test_projective_map_has_finite_horizon():
    s = heat_symmetries(1, -0.5)
    assert s.t_max == pytest.approx(2.0)
    with pytest.raises(HorizonError):
        s.T(2.5)


def test_psi_inverts_start_map():
    for s in (heat_symmetries(4, 0.7), two_param_symmetry(families.ou_spec(1.0), 2, 1.0, 1.0),
              bm_reduction(families.ou_spec(1.0))):
        y = s.X(X_PROBES, 0.0)
        np.testing.assert_allclose(s.psi(y), X_PROBES, rtol=1e-12, atol=1e-12)


def test_f2_translation_start():
    s = two_param_symmetry(families.ou_spec(1.0), 2, 1.0, 1.0)
    assert s.X(0.5, 0.0) == pytest.approx(-1.5)
    assert s.psi(-1.5) == pytest.approx(0.5)


def test_f1_two_param_time_change():
    s = two_param_symmetry(families.coth_spec(1.0), 1, 2.0, 0.5)
    assert s.T(1.0) == pytest.approx(2.0)


def test_f3_two_param_unit_is_identity():
    spec = families.bessel_drift_spec(0.5, 1.0)
    assert_same_map(two_param_symmetry(spec, 1, 1.0, 0.0), identity_map())


def test_f3_has_no_second_variant():
    with pytest.raises(SymmetryIndexError):
        two_param_symmetry(families.bessel_drift_spec(0.5, 1.0), 2, 1.0, 0.0)


def test_f2_two_param_horizon_check():
    with pytest.raises(ParameterRangeError):
        two_param_symmetry(families.ou_spec(1.0), 1, -0.5, -0.6)


def test_f1_time_shift_and_scalar():
    spec = families.coth_spec(1.0)
    s5 = family_symmetry(spec, 5, 0.25)
    assert s5.T(1.0) == pytest.approx(1.25)
    assert s5.f(1.0, 1.0) == pytest.approx(1.0)
    assert family_symmetry(spec, 6, 0.5).f(1.0, 1.0) == pytest.approx(math.exp(0.5))


def test_f3_scaling_map():
    spec = families.bessel_drift_spec(0.5, 1.0)
    eps, x, t = 0.4, 1.3, 0.6
    s = family_symmetry(spec, 2, eps)
    assert s.X(x, t) == pytest.approx(x * math.exp(-eps / 2))
    assert s.T(t) == pytest.approx(t * math.exp(-eps))
    expected = (families.log_theta(spec, x) - families.log_theta(spec, x * math.exp(-eps / 2))
                + spec.C * t * (math.exp(-eps) - 1.0))
    assert s.log_f(x, t) == pytest.approx(expected, rel=1e-12)


def test_f2_translation_with_zero_parameter_is_identity():
    assert_same_map(family_symmetry(families.ou_spec(1.0), 3, 0.0), identity_map())


def test_f4_index_range():
    with pytest.raises(SymmetryIndexError):
        family_symmetry(families.radial_ou_spec(0.5, 1.0), 5, 0.1)


def test_compose_with_identity():
    s = heat_symmetries(1, 0.3)
    assert_same_map(compose(identity_map(), s), s)
    assert_same_map(compose(s, identity_map()), s)


def test_space_shift_inverse_pair():
    assert_same_map(compose(heat_symmetries(4, 0.8), heat_symmetries(4, -0.8)), identity_map())


def test_inverse_undoes_map():
    s = bm_reduction(families.ou_spec(1.0))
    assert_same_map(compose(s, inverse(s)), identity_map(), tol=1e-9)


def test_compose_is_associative():
    a, b, c = heat_symmetries(1, 0.2), heat_symmetries(3, 0.5), heat_symmetries(2, 0.1)
    assert_same_map(compose(compose(a, b), c), compose(a, compose(b, c)))


def test_scaling_after_projective_matches_worked_map():
    a, b = 1.0, 0.5
    ratio = b / a
    route = compose(heat_symmetries(2, math.log(ratio)), heat_symmetries(1, ratio))
    x, t = 0.9, 0.7
    s = t + a / b
    assert route.T(t) == pytest.approx(ratio * ratio * t / (1 + ratio * t))
    assert route.log_f(x, t) == pytest.approx(-0.5 * math.log(ratio * s) - x * x / (2 * s), rel=1e-12)


def test_heat_two_param_matches_composition():
    alpha, beta = 1.5, 0.4
    route = compose(heat_symmetries(2, math.log(alpha)), heat_symmetries(1, alpha * beta))
    assert_same_map(heat_two_param(alpha, beta), route)


def test_galilean_boundary_is_a_line():
    g = map_boundary(heat_symmetries(3, 0.5), Boundary.constant(1.0))
    t = np.linspace(0.0, 2.0, 5)
    np.testing.assert_allclose(g(t), 1.0 + 0.5 * t, rtol=1e-14)


def test_identity_boundary():
    b = Boundary.affine(0.3, -0.2)
    t = np.linspace(0.0, 2.0, 5)
    np.testing.assert_allclose(map_boundary(identity_map(), b)(t), b(t))


def test_f1_two_param_boundary():
    spec = families.DriftSpec(family=families.Family.F1, B=0.2, C=0.1, c1=0.0, c2=1.0)
    alpha, beta = 1.3, 0.4
    b = Boundary.affine(1.0, 0.3)
    g = map_boundary(two_param_symmetry(spec, 1, alpha, beta), b)
    t = np.linspace(0.1, 1.0, 4)
    den = 1 + alpha * beta * t
    expected = (den / alpha * b(alpha ** 2 * t / den) + spec.B * t ** 2
                - alpha ** 3 * spec.B * t ** 2 / den)
    np.testing.assert_allclose(g(t), expected, rtol=1e-12)


def test_bessel_reduction_is_identity_for_pure_bessel():
    assert_same_map(bessel_reduction(families.bessel_spec(3.0)), identity_map(), tol=1e-12)


def test_closure_at_zero_parameter():
    spec = families.coth_spec(1.0)
    a_hat, b_hat, deviation = closure_check(spec, 1, 1.2, 0.3, 0.0, 1)
    assert a_hat == pytest.approx(1.2, abs=1e-8)
    assert b_hat == pytest.approx(0.3, abs=1e-8)
    assert deviation <= 1e-10


def test_closure_of_f1_family():
    _, _, deviation = closure_check(families.coth_spec(1.0), 1, 1.2, 0.3, 0.1, 1)
    assert deviation <= 1e-8


def test_closure_of_f2_family():
    _, _, deviation = closure_check(families.ou_spec(1.0), 1, 0.3, 0.2, 0.1, 2)
    assert deviation <= 1e-8


# (spec, two-parameter variant, closing one-parameter index, x range inside the domain)
CLOSURE_CASES = {
    "F1": (families.coth_spec(1.0), 1, 1, (0.5, 2.5)),
    "F2": (families.ou_spec(1.0), 1, 2, (-1.5, 1.5)),
    "F3": (families.bessel_drift_spec(0.5, 1.0), 1, 1, (0.8, 2.5)),
    "F4": (families.radial_ou_spec(0.5, 1.0), 1, 2, (0.8, 2.5)),
}
DRAW_RANGES = {
    "F1": ((0.8, 1.5), (0.1, 0.5)),
    "F2": ((0.1, 0.5), (0.05, 0.4)),
    "F3": ((0.8, 1.5), (0.1, 0.5)),
    "F4": ((0.1, 0.5), (0.05, 0.4)),
}


@pytest.mark.parametrize("family", sorted(CLOSURE_CASES))
def test_closure_over_random_draws(family):
    spec, variant, index, _ = CLOSURE_CASES[family]
    (a_lo, a_hi), (b_lo, b_hi) = DRAW_RANGES[family]
    rng = np.random.default_rng(31)
    for _ in range(20):
        alpha, beta, eps = rng.uniform(a_lo, a_hi), rng.uniform(b_lo, b_hi), rng.uniform(0.02, 0.2)
        _, _, deviation = closure_check(spec, variant, alpha, beta, eps, index)
        assert deviation <= 1e-8, (alpha, beta, eps)


def _constructed_maps():
    maps = [(f"heat-S{i}", heat_symmetries(i, 0.3), (-2.0, 2.0)) for i in range(1, 7)]
    for family, (spec, variant, _, x_range) in CLOSURE_CASES.items():
        maps += [(f"{family}-S{i}", family_symmetry(spec, i, 0.15), x_range) for i in family_map_names(spec)]
        maps.append((f"{family}-two-param", two_param_symmetry(spec, variant, 1.2 if family in ("F1", "F3") else 0.3,
                                                               0.2), x_range))
        reduction = bm_reduction(spec) if family in ("F1", "F2") else bessel_reduction(spec)
        maps.append((f"{family}-reduction", reduction, x_range))
    maps.append(("F2-two-param-2", two_param_symmetry(families.ou_spec(1.0), 2, 0.4, 0.3), (-1.5, 1.5)))
    return maps


CONSTRUCTED_MAPS = _constructed_maps()


@pytest.mark.parametrize("label,s,x_range", CONSTRUCTED_MAPS, ids=[m[0] for m in CONSTRUCTED_MAPS])
def test_psi_round_trip_for_every_map(label, s, x_range):
    rng = np.random.default_rng(5)
    x = rng.uniform(*x_range, size=100)
    np.testing.assert_allclose(s.psi(s.X(x, 0.0)), x, rtol=1e-10, atol=1e-10)
    y = rng.uniform(*sorted(s.X(np.array(x_range), 0.0)), size=100)
    np.testing.assert_allclose(s.X(s.psi(y), 0.0), y, rtol=1e-10, atol=1e-10)
