import math

import numpy as np
import pytest
import scipy.integrate
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from batchdist.errors import BubblePointError, InvalidInputError
from batchdist.reference import ideal_binary
from batchdist.thermo import (
    activity_coefficients,
    bubble_point,
    excess_gibbs,
    k_values,
    liquid_enthalpy,
    vapor_enthalpy,
    vapor_pressure,
)

# frozen with mpmath from the raw handbook coefficients (50 digits)
WATER_NBP = 373.1468297367164
# NRTL propan-2-ol/water, x = (0.5, 0.5), T = 350 K
GAMMA_IPA_WATER = (1.2631876708116076, 1.7071994560236396)


def composition(draw_weights):
    w = np.asarray(draw_weights, dtype=float)
    return w / w.sum()


ternary = st.lists(st.floats(0.02, 1.0), min_size=3, max_size=3).map(composition)


def test_water_normal_boiling_point(mixture):
    water = mixture.components[mixture.index("water")]
    T = scipy.optimize.brentq(lambda T: vapor_pressure(water, T) - 101325.0, 350.0, 400.0, xtol=1e-12)
    assert T == pytest.approx(WATER_NBP, rel=1e-9)
    assert T == pytest.approx(373.15, rel=5e-3)


def test_vapor_pressure_flags_extrapolation(mixture):
    water = mixture.components[mixture.index("water")]
    assert not vapor_pressure(water, 350.0).extrapolated
    assert vapor_pressure(water, 400.0).extrapolated
    with pytest.raises(InvalidInputError):
        vapor_pressure(water, math.nan)
    with pytest.raises(InvalidInputError):
        vapor_pressure(water, -5.0)


@given(st.floats(280.0, 370.0), st.floats(0.01, 10.0))
def test_vapor_pressure_increasing(T, dT):
    for comp in ideal_binary().components:
        assert vapor_pressure(comp, T + dT) > vapor_pressure(comp, T)


def test_nrtl_binary_oracle(mixture):
    # at x_butanol = 0 the ternary reduces to the binary pair
    x = np.array([0.0, 0.5, 0.5])
    gamma = activity_coefficients(mixture, x, 350.0)
    np.testing.assert_allclose(gamma[1:], GAMMA_IPA_WATER, rtol=1e-12)


def test_gamma_pure_component_limit(mixture):
    for i in range(3):
        x = np.zeros(3)
        x[i] = 1.0
        assert activity_coefficients(mixture, x, 360.0)[i] == pytest.approx(1.0, abs=1e-14)


def test_ideal_mixture_gamma_is_one():
    gamma = activity_coefficients(ideal_binary(), [0.3, 0.7], 350.0)
    np.testing.assert_array_equal(gamma, [1.0, 1.0])


def test_composition_validation(mixture):
    with pytest.raises(InvalidInputError):
        activity_coefficients(mixture, [0.5, 0.5, 0.5], 350.0)
    with pytest.raises(InvalidInputError):
        activity_coefficients(mixture, [0.5, 0.5], 350.0)
    with pytest.raises(InvalidInputError):
        k_values(mixture, [0.2, 0.3, 0.5], 350.0, 0.0)


def test_k_values_definition(mixture):
    x, T, P = np.array([0.2, 0.3, 0.5]), 355.0, 70000.0
    psat = np.array([vapor_pressure(c, T) for c in mixture.components])
    expected = activity_coefficients(mixture, x, T) * psat / P
    np.testing.assert_allclose(k_values(mixture, x, T, P), expected, rtol=1e-13)


def _bisection_bubble(mixture, x, P):
    def f(T):
        return float(np.dot(k_values(mixture, x, T, P), x)) - 1.0
    return scipy.optimize.bisect(f, 300.0, 420.0, xtol=1e-12, maxiter=200)


@pytest.mark.parametrize("x", [(0.429, 0.43, 0.141), (0.1, 0.1, 0.8), (0.8, 0.1, 0.1), (0.0, 0.5, 0.5)])
def test_bubble_point_matches_bisection(mixture, x):
    bp = bubble_point(mixture, x, 70000.0)
    assert bp.T == pytest.approx(_bisection_bubble(mixture, np.array(x), 70000.0), abs=1e-7)
    assert abs(np.dot(k_values(mixture, x, bp.T, 70000.0), x) - 1.0) <= 1e-10
    assert abs(bp.y.sum() - 1.0) <= 1e-10


def test_bubble_point_pure_component_is_saturation(mixture):
    bp = bubble_point(mixture, [0.0, 0.0, 1.0], 101325.0)
    assert bp.T == pytest.approx(WATER_NBP, abs=1e-6)


def test_bubble_point_without_bracket(mixture):
    with pytest.raises(BubblePointError):
        bubble_point(mixture, [0.3, 0.3, 0.4], 1e9)


@settings(max_examples=40, deadline=None)
@given(ternary, st.floats(30000.0, 101325.0))
def test_bubble_point_properties(mixture, x, P):
    bp = bubble_point(mixture, x, P)
    assert abs(np.dot(k_values(mixture, x, bp.T, P), x) - 1.0) <= 1e-10
    assert np.all(bp.y >= 0)
    # higher pressure, higher bubble temperature
    assert bubble_point(mixture, x, P * 1.05).T > bp.T


def test_liquid_enthalpy_datum_and_quadrature(mixture):
    t_ref = mixture.reference_temperature
    x = np.array([0.2, 0.3, 0.5])
    assert liquid_enthalpy(mixture, x, t_ref) == pytest.approx(0.0, abs=1e-9)
    expected = 0.0
    for xi, comp in zip(x, mixture.components):
        cp = np.polynomial.Polynomial(comp.cp_liquid)
        expected += xi * scipy.integrate.quad(cp, t_ref, 360.0, epsabs=1e-12, epsrel=1e-13)[0]
    assert liquid_enthalpy(mixture, x, 360.0) == pytest.approx(expected, rel=1e-12)


def test_vapor_minus_liquid_is_watson_latent_heat(mixture):
    y, T = np.array([0.2, 0.3, 0.5]), 350.0
    latent = 0.0
    for yi, comp in zip(y, mixture.components):
        dh, t0, tc, n = comp.dh_vap
        latent += yi * dh * ((tc - T) / (tc - t0)) ** n
    diff = vapor_enthalpy(mixture, y, T) - liquid_enthalpy(mixture, y, T)
    assert diff == pytest.approx(latent, rel=1e-12)


def test_pure_functions_are_deterministic(mixture):
    x = [0.3, 0.3, 0.4]
    a = bubble_point(mixture, x, 65000.0)
    b = bubble_point(mixture, x, 65000.0)
    assert a.T == b.T and np.array_equal(a.y, b.y)


@settings(max_examples=30, deadline=None)
@given(ternary, st.floats(320.0, 380.0))
def test_gibbs_duhem(mixture, x, T):
    # sum_i x_i dln(gamma_i) = 0 along any composition direction
    d = np.array([1.0, -0.5, -0.5]) * 1e-6
    if np.any(x + d <= 0) or np.any(x - d <= 0):
        return
    lg_p = np.log(activity_coefficients(mixture, x + d, T))
    lg_m = np.log(activity_coefficients(mixture, x - d, T))
    assert abs(np.dot(x, lg_p - lg_m)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(ternary, st.floats(320.0, 380.0))
def test_excess_gibbs_is_weighted_log_gamma(mixture, x, T):
    lg = np.log(activity_coefficients(mixture, x, T))
    assert excess_gibbs(mixture, x, T) == pytest.approx(float(np.dot(x, lg)), rel=1e-10, abs=1e-13)
