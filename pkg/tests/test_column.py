import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batchdist.column import (
    ColumnState,
    ControlInputs,
    PlantParams,
    StateDerivative,
    apparatus_holdup,
    assemble_residuals,
    consistent_derivative,
    initialize_consistent,
    internal_energy_material,
    pressure_profile,
    residual_row_labels,
)
from batchdist.errors import ConfigurationError, InvalidInputError, StateViolationError

C1_CONTROLS = ControlInputs(epsilon=0.30, P_head=70000.0, dP=93.0, Q_in=230.71)
C1_X = (0.429, 0.43, 0.141)
C1_NAPP = 24.62


@pytest.fixture(scope="module")
def plant():
    return PlantParams.lm2s()


@pytest.fixture(scope="module")
def initial(mixture, plant):
    return initialize_consistent(mixture, plant, C1_CONTROLS, C1_X, C1_NAPP)


def test_pressure_profile_case1():
    P = pressure_profile(70000.0, 93.0, 12)
    assert P[0] == 70093.0
    assert P[-1] == 70000.0
    # exact rational profile, e.g. stage 6: 70000 + 558/11 Pa
    for j in range(1, 13):
        exact = Fraction(70000) + Fraction((12 - j) * 93, 11)
        assert abs(P[j - 1] - float(exact)) <= math.ulp(float(exact))
    assert P[5] == pytest.approx(70050.727272727272, rel=1e-15)
    assert np.all(np.diff(P) < 0)


def test_pressure_profile_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        pressure_profile(70000.0, 93.0, 1)
    with pytest.raises(InvalidInputError):
        pressure_profile(70000.0, -1.0, 12)


def test_material_energy_stage1(plant):
    assert internal_energy_material(plant, 1, 373.15) == pytest.approx(116519.75, rel=1e-12)
    assert internal_energy_material(plant, 5, plant.t_ref) == 0.0
    with pytest.raises(InvalidInputError):
        internal_energy_material(plant, 13, 350.0)


def test_correction_factor_scales_material_energy(plant):
    p = plant.with_correction(2.0, 2.5)
    assert internal_energy_material(p, 1, 373.15) == pytest.approx(2 * 116519.75, rel=1e-12)
    assert p.c[1:] == (2.5,) * 11


def test_apparatus_holdup(initial, plant):
    assert apparatus_holdup(initial, plant.n_buffer) == pytest.approx(C1_NAPP, rel=1e-14)
    s = dataclasses.replace(initial, n=np.ones(12))
    assert apparatus_holdup(s, 0.5) == 12.5


def test_initial_state_is_consistent(mixture, plant, initial):
    _, rates = consistent_derivative(mixture, plant, C1_CONTROLS, initial)
    r = assemble_residuals(mixture, plant, C1_CONTROLS, initial, rates)
    assert np.max(np.abs(r)) <= 1e-9
    assert initial.P[0] == 70093.0
    assert np.all(initial.V > 0) and np.all(initial.L > 0)
    assert initial.D == pytest.approx(0.30 * initial.B, rel=1e-12)


def test_row_labels_match_residual_length(mixture, plant, initial):
    labels = residual_row_labels(mixture, plant)
    assert len(labels) == 12 * 6 + 5
    assert labels[0] == "mass[1,butan-1-ol]" and labels[-1] == "distillate_split"


def _random_state(initial, rng):
    S, C = initial.S, initial.C
    x = rng.dirichlet(np.ones(C), size=S)
    xB = rng.dirichlet(np.ones(C))
    return dataclasses.replace(
        initial.copy(), x=x, x_B=xB, T=initial.T + rng.uniform(-2, 2, S),
        V=rng.uniform(0.001, 0.01, S), L=rng.uniform(0.001, 0.01, S - 1),
        B=rng.uniform(0.001, 0.01), D=rng.uniform(0.0, 0.001),
    )


def _random_rates(S, C, rng):
    return StateDerivative(rng.normal() * 1e-3, rng.normal(size=(S, C)) * 1e-4,
                           rng.normal(size=S) * 1e-2, rng.normal(size=C) * 1e-4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_component_balances_telescope(mixture, plant, initial, seed):
    # summing all stage and buffer component rows leaves accumulation plus outflows
    rng = np.random.default_rng(seed)
    s = _random_state(initial, rng)
    W = tuple(rng.uniform(0, 1e-4, 12))
    u = dataclasses.replace(C1_CONTROLS, withdrawal=W)
    rates = _random_rates(12, 3, rng)
    r = assemble_residuals(mixture, plant, u, s, rates)
    mass = r[: 12 * 6].reshape(12, 6)[:, :3].sum(axis=0) + r[72:75]
    n_dot = np.zeros(12)
    n_dot[0] = rates.n1
    acc = (n_dot[:, None] * s.x + s.n[:, None] * rates.x).sum(axis=0) + plant.n_buffer * rates.x_B
    expected = acc + s.D * s.x_B + (np.asarray(W)[:, None] * s.x).sum(axis=0)
    np.testing.assert_allclose(mass, expected, rtol=1e-9, atol=1e-15)


def test_vapor_flow_only_couples_neighbours(mixture, plant, initial):
    _, rates = consistent_derivative(mixture, plant, C1_CONTROLS, initial)
    r0 = assemble_residuals(mixture, plant, C1_CONTROLS, initial, rates)
    for k in range(12):
        V = initial.V.copy()
        V[k] *= 1.01
        r = assemble_residuals(mixture, plant, C1_CONTROLS, dataclasses.replace(initial, V=V), rates)
        changed = set(np.flatnonzero(r != r0))
        allowed = set(range(6 * k, 6 * k + 4)) | set(range(6 * (k + 1), 6 * (k + 1) + 4))
        if k == 11:
            allowed = set(range(66, 70)) | {72, 73, 74, 75}
        assert changed and changed <= allowed


def test_negative_holdup_rejected(mixture, plant, initial):
    n = initial.n.copy()
    n[3] = -0.01
    rates = StateDerivative(0.0, np.zeros((12, 3)), np.zeros(12), np.zeros(3))
    with pytest.raises(StateViolationError) as info:
        assemble_residuals(mixture, plant, C1_CONTROLS, dataclasses.replace(initial, n=n), rates)
    assert info.value.stage == 4


def test_holdup_exhausted_by_column(mixture, plant):
    # stages and buffer hold 11 * 0.03 + 0.5 = 0.83 mol
    with pytest.raises(ConfigurationError):
        initialize_consistent(mixture, plant, C1_CONTROLS, C1_X, 0.83)


def test_total_reflux_has_no_distillate(mixture, plant):
    u = dataclasses.replace(C1_CONTROLS, epsilon=0.0)
    s = initialize_consistent(mixture, plant, u, C1_X, C1_NAPP)
    assert s.D == 0.0
    assert s.reflux == pytest.approx(s.B)


def test_control_validation():
    with pytest.raises(InvalidInputError):
        ControlInputs(epsilon=1.3, P_head=70000.0, dP=93.0, Q_in=100.0)
    with pytest.raises(InvalidInputError):
        ControlInputs(epsilon=0.3, P_head=0.0, dP=93.0, Q_in=100.0)
    with pytest.raises(ConfigurationError):
        PlantParams.lm2s(c=(1.0,) * 11 + (0.0,))


def test_state_dimension_check(mixture, plant, initial):
    rates = StateDerivative(0.0, np.zeros((12, 3)), np.zeros(12), np.zeros(3))
    with pytest.raises(InvalidInputError):
        assemble_residuals(mixture, plant, C1_CONTROLS, dataclasses.replace(initial, L=np.zeros(12)), rates)
    assert isinstance(initial, ColumnState)
