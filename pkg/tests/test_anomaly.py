import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from batchdist.anomaly import (
    NOT_MAPPABLE,
    Annotation,
    ControlTrajectory,
    Perturbation,
    Target,
    active_anomalies,
    build_trajectory,
    evaluate_control,
    map_target,
    perturbation_windows,
)
from batchdist.column import ControlInputs
from batchdist.errors import ConfigurationError, InvalidInputError

BASE = ControlInputs(epsilon=0.25, P_head=70000.0, dP=72.0, Q_in=80.0,
                     dT_cond_override=20.0, withdrawal=(0.0,) * 12)


def _signal(u, target, stage=None):
    return {
        Target.EFFLUX_RATIO: u.epsilon, Target.HEAT_DUTY: u.Q_in, Target.HEAD_PRESSURE: u.P_head,
        Target.CONDENSER_OFFSET: u.dT_cond_override,
        Target.WITHDRAWAL: u.withdrawal[(stage or 1) - 1] if u.withdrawal else 0.0,
    }[target]


# target, perturbation, hand-computed (t, value) at knots and segment midpoints
KNOT_TABLES = [
    (Perturbation(Target.EFFLUX_RATIO, 3600.0, 5400.0, 0.75, 60.0, 60.0, "e"),
     [(0.0, 0.25), (1800.0, 0.25), (3600.0, 0.25), (3630.0, 0.5), (3660.0, 0.75), (4530.0, 0.75),
      (5400.0, 0.75), (5430.0, 0.5), (5460.0, 0.25), (6000.0, 0.25)]),
    (Perturbation(Target.HEAT_DUTY, 3600.0, 7200.0, 120.0, 30.0, 30.0, "q"),
     [(0.0, 80.0), (3600.0, 80.0), (3615.0, 100.0), (3630.0, 120.0), (5415.0, 120.0),
      (7200.0, 120.0), (7215.0, 100.0), (7230.0, 80.0), (9000.0, 80.0)]),
    (Perturbation(Target.HEAD_PRESSURE, 3600.0, 5400.0, 60000.0, anomaly_id="p"),
     [(0.0, 70000.0), (3600.0, 70000.0), (3750.0, 65000.0), (3900.0, 60000.0), (4650.0, 60000.0),
      (5400.0, 60000.0), (5550.0, 65000.0), (5700.0, 70000.0), (8000.0, 70000.0)]),
    (Perturbation(Target.CONDENSER_OFFSET, 1000.0, 2000.0, 10.0, 40.0, 40.0, "c"),
     [(0.0, 20.0), (1000.0, 20.0), (1020.0, 15.0), (1040.0, 10.0), (1520.0, 10.0),
      (2000.0, 10.0), (2020.0, 15.0), (2040.0, 20.0), (3000.0, 20.0)]),
    (Perturbation(Target.WITHDRAWAL, 500.0, 800.0, 0.25e-3, 20.0, 20.0, "w", stage=3),
     [(0.0, 0.0), (500.0, 0.0), (510.0, 0.125e-3), (520.0, 0.25e-3), (660.0, 0.25e-3),
      (800.0, 0.25e-3), (810.0, 0.125e-3), (820.0, 0.0), (900.0, 0.0)]),
]


@pytest.mark.parametrize("pert,table", KNOT_TABLES, ids=[p.target.value for p, _ in KNOT_TABLES])
def test_knot_table(pert, table):
    traj = ControlTrajectory(BASE, (pert,))
    for t, expected in table:
        assert _signal(evaluate_control(traj, t), pert.target, pert.stage) == expected, t


@pytest.mark.parametrize("pert,table", KNOT_TABLES, ids=[p.target.value for p, _ in KNOT_TABLES])
def test_other_signals_stay_at_baseline(pert, table):
    traj = ControlTrajectory(BASE, (pert,))
    for t, _ in table:
        u = evaluate_control(traj, t)
        for target in Target:
            if target is not pert.target:
                assert _signal(u, target, pert.stage) == _signal(BASE, target, pert.stage)
        assert u.dP == BASE.dP


@pytest.mark.parametrize("pert,table", KNOT_TABLES, ids=[p.target.value for p, _ in KNOT_TABLES])
def test_labels_cover_deviation_support(pert, table):
    traj = ControlTrajectory(BASE, (pert,))
    windows = perturbation_windows(traj)
    for t in np.linspace(0.0, table[-1][0], 4001):
        deviates = _signal(evaluate_control(traj, t), pert.target, pert.stage) != \
            _signal(BASE, pert.target, pert.stage)
        labelled = bool(active_anomalies(windows, t))
        # the support is the open window; its closure is labelled
        assert labelled == (pert.t_start <= t <= pert.label_end)
        if deviates:
            assert labelled
        elif labelled:
            assert t in (pert.t_start, pert.label_end)


@given(st.floats(3000.0, 6000.0), st.floats(1e-9, 1e-3))
def test_evaluation_is_continuous(t, h):
    pert = KNOT_TABLES[0][0]
    traj = ControlTrajectory(BASE, (pert,))
    a = evaluate_control(traj, t).epsilon
    t2 = t + h
    b = evaluate_control(traj, t2).epsilon
    # slope is at most 0.5 / 60 per second
    assert abs(a - b) <= 0.5 / 60.0 * (t2 - t) * (1 + 1e-6) + 1e-15


def test_overlapping_perturbations_rejected():
    a = Perturbation(Target.HEAT_DUTY, 100.0, 200.0, 90.0, 10.0, 30.0, "a")
    b = Perturbation(Target.HEAT_DUTY, 220.0, 300.0, 70.0, 10.0, 10.0, "b")
    with pytest.raises(ConfigurationError):
        ControlTrajectory(BASE, (a, b))
    # different signals may overlap
    c = Perturbation(Target.EFFLUX_RATIO, 150.0, 250.0, 0.5, anomaly_id="c")
    ControlTrajectory(BASE, (a, c))


def test_perturbation_validation():
    with pytest.raises(InvalidInputError):
        Perturbation(Target.EFFLUX_RATIO, 100.0, 50.0, 0.5)
    with pytest.raises(InvalidInputError):
        Perturbation(Target.EFFLUX_RATIO, 0.0, 50.0, 1.5)
    with pytest.raises(InvalidInputError):
        Perturbation(Target.HEAT_DUTY, 0.0, 50.0, 10.0, ramp_up=60.0)
    with pytest.raises(ConfigurationError):
        ControlTrajectory(dataclasses.replace(BASE, dT_cond_override=None),
                          (Perturbation(Target.CONDENSER_OFFSET, 0.0, 50.0, 10.0),))


def test_negative_time_rejected():
    with pytest.raises(InvalidInputError):
        evaluate_control(ControlTrajectory(BASE), -1.0)


def test_cause_mapping():
    assert map_target(Annotation("a", "efflux valve stuck", 0.0, 1.0)) is Target.EFFLUX_RATIO
    assert map_target(Annotation("a", "heater failure", 0.0, 1.0)) is Target.HEAT_DUTY
    assert map_target(Annotation("a", "vacuum pump pressure rise", 0.0, 1.0)) is Target.HEAD_PRESSURE
    assert map_target(Annotation("a", "foaming agent added", 0.0, 1.0)) is None
    assert map_target(Annotation("a", "anything", 0.0, 1.0, target="withdrawal")) is Target.WITHDRAWAL


def test_build_trajectory_rejects_unmappable():
    anns = [
        Annotation("ok", "heat duty step", 100.0, 200.0, value=90.0),
        Annotation("foam", "foaming agent added", 300.0, 400.0),
        Annotation("skip", "efflux change", 500.0, 600.0, value=0.5, simulated=False),
    ]
    traj = build_trajectory(BASE, anns)
    assert [p.anomaly_id for p in traj.perturbations] == ["ok"]
    reasons = dict(traj.rejected)
    assert reasons["foam"].startswith(NOT_MAPPABLE)
    assert "skip" in reasons
