"""Fit the equipment correction factors to one reference experiment.

The free parameters are a shared factor for stages 2..S (``"c_shared"``)
and optionally the reboiler factor (``"c1"``, otherwise kept at its current
value). The objective is the sum of squared deviations of the reboiler and
head temperatures, with the simulation interpolated onto the reference
timestamps. Past a simulation's final record its last values are held, so
a run that stops early is not rewarded with a shorter comparison window.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.optimize

from ..errors import BatchDistError, CalibrationError
from ..integrator import StopReason, simulate
from .config import Scenario
from .timeseries import Series, records_to_series

FREE_PARAMS = ("c_shared", "c1")
FAILURE_PENALTY = 1e12
INITIAL_STEP = 0.25


@dataclass
class CalibrationReport:
    """Outcome of :func:`calibrate_correction_factors`.

    ``trace`` lists every objective evaluation as ``(values, objective)``;
    ``iterations`` holds the best objective after each Nelder-Mead
    iteration and is therefore non-increasing.
    """

    plant: object
    values: dict
    objective: float
    rmse: float
    rmse_signals: dict
    trace: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    n_evaluations: int = 0
    success: bool = True
    message: str = ""


def _reference_series(reference, names) -> Series:
    if isinstance(reference, Series):
        return reference
    return records_to_series(list(reference), names)


def _plant_for(plant, free, x):
    c = list(plant.c)
    for name, v in zip(free, x):
        if name == "c1":
            c[0] = float(v)
        else:
            c[1:] = [float(v)] * (plant.S - 1)
    return dataclasses.replace(plant, c=tuple(c))


def calibrate_correction_factors(reference, scenario: Scenario, free_params: Sequence[str] = ("c_shared",),
                                 initial=None, max_iter=40, xatol=1e-3, fatol=1e-8) -> CalibrationReport:
    """Nelder-Mead fit of the correction factors.

    Parameters
    ----------
    reference : Series or list of TimeSeriesRecord
        Must provide ``T_1`` and ``T_S`` (K) on at least two timestamps.
    scenario : Scenario
        Operating point of the reference experiment; its plant supplies the
        fixed parameters and the default initial guess.
    free_params : subset of ``("c_shared", "c1")``
    initial : dict, optional
        Starting values by parameter name.

    Returns
    -------
    CalibrationReport
    """
    free = tuple(dict.fromkeys(free_params))
    unknown = set(free) - set(FREE_PARAMS)
    if unknown:
        raise CalibrationError(f"unknown free parameters {sorted(unknown)}")
    plant = scenario.plant
    S = plant.S
    signals = ("T_1", f"T_{S}")
    ref = _reference_series(reference, scenario.mixture.names)
    for s in signals:
        if s not in ref.signals:
            raise CalibrationError(f"reference lacks the temperature signal {s!r}")
    keep = np.all([np.isfinite(ref.signals[s]) for s in signals], axis=0) & (ref.t >= 0)
    t_ref = ref.t[keep]
    y_ref = {s: ref.signals[s][keep] for s in signals}
    if t_ref.size < 2 or t_ref[-1] - t_ref[0] < scenario.integrator.sample_interval:
        raise CalibrationError("reference shorter than one sample interval")
    horizon = float(t_ref[-1])

    def residuals(p):
        result = simulate(dataclasses.replace(scenario, plant=p, horizon=horizon))
        if result.stop_reason is StopReason.SOLVER_FAILURE or len(result.records) < 2:
            return None
        t = np.array([r.t for r in result.records])
        out = {}
        for k, s in enumerate(signals):
            idx = 0 if k == 0 else S - 1
            sim = np.interp(t_ref, t, [r.T[idx] for r in result.records])
            out[s] = sim - y_ref[s]
        return out

    trace = []
    cache = {}

    def objective(x):
        key = tuple(float(v) for v in x)
        if key in cache:
            return cache[key]
        if any(v <= 0 for v in key):
            f = FAILURE_PENALTY
        else:
            try:
                res = residuals(_plant_for(plant, free, key))
            except BatchDistError:
                res = None
            f = FAILURE_PENALTY if res is None else float(sum(np.sum(r ** 2) for r in res.values()))
        cache[key] = f
        trace.append((dict(zip(free, key)), f))
        return f

    def finish(x, iterations, success, message):
        p = _plant_for(plant, free, x)
        res = residuals(p)
        if res is None:
            raise CalibrationError("simulation failed at the reported parameters")
        sse = float(sum(np.sum(r ** 2) for r in res.values()))
        n = sum(r.size for r in res.values())
        return CalibrationReport(
            plant=p, values=dict(zip(free, map(float, x))), objective=sse,
            rmse=math.sqrt(sse / n), rmse_signals={s: float(np.sqrt(np.mean(r ** 2))) for s, r in res.items()},
            trace=trace, iterations=iterations, n_evaluations=len(trace), success=success, message=message,
        )

    if not free:
        return finish((), [], True, "no free parameters")

    current = {"c1": plant.c[0], "c_shared": plant.c[1]}
    current.update(initial or {})
    x0 = np.array([float(current[n]) for n in free])
    simplex = np.vstack([x0] + [x0 + INITIAL_STEP * max(abs(x0[k]), 0.1) * np.eye(len(free))[k]
                                for k in range(len(free))])
    f_init = [objective(v) for v in simplex]
    if not all(math.isfinite(f) for f in f_init):
        raise CalibrationError("objective is not finite on the initial simplex")
    if all(f >= FAILURE_PENALTY for f in f_init):
        raise CalibrationError("every simulation on the initial simplex failed")

    iterations = []

    def callback(xk):
        iterations.append(objective(xk))

    opt = scipy.optimize.minimize(
        objective, x0, method="Nelder-Mead", callback=callback,
        options=dict(initial_simplex=simplex, maxiter=max_iter, xatol=xatol, fatol=fatol),
    )
    return finish(opt.x, iterations, bool(opt.success), str(opt.message))
