"""Implicit-Euler integration of the column DAE.

Each step solves, simultaneously for all stages, the backward-Euler
discretisation of the conservative quantities (component holdups, stage
energy contents, buffer holdups) together with the algebraic rows. Because
the discretised balances telescope exactly, the apparatus inventory is
conserved to Newton tolerance regardless of step size.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import kernels
from .anomaly import ControlTrajectory, active_anomalies, evaluate_control, perturbation_windows
from .column import (
    ColumnState,
    ControlInputs,
    PlantParams,
    initialize_consistent,
    pressure_profile,
    stage_properties,
)
from .errors import (
    ConvergenceError,
    FactorizationError,
    InvalidInputError,
    StateViolationError,
    StepSizeError,
)
from .thermo import MixtureModel

# reference latent heat used to turn the duty scale into a flow scale, J/mol
_LATENT_SCALE = 4.0e4
# converged flows below -_FLOW_TOL * flow_scale are rejected
_FLOW_TOL = 1e-8
_COMPOSITION_TOL = 1e-9
# multiple of eps*|accumulated quantity|/dt below which a step residual is noise
_ROUNDOFF_FACTOR = 16.0


class StopReason(str, enum.Enum):
    HORIZON_REACHED = "horizon_reached"
    REBOILER_DEPLETED = "reboiler_depleted"
    SOLVER_FAILURE = "solver_failure"


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control and output settings (times in s, holdups in mol).

    The step grows by ``growth`` after ``grow_after`` consecutive accepted
    steps and is halved on every rejected one.
    """

    dt_init: float = 5.0
    dt_min: float = 1e-3
    dt_max: float = 60.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 8
    sample_interval: float = 60.0
    depletion_threshold: float = 0.1
    growth: float = 1.3
    grow_after: int = 5

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise InvalidInputError("need 0 < dt_min <= dt_init <= dt_max")
        if self.newton_tol <= 0 or self.newton_max_iter < 1:
            raise InvalidInputError("newton_tol must be > 0 and newton_max_iter >= 1")
        if self.sample_interval <= 0:
            raise InvalidInputError("sample_interval must be > 0")
        if self.depletion_threshold < 0:
            raise InvalidInputError("depletion_threshold must be >= 0")


@dataclass
class TimeSeriesRecord:
    """One sampled output row (0-based stage arrays)."""

    t: float
    n: np.ndarray
    T: np.ndarray
    L: np.ndarray
    V: np.ndarray
    h_L: np.ndarray
    h_V: np.ndarray
    P: np.ndarray
    W: np.ndarray
    x: np.ndarray
    y: np.ndarray
    Q_in: float
    epsilon: float
    D: float
    reflux: float
    B: float
    T_cond: float
    n_app: float
    x_B: np.ndarray
    anomaly_flag: bool = False
    anomaly_ids: tuple = ()

    @classmethod
    def from_state(cls, t, state: ColumnState, u: ControlInputs, n_buffer, anomaly_ids=()):
        return cls(
            t=float(t), n=state.n.copy(), T=state.T.copy(), L=state.L.copy(), V=state.V.copy(),
            h_L=state.h_L.copy(), h_V=state.h_V.copy(), P=state.P.copy(),
            W=u.withdrawal_vector(state.S).astype(float).copy(),
            x=state.x.copy(), y=state.y.copy(), Q_in=float(u.Q_in), epsilon=float(u.epsilon),
            D=float(state.D), reflux=float(state.reflux), B=float(state.B),
            T_cond=float(state.T_cond), n_app=float(state.n.sum() + n_buffer),
            x_B=state.x_B.copy(), anomaly_flag=bool(anomaly_ids), anomaly_ids=tuple(anomaly_ids),
        )


@dataclass
class SimulationResult:
    records: list
    stop_reason: StopReason
    diagnostics: dict = field(default_factory=dict)
    message: str = ""
    final_state: Optional[ColumnState] = None


# --------------------------------------------------------------------------
# Newton


def _fd_jacobian(fun, z, f0=None):
    f0 = fun(z) if f0 is None else f0
    J = np.empty((f0.size, z.size))
    zp = z.copy()
    for i in range(z.size):
        h = 1.4901161193847656e-08 * max(abs(z[i]), 1.0)
        zp[i] = z[i] + h
        h = zp[i] - z[i]
        J[:, i] = (fun(zp) - f0) / h
        zp[i] = z[i]
    return J


def _factor(J):
    if not np.all(np.isfinite(J)):
        raise FactorizationError("non-finite Jacobian entries")
    with np.errstate(all="ignore"):
        lu, piv = scipy.linalg.lu_factor(J, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-14 * max(diag.max(), 1e-300):
        raise FactorizationError("singular Newton matrix")
    return lu, piv


def newton_solve(residual_fn: Callable, guess, tol=1e-10, max_iter=50, jacobian=None):
    """Damped Newton iteration on ``residual_fn(z) = 0``.

    Stops when the residual max-norm is at most ``tol``. The Jacobian comes
    from ``jacobian(z)`` or forward differences. Steps are halved (down to
    1/1024) until the residual norm decreases.
    """
    z = np.array(guess, dtype=float, copy=True)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)

    def fun(v):
        return np.atleast_1d(np.asarray(residual_fn(v[0] if scalar else v), dtype=float))

    f = fun(z)
    norm = np.max(np.abs(f))
    for _ in range(max_iter):
        if norm <= tol:
            return z[0] if scalar else z
        J = np.atleast_2d(jacobian(z[0] if scalar else z)) if jacobian else _fd_jacobian(fun, z, f)
        try:
            dz = scipy.linalg.lu_solve(_factor(J), -f, check_finite=False)
        except FactorizationError:
            raise
        lam = 1.0
        while True:
            z_try = z + lam * dz
            f_try = fun(z_try)
            n_try = np.max(np.abs(f_try))
            if (np.isfinite(n_try) and n_try < norm) or lam < 1e-3:
                break
            lam *= 0.5
        z, f, norm = z_try, f_try, n_try
    if norm <= tol:
        return z[0] if scalar else z
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (|r| = {norm:.3e})", norm)


# --------------------------------------------------------------------------
# column step


def n_unknowns(S, C):
    return S * (C + 3) + C + 2


def pack_state(state: ColumnState) -> np.ndarray:
    return np.concatenate((
        state.x.ravel(), state.T, [state.n[0]], state.V, state.L, state.x_B, [state.B, state.D]
    ))


class ColumnModel:
    """Everything a step needs that does not change along a run."""

    def __init__(self, mixture: MixtureModel, plant: PlantParams, trajectory: ControlTrajectory,
                 config: IntegratorConfig = IntegratorConfig()):
        self.mixture = mixture
        self.plant = plant
        self.trajectory = trajectory
        self.config = config
        self.S, self.C = plant.S, mixture.n_components
        self.windows = perturbation_windows(trajectory)
        base = trajectory.baseline
        q_scale = max(abs(base.Q_in), 10.0)
        self.flow_scale = q_scale / _LATENT_SCALE
        N = n_unknowns(self.S, self.C)
        rows = np.ones((self.S, self.C + 3))
        rows[:, : self.C] = 1.0 / self.flow_scale
        rows[:, self.C] = 1.0 / q_scale
        tail = np.full(self.C + 2, 1.0 / self.flow_scale)
        self.row_scale = np.concatenate((rows.ravel(), tail))
        typ = np.concatenate((
            np.full(self.S * self.C, 1e-2), np.ones(self.S), [1.0],
            np.full(2 * self.S - 1, self.flow_scale), np.full(self.C, 1e-2),
            [self.flow_scale, self.flow_scale],
        ))
        assert typ.size == N
        self.z_typ = typ
        self.cmat = plant.heat_capacity
        self.q_loss = np.asarray(plant.q_loss, dtype=float)
        self._lu = None
        self._lu_dt = None
        self.stats = dict(steps=0, rejected=0, newton_iterations=0, jacobians=0)

    def controls(self, t) -> ControlInputs:
        return evaluate_control(self.trajectory, t)

    def conserved(self, state: ColumnState):
        """Component holdups (S, C), stage energies (S,), buffer holdups (C,)."""
        E = state.n * state.h_L + self.cmat * (state.T - self.plant.t_ref)
        return state.n[:, None] * state.x, E, self.plant.n_buffer * state.x_B

    def _args(self, u: ControlInputs, dt, old):
        p, a = self.plant, self.mixture.arrays
        par = np.empty(kernels.N_PAR)
        par[kernels.T_REF] = self.mixture.reference_temperature
        par[kernels.N_HOLD] = p.n_hold
        par[kernels.N_BUFFER] = p.n_buffer
        par[kernels.K_LOSS] = p.k_loss
        par[kernels.T_AMB] = p.t_amb
        par[kernels.EPS] = u.epsilon
        par[kernels.Q_IN] = u.Q_in
        par[kernels.DT_COND] = u.condenser_offset(p)
        par[kernels.DT] = dt
        P = pressure_profile(u.P_head, u.dP, self.S)
        oldM, oldE, oldMB = old
        return (self.S, self.C, a.antoine, a.cp, a.watson, a.tau_a, a.tau_b, a.alpha,
                self.cmat, self.q_loss, P, u.withdrawal_vector(self.S).astype(float), par,
                np.ascontiguousarray(oldM), oldE, oldMB, self.row_scale)

    def state_from_vector(self, z, u: ControlInputs) -> ColumnState:
        x, T, n1, V, L, xB, B, D = kernels.unpack(z, self.S, self.C)
        P = pressure_profile(u.P_head, u.dP, self.S)
        _, y, hL, hV = stage_properties(self.mixture, x, T, P)
        n = np.full(self.S, self.plant.n_hold)
        n[0] = n1
        return ColumnState(
            n=n, x=x.copy(), y=y, T=T.copy(), L=L.copy(), V=V.copy(), x_B=xB.copy(),
            B=float(B), D=float(D), reflux=float(B - D),
            T_cond=float(T[-1] - u.condenser_offset(self.plant)), h_L=hL, h_V=hV, P=P,
        )

    def check_state(self, state: ColumnState):
        if state.n[0] <= 0:
            raise StateViolationError(f"reboiler holdup {state.n[0]:.3e} mol is not positive", stage=1)
        lim = -_FLOW_TOL * self.flow_scale
        for name, arr, offset in (("V", state.V, 1), ("L", state.L, 1)):
            if np.any(arr < lim):
                k = int(np.argmin(arr))
                raise StateViolationError(f"negative flow {name}^{k + offset} = {arr[k]:.3e} mol/s",
                                          stage=k + offset)
        if state.B < lim or state.D < lim:
            raise StateViolationError("negative buffer outflow", stage=0)
        if np.any(state.x < -_COMPOSITION_TOL) or np.any(state.x_B < -_COMPOSITION_TOL):
            k = int(np.argmin(state.x.min(axis=1)))
            raise StateViolationError("negative mole fraction", stage=k + 1)

    def step_tolerance(self, old, dt):
        """Newton tolerance for a step: ``newton_tol`` or the roundoff floor.

        The accumulation terms ``(q - q_old) / dt`` cannot be resolved below
        about ``eps * |q| / dt``; for tiny steps this exceeds ``newton_tol``.
        """
        oldM, oldE, oldMB = old
        S, C = self.S, self.C
        rs = self.row_scale
        stage_rs = rs[: S * (C + 3)].reshape(S, C + 3)
        floor = max(
            float(np.max(np.abs(oldM) * stage_rs[:, :C])),
            float(np.max(np.abs(oldE) * stage_rs[:, C])),
            float(np.max(np.abs(oldMB) * rs[S * (C + 3): S * (C + 3) + C])),
        )
        return max(self.config.newton_tol, _ROUNDOFF_FACTOR * np.finfo(float).eps * floor / dt)

    def _solve(self, z0, args, dt, tol=None):
        cfg = self.config
        tol = cfg.newton_tol if tol is None else tol

        def fun(z):
            return kernels.step_residual(z, *args)

        z = z0.copy()
        f = fun(z)
        norm = np.max(np.abs(f))
        fresh = self._lu is None or self._lu_dt != dt
        for attempt in range(2):
            if fresh:
                J = kernels.step_jacobian(z, *args, self.z_typ)
                self.stats["jacobians"] += 1
                self._lu = _factor(J)
                self._lu_dt = dt
            prev = math.inf
            for _ in range(cfg.newton_max_iter):
                if norm <= tol:
                    return z
                dz = scipy.linalg.lu_solve(self._lu, -f, check_finite=False)
                lam = 1.0
                while True:
                    z_try = z + lam * dz
                    f_try = fun(z_try)
                    n_try = np.max(np.abs(f_try))
                    if (np.isfinite(n_try) and n_try < norm) or lam < 0.05 or not fresh:
                        break
                    lam *= 0.5
                self.stats["newton_iterations"] += 1
                if not np.isfinite(n_try):
                    break
                z, f = z_try, f_try
                prev, norm = norm, n_try
                if not fresh and norm > 0.5 * prev:
                    break
            if norm <= tol:
                return z
            if fresh:
                break
            fresh = True
            z, f = z0.copy(), fun(z0)
            norm = np.max(np.abs(f))
        self._lu = None
        raise ConvergenceError(f"step Newton failed (|r| = {norm:.3e}, dt = {dt:g} s)", norm)


def step(model: ColumnModel, state: ColumnState, t, dt) -> ColumnState:
    """Advance ``state`` from ``t`` to ``t + dt`` with one implicit-Euler step.

    Controls are evaluated at ``t + dt``. Raises :class:`StepSizeError` when
    ``dt`` is below ``dt_min``, :class:`ConvergenceError` or
    :class:`StateViolationError` when the step cannot be taken.
    """
    if dt < model.config.dt_min:
        raise StepSizeError(f"requested step {dt:g} s below dt_min = {model.config.dt_min:g} s")
    return _advance(model, state, t, dt)


def _advance(model: ColumnModel, state: ColumnState, t, dt) -> ColumnState:
    u = model.controls(t + dt)
    old = model.conserved(state)
    args = model._args(u, dt, old)
    z = model._solve(pack_state(state), args, dt, model.step_tolerance(old, dt))
    new = model.state_from_vector(z, u)
    model.check_state(new)
    return new


# --------------------------------------------------------------------------
# driver


def integrate(model: ColumnModel, initial: ColumnState, horizon) -> SimulationResult:
    """Integrate from t = 0 to ``horizon`` or reboiler depletion."""
    cfg = model.config
    if horizon < 0:
        raise InvalidInputError("horizon must be >= 0")
    knots = [k for k in model.trajectory.knots() if 0 < k < horizon]
    plant = model.plant

    def record(t, s):
        u = model.controls(t)
        return TimeSeriesRecord.from_state(t, s, u, plant.n_buffer,
                                           active_anomalies(model.windows, t))

    state = initial
    t = 0.0
    records = [record(0.0, state)]
    sample_idx = 1
    dt = cfg.dt_init
    successes = 0
    stop, message = StopReason.HORIZON_REACHED, ""
    eps_t = 1e-9 * max(horizon, 1.0)

    while t < horizon - eps_t:
        t_sample = min(sample_idx * cfg.sample_interval, horizon)
        boundary = t_sample
        for k in knots:
            if k > t + eps_t:
                boundary = min(boundary, k)
                break
        h = min(dt, boundary - t)
        W1 = model.controls(t).withdrawal_vector(plant.S)[0]
        rate = state.L[0] - state.V[0] - W1
        landing = False
        if rate < 0 and state.n[0] + h * rate < cfg.depletion_threshold:
            h_land = (state.n[0] - cfg.depletion_threshold) / -rate
            if h_land <= h:
                h = max(h_land, cfg.dt_min)
                landing = True
        hits = abs(t + h - boundary) <= eps_t
        try:
            # boundaries closer than dt_min are still honoured
            new = _advance(model, state, t, h)
        except (ConvergenceError, StateViolationError, FactorizationError) as exc:
            model.stats["rejected"] += 1
            successes = 0
            dt = 0.5 * h
            if dt < cfg.dt_min:
                stop = StopReason.SOLVER_FAILURE
                message = f"t = {t:.6g} s: {exc}"
                break
            continue
        model.stats["steps"] += 1
        t = boundary if hits else t + h
        state = new
        successes += 1
        if successes >= cfg.grow_after:
            dt = min(dt * cfg.growth, cfg.dt_max)
            successes = 0
        depleted = landing or state.n[0] <= cfg.depletion_threshold
        if hits and boundary == t_sample:
            records.append(record(t, state))
            sample_idx += 1
        elif depleted:
            records.append(record(t, state))
        if depleted:
            stop = StopReason.REBOILER_DEPLETED
            break

    diagnostics = dict(model.stats)
    diagnostics["t_final"] = t
    return SimulationResult(records, stop, diagnostics, message, state)


def simulate(scenario, initial_state: Optional[ColumnState] = None) -> SimulationResult:
    """Run one scenario from its consistent initial state.

    ``scenario`` needs ``mixture``, ``plant``, ``controls`` (a
    :class:`ControlTrajectory`), ``x1_0``, ``n_app_0``, ``horizon`` and
    ``integrator``. Failures inside the run are reported through
    ``stop_reason`` with all records computed so far.
    """
    model = ColumnModel(scenario.mixture, scenario.plant, scenario.controls, scenario.integrator)
    if initial_state is None:
        u0 = evaluate_control(scenario.controls, 0.0)
        initial_state = initialize_consistent(
            scenario.mixture, scenario.plant, u0, scenario.x1_0, scenario.n_app_0)
    return integrate(model, initial_state, scenario.horizon)
