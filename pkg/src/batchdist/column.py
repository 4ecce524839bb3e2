"""Equilibrium-stage batch column with buffer vessel.

Stage 1 is the reboiler, stage S the column head. Vapor leaving the head is
totally condensed into a buffer vessel of constant holdup; the buffer
outflow ``B`` splits into distillate ``D = eps * B`` and reflux
``(1 - eps) * B``, which re-enters stage S as liquid at the condenser
temperature ``T^S - dT``.

Holdup closure: stages 2..S carry a fixed liquid holdup ``n_hold``; only the
reboiler holdup is differential. Flows, the buffer outflow and the
distillate are algebraic unknowns.

Arrays use 0-based stage indices internally; public functions taking a
stage index ``j`` expect the 1-based numbering of the model (1..S).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError, InvalidInputError, StateViolationError
from .thermo import MixtureModel, as_composition, bubble_point

# stage-2..S values for the laboratory plant
LM2S_STAGES = 12
LM2S_M_STEEL = (0.25,) + (0.058,) * (LM2S_STAGES - 1)
LM2S_M_GLASS = (1.25,) + (0.2,) * (LM2S_STAGES - 1)
LM2S_C = (1.0,) + (2.5,) * (LM2S_STAGES - 1)
LM2S_Q_LOSS = (0.0,) * (LM2S_STAGES - 1) + (2.0,)


def _vec(values, S, name):
    arr = tuple(float(v) for v in values)
    if len(arr) != S:
        raise ConfigurationError(f"{name} must have {S} entries, got {len(arr)}")
    return arr


@dataclass(frozen=True)
class PlantParams:
    """Plant-specific constants, fixed across experiments.

    Vectors are indexed by stage (entry 0 is the reboiler). ``q_loss[0]`` is
    ignored: the reboiler is driven by the net heat duty, optionally reduced
    by ``k_loss * (T^1 - t_amb)``.
    """

    S: int
    m_steel: tuple
    m_glass: tuple
    c: tuple
    q_loss: tuple
    cp_steel: float = 510.79
    cp_glass: float = 830.0
    t_ref: float = 273.15
    dT_cond: float = 20.0
    n_hold: float = 0.03
    n_buffer: float = 0.5
    k_loss: float = 0.0
    t_amb: float = 293.15

    def __post_init__(self):
        S = int(self.S)
        if S < 2:
            raise ConfigurationError(f"need at least 2 stages, got {S}")
        object.__setattr__(self, "S", S)
        for name in ("m_steel", "m_glass", "c", "q_loss"):
            object.__setattr__(self, name, _vec(getattr(self, name), S, name))
        if min(self.m_steel + self.m_glass) < 0 or self.cp_steel < 0 or self.cp_glass < 0:
            raise ConfigurationError("equipment masses and heat capacities must be >= 0")
        if min(self.c) <= 0:
            raise ConfigurationError("correction factors c must be > 0")
        if self.dT_cond <= 0:
            raise ConfigurationError("condenser offset dT_cond must be > 0")
        if self.n_hold < 0 or self.n_buffer < 0:
            raise ConfigurationError("holdups must be >= 0")

    @classmethod
    def lm2s(cls, **overrides):
        """Laboratory plant defaults (S = 12)."""
        kw = dict(
            S=LM2S_STAGES,
            m_steel=LM2S_M_STEEL,
            m_glass=LM2S_M_GLASS,
            c=LM2S_C,
            q_loss=LM2S_Q_LOSS,
        )
        kw.update(overrides)
        return cls(**kw)

    @property
    def heat_capacity(self) -> np.ndarray:
        """Equipment heat capacity per stage, c^j (m_steel cp_steel + m_glass cp_glass), J/K."""
        return np.asarray(self.c) * (
            np.asarray(self.m_steel) * self.cp_steel + np.asarray(self.m_glass) * self.cp_glass
        )

    def with_correction(self, c1, c_rest):
        """Copy with c^1 = c1 and a shared c^2..c^S = c_rest."""
        return dataclasses.replace(self, c=(float(c1),) + (float(c_rest),) * (self.S - 1))


@dataclass(frozen=True)
class ControlInputs:
    """Instantaneous control signals.

    ``withdrawal`` holds per-stage liquid withdrawals (mol/s); an empty tuple
    means none. ``dT_cond_override`` replaces the plant condenser offset.
    """

    epsilon: float
    P_head: float
    dP: float
    Q_in: float
    dT_cond_override: Optional[float] = None
    withdrawal: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "withdrawal", tuple(float(w) for w in self.withdrawal))
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidInputError(f"efflux ratio must lie in [0, 1], got {self.epsilon}")
        if not self.P_head > 0:
            raise InvalidInputError(f"head pressure must be positive, got {self.P_head}")
        if self.dP < 0:
            raise InvalidInputError(f"pressure drop must be >= 0, got {self.dP}")
        if any(w < 0 for w in self.withdrawal):
            raise InvalidInputError("withdrawal streams must be >= 0")
        if self.dT_cond_override is not None and self.dT_cond_override <= 0:
            raise InvalidInputError("condenser offset must be > 0")

    def withdrawal_vector(self, S) -> np.ndarray:
        if not self.withdrawal:
            return np.zeros(S)
        if len(self.withdrawal) != S:
            raise InvalidInputError(f"withdrawal must have {S} entries")
        return np.asarray(self.withdrawal)

    def condenser_offset(self, plant: PlantParams) -> float:
        return plant.dT_cond if self.dT_cond_override is None else self.dT_cond_override


@dataclass
class ColumnState:
    """Complete instantaneous state, 0-based stage arrays.

    ``L[k]`` is the liquid flow from stage k+2 down to stage k+1 (1-based),
    ``V[k]`` the vapor flow from stage k+1 up to k+2; ``V[S-1]`` enters the
    condenser.
    """

    n: np.ndarray
    x: np.ndarray
    y: np.ndarray
    T: np.ndarray
    L: np.ndarray
    V: np.ndarray
    x_B: np.ndarray
    B: float
    D: float
    reflux: float
    T_cond: float
    h_L: np.ndarray
    h_V: np.ndarray
    P: np.ndarray

    @property
    def S(self):
        return self.T.shape[0]

    @property
    def C(self):
        return self.x.shape[1]

    def copy(self):
        return dataclasses.replace(
            self, **{f.name: np.copy(getattr(self, f.name)) for f in dataclasses.fields(self)
                     if isinstance(getattr(self, f.name), np.ndarray)}
        )


@dataclass
class StateDerivative:
    """Time derivatives of the differential quantities."""

    n1: float
    x: np.ndarray
    T: np.ndarray
    x_B: np.ndarray


def pressure_profile(P_head, dP, S) -> np.ndarray:
    """Linear pressure profile, entry 0 the reboiler and entry S-1 the head."""
    S = int(S)
    if S < 2:
        raise ConfigurationError(f"need at least 2 stages, got {S}")
    if dP < 0:
        raise InvalidInputError(f"pressure drop must be >= 0, got {dP}")
    j = np.arange(1, S + 1)
    return P_head + ((S - j) * dP) / (S - 1)


def internal_energy_material(plant: PlantParams, j, T) -> float:
    """Energy stored in packing and walls of stage ``j`` (1-based), J."""
    if not 1 <= j <= plant.S:
        raise InvalidInputError(f"stage index {j} outside 1..{plant.S}")
    k = j - 1
    return plant.c[k] * (plant.m_steel[k] * plant.cp_steel + plant.m_glass[k] * plant.cp_glass) * (
        T - plant.t_ref
    )


def apparatus_holdup(state: ColumnState, n_buffer) -> float:
    return float(np.sum(state.n) + n_buffer)


def _check_dims(mixture, plant, state):
    S, C = plant.S, mixture.n_components
    shapes = {
        "n": (S,), "x": (S, C), "T": (S,), "L": (S - 1,), "V": (S,), "x_B": (C,),
    }
    for name, shape in shapes.items():
        if np.shape(getattr(state, name)) != shape:
            raise InvalidInputError(f"state.{name} has shape {np.shape(getattr(state, name))}, expected {shape}")


def stage_properties(mixture: MixtureModel, x, T, P):
    """K, y, h_L, h_V for all stages (thin wrapper over the kernel)."""
    a = mixture.arrays
    return kernels.stage_thermo(
        np.ascontiguousarray(x, dtype=float), np.asarray(T, dtype=float), np.asarray(P, dtype=float),
        a.antoine, a.cp, a.watson, a.tau_a, a.tau_b, a.alpha, mixture.reference_temperature,
    )


def reflux_enthalpy(mixture: MixtureModel, x_B, T_cond) -> float:
    H = kernels.pure_liquid_enthalpy(np.array([float(T_cond)]), mixture.arrays.cp,
                                     mixture.reference_temperature)[0]
    return float(np.dot(x_B, H))


def external_heat(plant: PlantParams, u: ControlInputs, T) -> np.ndarray:
    q = -np.asarray(plant.q_loss, dtype=float)
    q[0] = u.Q_in - plant.k_loss * (T[0] - plant.t_amb)
    return q


def assemble_residuals(mixture: MixtureModel, plant: PlantParams, u: ControlInputs,
                       state: ColumnState, rates: StateDerivative) -> np.ndarray:
    """Residual of the column DAE in physical units.

    Rows per stage: C component balances (mol/s), the energy balance (W),
    ``sum(x) - 1`` and ``sum(y) - 1``; then C buffer component balances,
    ``B - V^S`` and ``D - eps * B``. Accumulation terms are expanded by the
    chain rule from ``rates``; ``y`` and the enthalpies are re-evaluated from
    ``(x, T, P)`` so rows (d) and (e) are enforced through the summation row.
    """
    _check_dims(mixture, plant, state)
    if np.any(state.n < 0):
        k = int(np.argmax(state.n < 0))
        raise StateViolationError(f"negative holdup on stage {k + 1}", stage=k + 1)
    S = plant.S
    P = pressure_profile(u.P_head, u.dP, S)
    x = np.asarray(state.x, dtype=float)
    T = np.asarray(state.T, dtype=float)
    _, y, hL, hV = stage_properties(mixture, x, T, P)

    t_ref = mixture.reference_temperature
    H = kernels.pure_liquid_enthalpy(T, mixture.arrays.cp, t_ref)
    cp = kernels.pure_liquid_cp(T, mixture.arrays.cp)
    n = np.asarray(state.n, dtype=float)
    n_dot = np.zeros(S)
    n_dot[0] = rates.n1
    x_dot = np.asarray(rates.x, dtype=float)
    T_dot = np.asarray(rates.T, dtype=float)

    accM = n_dot[:, None] * x + n[:, None] * x_dot
    dh_dt = (H * x_dot).sum(axis=1) + (x * cp).sum(axis=1) * T_dot
    accE = n_dot * hL + n * dh_dt + plant.heat_capacity * T_dot
    accB = plant.n_buffer * np.asarray(rates.x_B, dtype=float)

    T_R = T[-1] - u.condenser_offset(plant)
    hR = reflux_enthalpy(mixture, state.x_B, T_R)
    return kernels.balance_residual(
        x, T, n, np.asarray(state.x_B, dtype=float),
        np.asarray(state.V, dtype=float), np.asarray(state.L, dtype=float),
        float(state.B), float(state.D), accM, accE, accB, y, hL, hV, hR,
        external_heat(plant, u, T), u.withdrawal_vector(S), float(u.epsilon),
    )


def residual_row_labels(mixture: MixtureModel, plant: PlantParams):
    """Human-readable label for every residual row."""
    labels = []
    for j in range(1, plant.S + 1):
        labels += [f"mass[{j},{name}]" for name in mixture.names]
        labels += [f"energy[{j}]", f"sum_x[{j}]", f"sum_y[{j}]"]
    labels += [f"buffer[{name}]" for name in mixture.names]
    labels += ["buffer_total", "distillate_split"]
    return labels


def _summation_gradient(mixture, x, T, P):
    """d(sum K_i x_i)/dx_m and d/dT per stage by central differences."""
    S, C = x.shape
    gx = np.empty((S, C))
    for m in range(C):
        h = 1e-6
        xp, xm = x.copy(), x.copy()
        xp[:, m] += h
        xm[:, m] -= h
        gx[:, m] = (stage_properties(mixture, xp, T, P)[1].sum(axis=1)
                    - stage_properties(mixture, xm, T, P)[1].sum(axis=1)) / (2 * h)
    hT = 1e-4
    gT = (stage_properties(mixture, x, T + hT, P)[1].sum(axis=1)
          - stage_properties(mixture, x, T - hT, P)[1].sum(axis=1)) / (2 * hT)
    return gx, gT


def consistent_derivative(mixture: MixtureModel, plant: PlantParams, u: ControlInputs,
                          state: ColumnState):
    """Solve the index-reduced algebraic system for flows and state rates.

    With (n, x, T, x_B) fixed, the balances are linear in the unknowns
    (V, L, B, D, dn1/dt, dx/dt, dT/dt, dx_B/dt) once the summation
    conditions are replaced by their time derivatives. Returns an updated
    copy of ``state`` (flows filled in) and the matching
    :class:`StateDerivative`.
    """
    S, C = plant.S, mixture.n_components
    P = pressure_profile(u.P_head, u.dP, S)
    x = np.asarray(state.x, dtype=float)
    T = np.asarray(state.T, dtype=float)
    gx, gT = _summation_gradient(mixture, x, T, P)
    base = state.copy()

    nV, nL = S, S - 1
    sizes = [nV, nL, 1, 1, 1, S * C, S, C]
    offsets = np.cumsum([0] + sizes)
    N = offsets[-1]

    def split(w):
        parts = [w[offsets[i]:offsets[i + 1]] for i in range(len(sizes))]
        return parts

    def fun(w):
        V, L, B, D, n1, xd, Td, xBd = split(w)
        s = dataclasses.replace(base, V=V, L=L, B=B[0], D=D[0])
        rates = StateDerivative(n1[0], xd.reshape(S, C), Td, xBd)
        r = assemble_residuals(mixture, plant, u, s, rates)
        block = r[: S * (C + 3)].reshape(S, C + 3)
        block[:, C + 1] = rates.x.sum(axis=1)
        block[:, C + 2] = (gx * rates.x).sum(axis=1) + gT * rates.T
        return r

    w0 = np.zeros(N)
    r0 = fun(w0)
    J = np.empty((N, N))
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        J[:, i] = fun(e) - r0
    w = np.linalg.solve(J, -r0)
    w = w - np.linalg.solve(J, fun(w))
    V, L, B, D, n1, xd, Td, xBd = split(w)
    out = dataclasses.replace(base, V=V.copy(), L=L.copy(), B=float(B[0]), D=float(D[0]),
                              reflux=float(B[0] - D[0]))
    return out, StateDerivative(float(n1[0]), xd.reshape(S, C).copy(), Td.copy(), xBd.copy())


def initialize_consistent(mixture: MixtureModel, plant: PlantParams, u: ControlInputs,
                          x1_0, n_app_0) -> ColumnState:
    """Column filled with feed at its bubble point on every stage.

    The buffer holds the head-stage bubble vapor; flows come from
    :func:`consistent_derivative`. Raises :class:`ConfigurationError` when
    the apparatus holdup leaves no liquid for the reboiler.
    """
    S, C = plant.S, mixture.n_components
    x1_0 = as_composition(x1_0, C, name="x1_0")
    n1 = float(n_app_0) - (S - 1) * plant.n_hold - plant.n_buffer
    if n1 <= 0:
        raise ConfigurationError(
            f"apparatus holdup {n_app_0} mol leaves no reboiler liquid "
            f"(stages hold {(S - 1) * plant.n_hold} mol, buffer {plant.n_buffer} mol)"
        )
    P = pressure_profile(u.P_head, u.dP, S)
    T = np.empty(S)
    for k in range(S):
        T[k] = bubble_point(mixture, x1_0, P[k]).T
    x = np.tile(x1_0, (S, 1))
    _, y, hL, hV = stage_properties(mixture, x, T, P)
    x_B = y[-1] / y[-1].sum()
    n = np.full(S, plant.n_hold)
    n[0] = n1
    state = ColumnState(
        n=n, x=x, y=y, T=T, L=np.zeros(S - 1), V=np.zeros(S), x_B=x_B,
        B=0.0, D=0.0, reflux=0.0, T_cond=T[-1] - u.condenser_offset(plant),
        h_L=hL, h_V=hV, P=P,
    )
    state, _ = consistent_derivative(mixture, plant, u, state)
    return state
