"""Control trajectories with ramped setpoint perturbations.

An anomaly is replayed as a temporary setpoint change of one actuator: the
signal ramps linearly from its baseline to the perturbed value starting at
``t_start``, holds it until ``t_end`` and ramps back over ``ramp_down``.
Anomalies whose cause is not an actuator setpoint (foaming, sensor faults,
...) cannot be expressed this way and are rejected with a reason.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from .column import ControlInputs
from .errors import ConfigurationError, InvalidInputError


class Target(str, enum.Enum):
    EFFLUX_RATIO = "efflux_ratio"
    HEAT_DUTY = "heat_duty"
    HEAD_PRESSURE = "head_pressure"
    CONDENSER_OFFSET = "condenser_offset"
    WITHDRAWAL = "withdrawal"


DEFAULT_RAMP = {
    Target.EFFLUX_RATIO: 30.0,
    Target.HEAT_DUTY: 30.0,
    Target.HEAD_PRESSURE: 300.0,
    Target.CONDENSER_OFFSET: 30.0,
    Target.WITHDRAWAL: 30.0,
}

NOT_MAPPABLE = "not mappable"

# keyword -> target; checked in order, first hit wins
_CAUSE_KEYWORDS = (
    (("foam", "sensor", "noise", "drift", "freez", "fouling", "mixture property"), None),
    (("efflux", "reflux"), Target.EFFLUX_RATIO),
    (("heat", "heater", "heating"), Target.HEAT_DUTY),
    (("pressure",), Target.HEAD_PRESSURE),
    (("condenser", "cooling"), Target.CONDENSER_OFFSET),
    (("leak", "withdraw", "sampling", "drain"), Target.WITHDRAWAL),
)


@dataclass(frozen=True)
class Perturbation:
    """A ramped setpoint change of one control signal.

    ``value`` is in the target's units (efflux ratio dimensionless, heat duty
    W, head pressure Pa, condenser offset K, withdrawal mol/s). ``stage`` is
    the 1-based stage of a withdrawal (reboiler when omitted).
    """

    target: Target
    t_start: float
    t_end: float
    value: float
    ramp_up: Optional[float] = None
    ramp_down: Optional[float] = None
    anomaly_id: str = ""
    stage: Optional[int] = None

    def __post_init__(self):
        target = Target(self.target)
        object.__setattr__(self, "target", target)
        for name in ("ramp_up", "ramp_down"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, DEFAULT_RAMP[target])
        if target is Target.WITHDRAWAL and self.stage is None:
            object.__setattr__(self, "stage", 1)
        if target is not Target.WITHDRAWAL and self.stage is not None:
            raise InvalidInputError(f"{self.anomaly_id}: stage index only applies to withdrawals")
        if not 0 <= self.t_start < self.t_end:
            raise InvalidInputError(f"{self.anomaly_id}: need 0 <= t_start < t_end")
        if self.ramp_up < 0 or self.ramp_down < 0:
            raise InvalidInputError(f"{self.anomaly_id}: ramp durations must be >= 0")
        if self.ramp_up > self.t_end - self.t_start:
            raise InvalidInputError(f"{self.anomaly_id}: ramp_up longer than the perturbation")
        if target is Target.EFFLUX_RATIO and not 0 <= self.value <= 1:
            raise InvalidInputError(f"{self.anomaly_id}: efflux ratio must lie in [0, 1]")
        if target in (Target.HEAD_PRESSURE, Target.CONDENSER_OFFSET) and self.value <= 0:
            raise InvalidInputError(f"{self.anomaly_id}: {target.value} must be positive")
        if target is Target.WITHDRAWAL and (self.value < 0 or self.stage < 1):
            raise InvalidInputError(f"{self.anomaly_id}: invalid withdrawal")

    @property
    def key(self):
        return (self.target, self.stage)

    @property
    def label_end(self):
        return self.t_end + self.ramp_down

    def knots(self):
        return (self.t_start, self.t_start + self.ramp_up, self.t_end, self.label_end)

    def apply(self, base, t):
        """Perturbed signal at ``t`` given the baseline value ``base``."""
        if t <= self.t_start or t >= self.label_end:
            return base
        if t < self.t_start + self.ramp_up:
            return base + (self.value - base) * ((t - self.t_start) / self.ramp_up)
        if t <= self.t_end:
            return self.value
        return self.value + (base - self.value) * ((t - self.t_end) / self.ramp_down)


@dataclass(frozen=True)
class Annotation:
    """An anomaly as recorded for an experiment.

    ``target`` may be left empty, in which case it is inferred from
    ``cause``. ``simulated=False`` marks an anomaly the user excludes.
    """

    anomaly_id: str
    cause: str
    t_start: float
    t_end: float
    value: float = float("nan")
    target: Optional[str] = None
    stage: Optional[int] = None
    ramp_up: Optional[float] = None
    ramp_down: Optional[float] = None
    simulated: bool = True


class Window(NamedTuple):
    target: Target
    t_start: float
    t_end: float
    anomaly_id: str


def _baseline_value(baseline: ControlInputs, p: Perturbation):
    if p.target is Target.EFFLUX_RATIO:
        return baseline.epsilon
    if p.target is Target.HEAT_DUTY:
        return baseline.Q_in
    if p.target is Target.HEAD_PRESSURE:
        return baseline.P_head
    if p.target is Target.CONDENSER_OFFSET:
        return baseline.dT_cond_override
    return baseline.withdrawal[p.stage - 1]


@dataclass(frozen=True)
class ControlTrajectory:
    """Constant baseline controls plus non-overlapping perturbations.

    Perturbations on the same signal must not overlap, ramp tails included,
    so evaluation never has to combine them. Annotations that could not be
    mapped are kept in ``rejected`` as ``(anomaly_id, reason)`` pairs.
    """

    baseline: ControlInputs
    perturbations: tuple = ()
    rejected: tuple = field(default=(), compare=False)

    def __post_init__(self):
        perts = tuple(sorted(self.perturbations, key=lambda p: (p.t_start, p.target.value)))
        object.__setattr__(self, "perturbations", perts)
        for p in perts:
            if p.target is Target.CONDENSER_OFFSET and self.baseline.dT_cond_override is None:
                raise ConfigurationError(
                    f"{p.anomaly_id}: condenser-offset perturbation needs an explicit baseline offset"
                )
            if p.target is Target.WITHDRAWAL and p.stage > len(self.baseline.withdrawal):
                raise ConfigurationError(
                    f"{p.anomaly_id}: withdrawal stage {p.stage} outside the baseline withdrawal vector"
                )
        clashes = []
        by_key = {}
        for p in perts:
            by_key.setdefault(p.key, []).append(p)
        for group in by_key.values():
            for a, b in zip(group, group[1:]):
                if b.t_start < a.label_end:
                    clashes.append((a.anomaly_id, b.anomaly_id))
        if clashes:
            raise ConfigurationError(f"overlapping perturbations on the same signal: {clashes}")

    def knots(self):
        return sorted({k for p in self.perturbations for k in p.knots()})


def evaluate_control(traj: ControlTrajectory, t) -> ControlInputs:
    """Control inputs at time ``t`` (piecewise linear, continuous)."""
    if t < 0:
        raise InvalidInputError(f"time must be >= 0, got {t}")
    base = traj.baseline
    active = [p for p in traj.perturbations if p.t_start < t < p.label_end]
    if not active:
        return base
    eps, Q, P, dT = base.epsilon, base.Q_in, base.P_head, base.dT_cond_override
    W = list(base.withdrawal)
    for p in active:
        if p.target is Target.EFFLUX_RATIO:
            eps = p.apply(eps, t)
        elif p.target is Target.HEAT_DUTY:
            Q = p.apply(Q, t)
        elif p.target is Target.HEAD_PRESSURE:
            P = p.apply(P, t)
        elif p.target is Target.CONDENSER_OFFSET:
            dT = p.apply(dT, t)
        else:
            W[p.stage - 1] = p.apply(W[p.stage - 1], t)
    return dataclasses.replace(base, epsilon=eps, Q_in=Q, P_head=P,
                               dT_cond_override=dT, withdrawal=tuple(W))


def perturbation_windows(traj: ControlTrajectory):
    """Label windows ``[t_start, t_end + ramp_down]`` in chronological order."""
    return [Window(p.target, p.t_start, p.label_end, p.anomaly_id) for p in traj.perturbations]


def active_anomalies(windows: Sequence[Window], t):
    return tuple(w.anomaly_id for w in windows if w.t_start <= t <= w.t_end)


def map_target(annotation: Annotation):
    """Resolve the control target of an annotation, or None if not mappable."""
    if annotation.target:
        try:
            return Target(annotation.target)
        except ValueError:
            return None
    cause = annotation.cause.lower()
    for words, target in _CAUSE_KEYWORDS:
        if any(w in cause for w in words):
            return target
    return None


def build_trajectory(baseline: ControlInputs, annotations: Sequence[Annotation]) -> ControlTrajectory:
    """Translate anomaly annotations into a validated trajectory.

    Annotations that are not actuator setpoint changes, or are flagged
    ``simulated=False``, end up in ``trajectory.rejected``.
    """
    perts, rejected = [], []
    for ann in annotations:
        if not ann.simulated:
            rejected.append((ann.anomaly_id, "excluded by configuration"))
            continue
        target = map_target(ann)
        if target is None:
            rejected.append((ann.anomaly_id, f"{NOT_MAPPABLE}: cause '{ann.cause}' is not a control setpoint"))
            continue
        if ann.value != ann.value:
            rejected.append((ann.anomaly_id, "no perturbed setpoint value given"))
            continue
        perts.append(Perturbation(
            target=target, t_start=ann.t_start, t_end=ann.t_end, value=ann.value,
            ramp_up=ann.ramp_up, ramp_down=ann.ramp_down, anomaly_id=ann.anomaly_id,
            stage=ann.stage if target is Target.WITHDRAWAL else None,
        ))
    return ControlTrajectory(baseline, tuple(perts), tuple(rejected))
