"""Small reference problems for convergence checks and benchmarks.

:func:`reference_scenario` builds a 3-stage column separating an ideal
binary mixture (gamma = 1) with constant controls. It is cheap enough to
integrate with very small steps, so a fine-step run serves as the oracle
for the first-order convergence of the integrator.
"""

from __future__ import annotations

import math

from .anomaly import ControlTrajectory
from .column import ControlInputs, PlantParams
from .integrator import IntegratorConfig
from .thermo import PureComponent, ideal_mixture

_LN10 = math.log(10.0)
_MMHG = math.log(101325.0 / 760.0)


def _antoine_log10_mmhg_degc(A, B, C):
    """(A, B, C) of ln P[Pa] = A - B / (T[K] + C) from the log10/mmHg/degC form."""
    return (A * _LN10 + _MMHG, B * _LN10, C - 273.15)


def ideal_binary():
    """Benzene-like light and toluene-like heavy component, ideal mixture."""
    light = PureComponent(
        name="light", antoine=_antoine_log10_mmhg_degc(6.90565, 1211.033, 220.79),
        cp_liquid=(136.0,), dh_vap=(30720.0, 353.2, 562.2, 0.38), t_range=(280.0, 420.0),
        molar_mass=0.078,
    )
    heavy = PureComponent(
        name="heavy", antoine=_antoine_log10_mmhg_degc(6.95464, 1344.8, 219.482),
        cp_liquid=(157.0,), dh_vap=(33180.0, 383.8, 591.8, 0.38), t_range=(280.0, 440.0),
        molar_mass=0.092,
    )
    return ideal_mixture((light, heavy))


def reference_plant(**overrides):
    kw = dict(S=3, m_steel=(0.2, 0.05, 0.05), m_glass=(0.5, 0.1, 0.1), c=(1.0, 1.0, 1.0),
              q_loss=(0.0, 0.0, 0.5), n_hold=1.0, n_buffer=0.3)
    kw.update(overrides)
    return PlantParams(**kw)


def reference_controls(**overrides):
    kw = dict(epsilon=0.3, P_head=101325.0, dP=50.0, Q_in=20.0, dT_cond_override=5.0,
              withdrawal=(0.0, 0.0, 0.0))
    kw.update(overrides)
    return ControlInputs(**kw)


def reference_scenario(dt_max=2.0, horizon=1200.0, sample_interval=60.0, **control_overrides):
    """Scenario of the 3-stage ideal-binary reference problem.

    Steps are fixed at ``dt_max`` (``dt_init = dt_max``) so that runs with
    different ``dt_max`` form a clean refinement sequence.
    """
    from .workflow.config import Scenario

    cfg = IntegratorConfig(dt_init=dt_max, dt_min=min(1e-3, dt_max), dt_max=dt_max,
                           newton_tol=1e-12, newton_max_iter=12, sample_interval=sample_interval,
                           depletion_threshold=0.1)
    return Scenario(
        id="reference", plant=reference_plant(), mixture=ideal_binary(),
        controls=ControlTrajectory(reference_controls(**control_overrides)),
        x1_0=(0.5, 0.5), n_app_0=6.0, horizon=horizon, integrator=cfg,
        system="light_heavy", setup="reference_S3", operating_point="reference",
    )
