"""Dynamic batch-distillation simulation with injected control anomalies.

The column is an equilibrium-stage model with a constant-holdup buffer
vessel after the condenser. Anomalies are replayed as ramped setpoint
changes of the actuators, and batches of scenarios are written into a
dataset folder layout together with their configuration.
"""

from .anomaly import (
    Annotation,
    ControlTrajectory,
    Perturbation,
    Target,
    build_trajectory,
    evaluate_control,
    perturbation_windows,
)
from .column import (
    ColumnState,
    ControlInputs,
    PlantParams,
    apparatus_holdup,
    assemble_residuals,
    initialize_consistent,
    internal_energy_material,
    pressure_profile,
)
from .errors import BatchDistError
from .integrator import (
    IntegratorConfig,
    SimulationResult,
    StopReason,
    TimeSeriesRecord,
    newton_solve,
    simulate,
    step,
)
from .thermo import (
    BinaryParameters,
    MixtureModel,
    PureComponent,
    activity_coefficients,
    bubble_point,
    k_values,
    liquid_enthalpy,
    vapor_enthalpy,
    vapor_pressure,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "BatchDistError",
    "BinaryParameters",
    "ColumnState",
    "ControlInputs",
    "ControlTrajectory",
    "IntegratorConfig",
    "MixtureModel",
    "Perturbation",
    "PlantParams",
    "PureComponent",
    "SimulationResult",
    "StopReason",
    "Target",
    "TimeSeriesRecord",
    "activity_coefficients",
    "apparatus_holdup",
    "assemble_residuals",
    "bubble_point",
    "build_trajectory",
    "evaluate_control",
    "initialize_consistent",
    "internal_energy_material",
    "k_values",
    "liquid_enthalpy",
    "newton_solve",
    "perturbation_windows",
    "pressure_profile",
    "simulate",
    "step",
    "vapor_enthalpy",
    "vapor_pressure",
]
