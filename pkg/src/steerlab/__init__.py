"""Steering two-qubit systems into chosen mixed states with blind weak measurements."""

from .lindblad import (
    EvolutionResult,
    Liouvillian,
    build_liouvillian,
    evolve_discrete,
    evolve_master,
    spectral_gap,
    steady_state,
)
from .metrics import (
    FAMILY_BASIS,
    concurrence,
    concurrence_family,
    discord_family,
    discord_numeric,
    family_probabilities,
    family_state,
    fidelity_deviation,
    is_ppt_separable,
)
from .protocol import (
    MeasurementStep,
    ProtocolSchedule,
    TargetSpec,
    assign_couplings,
    default_tau,
    diagonalize_target,
    schedule_from_rates,
)
from .trajectory import EnsembleStats, TrajectoryRecord, ensemble_average, run_trajectory

__version__ = "0.1.0"
