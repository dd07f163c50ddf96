"""Simulation of an idealized type-I down-conversion Bell experiment.

The package builds the two-photon state behind a waveplate-plus-beamsplitter
layout, computes the full six-outcome joint statistics at both detection
stations (keeping the bins where both photons end up on one side, and the
empty bins), evaluates the modified CHSH functional over that full pattern,
decides by linear programming whether the pattern admits any local hidden
variable model, and simulates the time-binned counting protocol that makes
the whole scheme work without an event-ready source.
"""

__version__ = "0.1.0"

from .bell import (
    CHSH_SIGNS,
    ChshResult,
    ChshSettings,
    OPTIMAL_SETTINGS,
    ValueAssignment,
    chsh_decomposition,
    chsh_from_tables,
    chsh_operator_expectation,
    correlator,
    diluted_chsh,
    optimize_angles,
)
from .errors import InputError, ModelError, PdcBellError
from .fock import (
    ModeId,
    StateVector,
    apply_creation,
    apply_mode_unitary,
    inner_product,
    states_equal_up_to_phase,
)
from .lhv import (
    BellCertificate,
    DeterministicStrategy,
    Feasible,
    Infeasible,
    LhvModel,
    enumerate_strategies,
    lhv_feasible,
    synthesize_tables,
    verify_certificate,
)
from .measurement import (
    JointDistribution,
    OutcomeClass,
    PolarizerAngle,
    classify_occupation,
    joint_distribution,
    marginal,
    rotate_station_basis,
)
from .montecarlo import (
    CascadeProbabilities,
    EstimateReport,
    EventLog,
    EventRecord,
    RunConfig,
    cascade_misclassification,
    estimate_chsh,
    estimate_correlators,
    run_experiment,
    sample_cascade,
    validate_config,
)
from .optics import (
    BeamsplitterSpec,
    PairAmplitude,
    WaveplateSpec,
    apply_beamsplitter,
    apply_waveplate,
    attach_vacuum,
    build_experiment_state,
    source_state,
)

__all__ = [name for name in dir() if not name.startswith("_")]
