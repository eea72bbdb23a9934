"""Simulator of nuclear-spin focusing and polarization in a singly-charged
quantum dot driven by a detuned train of finite-bandwidth sech pulses."""

__version__ = "0.1.0"

from .config import (
    BathParams,
    DotParams,
    NumericsParams,
    PulseParams,
    ScanSpec,
    SimulationConfig,
    default_config,
    dump_config,
    load_config,
    precession_frequency,
    pulse_duration_from_bandwidth,
    zeeman_frequency,
)
from .errors import (
    ConfigError,
    EmptyInputError,
    MisalignedTablesError,
    NoExcitationError,
    NonContractiveError,
    NonUnitaryError,
    NonpositiveFrequencyError,
    NufocusError,
    NumericalError,
    UnstableStepError,
    ZeroRateError,
)
from .kinetics import (
    DistributionTrajectory,
    FlipRates,
    NuclearDistribution,
    PolarizationGrid,
    drift_table,
    evolve_distribution,
    flip_rates,
    generator_residual,
    max_stable_step,
    mean_drift,
    moments,
    rates_from_tables,
    steady_distribution,
)
from .pipeline import (
    FineDriftTable,
    ObservableRow,
    PipelineResult,
    PropagatorCache,
    build_cache,
    fine_drift_curve,
    observables_from_distribution,
    run_pipeline,
    scan,
)
from .propagator import (
    CircularAmplitudes,
    Propagator,
    excitation_asymmetry,
    hamiltonian_at,
    propagate_batch,
    propagate_pulse,
    propagate_random_batch,
    retardance_to_circular,
)
from .steady_state import (
    BlochState,
    PeriodMap,
    SpinTable,
    apply_pulse,
    build_period_map,
    interpulse_channel,
    spin_vs_frequency,
    steady_state,
    steady_states_batch,
)
