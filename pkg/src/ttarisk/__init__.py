"""Surrogate risk metrics, risk-state Markov chains, exit analysis, and car-following simulation."""

from .errors import (
    ConfigError,
    DomainError,
    EmptyHistogramError,
    EmptyTraceError,
    InfeasibleFlowError,
    InfiniteExitTimeError,
    MappingError,
    NoExitError,
    NonAbsorptionError,
    OverlapError,
    RiskModelError,
    UnboundedSupportError,
)
from .exit_analysis import (
    ExitSolution,
    McEstimate,
    accident_frequency,
    conditional_accident_time,
    exit_probability,
    exit_time,
    mc_exit_oracle,
)
from .markov_model import (
    EXTENDED,
    IDEAL,
    MODIFIED,
    ChainParams,
    TrafficEnv,
    TransitionMatrix,
    build_extended_matrix,
    build_ideal_matrix,
    build_modified_matrix,
    classify_states,
    equilibrium_speed,
    flow_to_density,
    free_state_probs,
    trip_end_prob,
)
from .risk_metrics import (
    KinematicState,
    StateHistogram,
    TtaDistribution,
    coarsen,
    compute_ttc,
    histogram_to_distribution,
    read_histogram_csv,
    risk_entropy,
    self_information,
    shannon_entropy,
    write_histogram_csv,
)
from .sim_carfollow import (
    APPROACH,
    EVADE,
    HOLD,
    ControllerSettings,
    EmpiricalChain,
    FrameRecord,
    SimulationResult,
    TaskSpec,
    empirical_chain,
    generate_leader_stream,
    merge_results,
    run_task,
    step,
)
from .state_space import (
    NO_CONFLICT,
    StateSpaceConfig,
    build_state_space,
    representative_tta,
    threshold_to_state,
    tta_to_state,
)

__version__ = "0.1.0"
