"""Hybrid transmit-precoder design and Monte-Carlo MSE evaluation for
decentralized parameter estimation over mmWave MIMO sensor networks."""

from .channel import (
    ArrayGeometry,
    ChannelRealization,
    NormBallUncertainty,
    StochasticUncertainty,
    apply_stochastic_error,
    array_response,
    correlation_matrix,
    sample_channel,
    sample_norm_ball_error,
)
from .config import ScenarioConfig
from .design import (
    DesignProblem,
    DigitalPrecoder,
    assemble_problem,
    design_per_node_power,
    design_total_power,
    design_zf,
    evaluate_mse_analytic,
    node_power,
    select_rf_combiner,
    solve_eq_qp,
)
from .errors import (
    BeamformingError,
    ConfigError,
    DimensionError,
    InfeasibleError,
    MaxIterationsError,
    RankDeficiencyError,
    SingularMatrixError,
)
from .network import (
    FcModel,
    NodeModel,
    PriorModel,
    centralized_mmse_bound,
    fc_from_config,
    generate_observation,
    sample_nodes,
    sample_parameter,
)
from .robust import (
    RobustProblemNormBall,
    RobustProblemStochastic,
    assemble_norm_ball,
    assemble_stochastic,
    compute_norm_ball_constants,
    design_robust_norm_ball,
    design_robust_stochastic,
    evaluate_average_mse,
    lemma2_expectation,
    worst_case_mse_bound,
)
from .sim import (
    DESIGN_KINDS,
    SweepResult,
    SweepRow,
    TrialStreams,
    estimate_mse,
    run_trial,
    sweep,
)
from .somp import (
    HybridPrecoder,
    assemble_network_hybrid,
    decompose_network,
    hybrid_mse_penalty,
    somp_decompose,
)

__version__ = "0.1.0"
