"""Robust observation regions and regret simulation for misspecified linear bandits."""
from .algorithms import (
    EpsGreedyAgent,
    EpsGreedyConfig,
    ForcedBasis,
    LinUCBAgent,
    LinUCBConfig,
    LseState,
    Ridge,
    beta,
    contextual_action,
    eps_greedy_action,
    linucb_action,
    lse_update,
    model_space_gap,
    model_space_gap_contextual,
    suboptimal_play_bound,
)
from .env import BanditEnv, ContextualEnv, NoiseModel, trial_streams
from .errors import (
    ArmOutOfRange,
    BoundaryWarning,
    ConfigError,
    DegenerateRegion,
    EmptyRegion,
    InsufficientData,
    MisspecError,
    NotMember,
    RegionTooThin,
    RidgeFallbackWarning,
    SingularDesign,
    TiedOptimum,
)
from .harness import (
    ExperimentConfig,
    InstanceStats,
    RegretTrace,
    compute_stats,
    emit_outputs,
    growth_exponent,
    run_experiment,
)
from .kernel import BACKEND
from .linalg_core import (
    BasicSolutionSet,
    FeatureMatrix,
    RewardInstance,
    SamplingWeights,
    augment_ridge,
    chebyshev_misspec,
    enumerate_basic_solutions,
    forsgren_weights,
    regularized_model_estimate,
    weighted_lse,
)
from .regions import (
    ContextualInstance,
    HalfspaceSystem,
    RobustMembershipReport,
    contextual_param_region,
    greedy_optimal_arm,
    interior_margin,
    param_region,
    param_region_contains,
    robust_membership,
    robust_membership_contextual,
    robust_membership_ridge,
    sample_robust_contextual,
    sample_robust_instance,
)

__version__ = "0.1.0"
