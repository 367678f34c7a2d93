"""Online POMDP planning over particle beliefs with trajectory reuse.

The package provides the particle-filter belief machinery, an incrementally
updated balance-heuristic MIS estimator, experience-based Q estimation with
suffix reuse, the PFT-DPW baseline planner and its reuse variant (IR-PFT),
the 2D Light Dark benchmark, and a benchmark CLI (``irpft-bench``).
"""

from .beliefs import (
    ContinuousActionSpace,
    DiscreteActionSpace,
    GenerativeModel,
    ParticleBelief,
    PropagatedBelief,
    pf_step,
    propagated_log_likelihood,
    resample,
)
from .errors import (
    AllWeightsZero,
    ConfigError,
    EmptyAccumulator,
    EmptyDataset,
    EmptyTrajectory,
    MismatchedCardinality,
    NoCandidates,
    UnknownDistribution,
    ZeroProposalDensity,
)
from .experience import (
    Dataset,
    ReuseCandidate,
    SuffixStep,
    TrajectoryRecord,
    adjusted_return,
    export_records,
    get_reuse_candidate,
    import_records,
    q_mis_experience,
    q_simple_reuse,
    suffix_log_weight,
    update_reuse_candidates,
)
from .lightdark import (
    LightDarkConfig,
    LightDarkEnv,
    LightDarkModel,
    boers_entropy,
    initial_belief,
)
from .mis import MisAccumulator, SampleEntry, is_estimate
from .planners import (
    EpisodeStep,
    FillStats,
    PlanResult,
    ReuseControls,
    fill_horizon,
    irpft_plan,
    make_rollout_policy,
    pft_plan,
    plan_session,
    rollout,
    should_reuse,
    solve_loop,
)
from .tree import ActionNode, BeliefNode, PlannerConfig, PropagatedNode

__version__ = "0.1.0"

__all__ = [
    "ActionNode",
    "AllWeightsZero",
    "BeliefNode",
    "ConfigError",
    "ContinuousActionSpace",
    "Dataset",
    "DiscreteActionSpace",
    "EmptyAccumulator",
    "EmptyDataset",
    "EmptyTrajectory",
    "EpisodeStep",
    "FillStats",
    "GenerativeModel",
    "LightDarkConfig",
    "LightDarkEnv",
    "LightDarkModel",
    "MisAccumulator",
    "MismatchedCardinality",
    "NoCandidates",
    "ParticleBelief",
    "PlanResult",
    "PlannerConfig",
    "PropagatedBelief",
    "PropagatedNode",
    "ReuseCandidate",
    "ReuseControls",
    "SampleEntry",
    "SuffixStep",
    "TrajectoryRecord",
    "UnknownDistribution",
    "ZeroProposalDensity",
    "adjusted_return",
    "boers_entropy",
    "export_records",
    "fill_horizon",
    "get_reuse_candidate",
    "import_records",
    "initial_belief",
    "irpft_plan",
    "is_estimate",
    "make_rollout_policy",
    "pf_step",
    "pft_plan",
    "plan_session",
    "propagated_log_likelihood",
    "q_mis_experience",
    "q_simple_reuse",
    "resample",
    "rollout",
    "should_reuse",
    "solve_loop",
    "suffix_log_weight",
    "update_reuse_candidates",
]
