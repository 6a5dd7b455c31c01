"""Service-rate control of an M/M/1 queue.

An event-driven simulator poses the queue as an average-reward
semi-Markov decision process; three differential policy-gradient agents
(REINFORCE, A2C, PPO) learn rate-selection policies, and an exact
dynamic-programming threshold policy provides the benchmark and the
analytic oracles.
"""

from .agents import (
    AgentConfig,
    CenteringMode,
    RhoEstimator,
    Transition,
    a2c_update,
    clipped_surrogate_term,
    greedy_action,
    ppo_update,
    reinforce_update,
    select_action,
)
from .dp import (
    DpSolution,
    StationaryResult,
    ThresholdPolicy,
    TruncatedModel,
    best_threshold_policy,
    extract_thresholds,
    mm1_cost_rate,
    mm1_expected_q,
    relative_value_iteration,
    stationary_analysis,
    verify_by_simulation,
)
from .env import (
    EnvParams,
    QueueState,
    Representation,
    StepRecord,
    WarmStartBuffer,
    make_rng,
    observe,
    record_terminal,
    reset,
    step,
)
from .harness import (
    ExperimentConfig,
    RunArtifacts,
    config_hash,
    load_config,
    report,
    run_grid,
    run_trial,
    solve_baseline,
)
from .metrics import (
    EtaTarget,
    LearningCurve,
    PolicyQuality,
    RegretTrace,
    convergence_speed,
    policy_quality,
    pseudo_regret,
    sampling_efficiency,
)
from .nets import (
    Direction,
    GradBuffer,
    MlpParams,
    TrainingDiverged,
    init_mlp,
    load_checkpoint,
    logprob_grad,
    policy_forward,
    save_checkpoint,
    sgd_apply,
    value_forward,
    value_grad,
)

__version__ = "0.1.0"
