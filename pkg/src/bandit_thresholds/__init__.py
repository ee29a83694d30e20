"""Multi-armed bandit simulation with horizon-aware exploration thresholds."""

from .beliefs import BeliefEnsemble, BetaPosterior, uniform_prior
from .policies import (
    EtcState,
    PolicyConfig,
    SelectionTrace,
    epsilon_greedy_select,
    explore_then_commit_select,
    make_policy,
    optimistic_exists_delta_select,
    optimistic_stochastic_select,
    point_update,
    thompson_select,
    vpi_select,
)
from .simulator import (
    BanditInstance,
    ExperimentConfig,
    RewardCurve,
    mix_seed,
    moving_average,
    run_episode,
    run_experiment,
    sample_instance,
    window_run_stats,
)
from .thresholds import (
    DiscountSpec,
    ExponentialBelief,
    ThresholdQuery,
    exploration_utility,
    exponential_delta_star,
    gamma_dist_condition,
    greedy_utility,
    median_gamma_threshold,
    should_explore_finite,
    should_explore_geometric,
    solve_scalar_root,
)

__version__ = "0.1.0"

__all__ = [
    "BanditInstance",
    "BeliefEnsemble",
    "BetaPosterior",
    "DiscountSpec",
    "EtcState",
    "ExperimentConfig",
    "ExponentialBelief",
    "PolicyConfig",
    "RewardCurve",
    "SelectionTrace",
    "ThresholdQuery",
    "epsilon_greedy_select",
    "exploration_utility",
    "explore_then_commit_select",
    "exponential_delta_star",
    "gamma_dist_condition",
    "greedy_utility",
    "make_policy",
    "median_gamma_threshold",
    "mix_seed",
    "moving_average",
    "optimistic_exists_delta_select",
    "optimistic_stochastic_select",
    "point_update",
    "run_episode",
    "run_experiment",
    "sample_instance",
    "should_explore_finite",
    "should_explore_geometric",
    "solve_scalar_root",
    "thompson_select",
    "uniform_prior",
    "vpi_select",
    "window_run_stats",
]
