"""Transmission control for a network-coded two-way relay.

A discounted MDP over queue occupancies and Markov fading channel states,
solved by value iteration, with numerical checkers for the lattice
properties (submodularity, L-natural convexity, multimodularity, stochastic
dominance) that make the optimal policy monotone.
"""
from .channel import (
    ChannelConfig,
    ChannelError,
    ChannelModel,
    build_channel,
    equiprobable_boundaries,
    lcr_transition_matrix,
    level_crossing_rate,
    symbol_error_prob,
)
from .config import ConfigError
from .experiments import ExperimentSpec, load_spec, run_experiment, run_suite
from .model import (
    ACTIONS,
    ConfigurationError,
    ModelParams,
    RelayMDP,
    State,
    StateSpace,
    TransitionKernel,
    build_kernel,
    build_model,
    cost_table,
    holding_cost,
    immediate_cost,
    next_queue_occupancy,
    queue_transition_prob,
)
from .policy import ChainMetrics, ThresholdSurface, extract_thresholds, simulate_chain, stationary_metrics, threshold_policy
from .solver import (
    ConditionViolation,
    ConvergenceError,
    MonotonicityViolation,
    Policy,
    VIResult,
    monotone_value_iteration,
    policy_evaluation_exact,
    value_iteration,
)
from .structure import (
    CheckReport,
    LatticeFunction,
    check_game_equilibria,
    check_lnatural,
    check_monotone_policy,
    check_multimodular,
    check_stochastic_dominance,
    check_submodular,
    check_theorem_conditions,
    unimodular_transform,
)

__version__ = "0.1.0"
