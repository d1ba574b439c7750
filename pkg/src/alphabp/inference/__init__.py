"""Message passing, variational baselines and exact oracles."""

from .engine import (
    alpha_bp_step,
    bp_step,
    damped_bp_step,
    message_trajectory,
    node_beliefs,
    run_alpha_bp,
    run_damped_bp,
    run_trw,
    trw_beliefs,
    trw_step,
)
from .exact import exact_map, exact_marginals, map_decision
from .mean_field import mean_field_free_energy, mean_field_run, mean_field_sweep
from .spanning import edge_appearance_probabilities
from .types import (
    AlphaAssignment,
    AnnealSchedule,
    BeliefResult,
    EdgeAppearance,
    MessageState,
    RunConfig,
    init_messages,
)

__all__ = [
    "AlphaAssignment",
    "AnnealSchedule",
    "BeliefResult",
    "EdgeAppearance",
    "MessageState",
    "RunConfig",
    "alpha_bp_step",
    "bp_step",
    "damped_bp_step",
    "edge_appearance_probabilities",
    "exact_map",
    "exact_marginals",
    "init_messages",
    "map_decision",
    "mean_field_free_energy",
    "mean_field_run",
    "mean_field_sweep",
    "message_trajectory",
    "node_beliefs",
    "run_alpha_bp",
    "run_damped_bp",
    "run_trw",
    "trw_beliefs",
    "trw_step",
]
