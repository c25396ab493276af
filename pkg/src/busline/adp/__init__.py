"""Learning controller: Q-network, rollout search, training loop."""

from .qnet import QNet
from .state import decision_features, formal_stage_step
from .lookahead import RolloutTables, rollout_from_context, search_best_action
from .training import (
    QLearningController,
    TrainingDiverged,
    TrainingResult,
    evaluate,
    load_controller,
    save_checkpoint,
    stage_cost,
    train,
    write_trace_csv,
)

__all__ = [
    "QNet",
    "decision_features",
    "formal_stage_step",
    "RolloutTables",
    "rollout_from_context",
    "search_best_action",
    "QLearningController",
    "TrainingDiverged",
    "TrainingResult",
    "evaluate",
    "load_controller",
    "save_checkpoint",
    "stage_cost",
    "train",
    "write_trace_csv",
]
