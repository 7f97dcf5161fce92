from .config import MemoryMode, TrainerConfig
from .learner import (
    LearnerSpec,
    Targets,
    compute_targets,
    em_loss_terms,
    loss_em,
    loss_wqmix_em,
    td_loss_terms,
    training_loss,
    wqmix_em_terms,
    wqmix_loss_terms,
)
from .loop import TrainState, evaluate, init_train_state, run_episode, select_actions, train, train_step

__all__ = [
    "LearnerSpec",
    "MemoryMode",
    "Targets",
    "TrainState",
    "TrainerConfig",
    "compute_targets",
    "em_loss_terms",
    "evaluate",
    "init_train_state",
    "loss_em",
    "loss_wqmix_em",
    "run_episode",
    "select_actions",
    "td_loss_terms",
    "train",
    "train_step",
    "training_loss",
    "wqmix_em_terms",
    "wqmix_loss_terms",
]
