from .config import TrainConfig, ScheduleConfig, EvalConfig, DEFAULT_STEPS, DEFAULT_LR
from .optimizer import AdamState, adam_update
from .schedule import anneal
from .evaluation import EvalReport, evaluate_matches, MMA_THRESHOLDS
from .trainer import DiskTrainer, TrainingState, TrainingResult, TrainingController, train_toy

__all__ = [
    "TrainConfig", "ScheduleConfig", "EvalConfig", "DEFAULT_STEPS", "DEFAULT_LR",
    "AdamState", "adam_update",
    "anneal",
    "EvalReport", "evaluate_matches", "MMA_THRESHOLDS",
    "DiskTrainer", "TrainingState", "TrainingResult", "TrainingController", "train_toy",
]
