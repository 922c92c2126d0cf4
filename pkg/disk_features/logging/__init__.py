from .training_logger import TrainingLogger

__all__ = ["TrainingLogger"]
