"""Training, evaluation and the permutation experiment."""
from .estimator import VideoClassifier
from .experiment import SCALES, Fig3Scale, experiment_fig3, get_scale
from .metrics import MetricsRow, accuracy, average_precision, mean_average_precision
from .runner import RunResult, TrainConfig, evaluate, load_split, train
from .validation import check_targets, check_videos

__all__ = [
    "Fig3Scale", "MetricsRow", "RunResult", "SCALES", "TrainConfig", "VideoClassifier", "accuracy",
    "average_precision", "check_targets", "check_videos", "evaluate", "experiment_fig3",
    "get_scale", "load_split", "mean_average_precision", "train",
]
