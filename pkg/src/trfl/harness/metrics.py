"""Accuracy, ranking average precision and the per-epoch metrics record."""
from dataclasses import asdict, dataclass

import numpy as np

from ..exceptions import ConfigurationError

METRICS_FIELDS = ("run", "epoch", "split", "loss", "metric", "seconds")


@dataclass(frozen=True)
class MetricsRow:
    """One evaluation: accuracy for single-label runs, mAP for multi-label."""

    run: str
    epoch: int
    split: str
    loss: float
    metric: float
    seconds: float

    def __post_init__(self):
        if not 0.0 <= self.metric <= 1.0:
            raise ValueError(f"metric {self.metric} outside [0, 1]")

    def to_dict(self):
        return asdict(self)


def accuracy(logits, labels):
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(labels)))


def average_precision(scores, labels):
    """Ranking AP of one class: mean precision at each positive.

    Samples are ranked by descending score; equal scores keep sample order.
    Returns ``None`` when there is no positive.
    """
    labels = np.asarray(labels).astype(bool)
    if not labels.any():
        return None
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    hits = labels[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, len(ranks) + 1) / ranks))


def mean_average_precision(scores, labels, return_details=False):
    """Unweighted mean of per-class AP over classes with at least one positive.

    Args:
        scores: ``(N, C)`` real scores.
        labels: ``(N, C)`` multi-hot matrix.
        return_details: also return ``{"per_class": [...], "skipped": [...]}``
            where skipped lists classes without positives.

    Raises:
        ConfigurationError: no class has a positive label.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim == 1:
        scores, labels = scores[:, None], labels[:, None]
    if scores.shape != labels.shape:
        raise ConfigurationError(f"scores {scores.shape} and labels {labels.shape} differ in shape")
    per_class = [average_precision(scores[:, c], labels[:, c]) for c in range(scores.shape[1])]
    valid = [ap for ap in per_class if ap is not None]
    if not valid:
        raise ConfigurationError("mAP undefined: no class has a positive label")
    value = float(np.mean(valid))
    if return_details:
        return value, {"per_class": per_class,
                       "skipped": [c for c, ap in enumerate(per_class) if ap is None]}
    return value
