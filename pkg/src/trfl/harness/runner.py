"""File-based training and evaluation runs.

A run directory holds::

    config.json    resolved configuration
    metrics.csv    run,epoch,split,loss,metric,seconds
    best.ckpt      weights of the best validation epoch
    results.json   summary, including final evaluations
"""
import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields

from ..arch import normalize_preset_name
from ..dmm import Split, read_container
from ..exceptions import ConfigurationError
from .estimator import LOSSES, VideoClassifier
from .metrics import METRICS_FIELDS

CONFIG_FILE = "config.json"
METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "best.ckpt"
RESULTS_FILE = "results.json"


@dataclass
class TrainConfig:
    """Everything needed to reproduce one training run.

    ``dataset`` is a directory of split containers (as written by
    ``gen-data``) or a single container. ``eval_splits`` are evaluated with
    the best checkpoint once training ends.
    """

    model: str = "video_bagnet_9"
    width: float = None
    downsample_at: str = None
    dataset: str = ""
    train_split: str = "train"
    eval_splits: tuple = ()
    optimizer: str = "sgd"
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    schedule: str = "cosine"
    batch_size: int = 8
    epochs: int = 10
    seed: int = 0
    loss: str = "softmax_ce"
    eval_every: int = 1
    validation_fraction: float = 0.1
    fc_init: str = "small"
    run_id: str = "run"

    def __post_init__(self):
        self.eval_splits = tuple(self.eval_splits)
        self.validate()

    def validate(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss not in LOSSES:
            raise ConfigurationError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.eval_every < 1:
            raise ConfigurationError(f"eval_every must be >= 1, got {self.eval_every}")
        normalize_preset_name(self.model)

    def to_dict(self):
        out = asdict(self)
        out["eval_splits"] = list(self.eval_splits)
        return out

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown train config keys {sorted(unknown)}")
        return cls(**data)

    def estimator(self):
        return VideoClassifier(
            arch=normalize_preset_name(self.model), width=self.width,
            downsample_at=self.downsample_at, optimizer=self.optimizer, lr=self.lr,
            momentum=self.momentum, weight_decay=self.weight_decay, schedule=self.schedule,
            epochs=self.epochs, batch_size=self.batch_size, loss=self.loss,
            validation_fraction=self.validation_fraction, random_state=self.seed,
            run_id=self.run_id, eval_every=self.eval_every, fc_init=self.fc_init)


@dataclass
class RunResult:
    run_dir: str
    checkpoint: str
    history: list
    evaluations: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def load_split(source, split=None):
    """Accept a :class:`Split`, a container directory, or a dataset directory plus split name."""
    if isinstance(source, Split):
        return source
    source = str(source)
    if split and os.path.isdir(os.path.join(source, split)):
        source = os.path.join(source, split)
    return read_container(source)


def write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_dict())


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def train(config, run_dir, data=None):
    """Train ``config`` and fill ``run_dir``.

    Args:
        config: :class:`TrainConfig` or a dict accepted by ``from_dict``.
        run_dir: output directory; created if needed.
        data: optional ``{split_name: Split}`` used instead of reading
            ``config.dataset`` from disk.

    Raises:
        ConfigurationError: data and model do not fit together; raised
            before any optimization step.
    """
    if isinstance(config, dict):
        config = TrainConfig.from_dict(config)
    data = data or {}
    t0 = time.perf_counter()
    train_split = data[config.train_split] if config.train_split in data else \
        load_split(config.dataset, config.train_split)
    X, y = train_split.arrays()
    os.makedirs(run_dir, exist_ok=True)
    resolved = config.to_dict()
    resolved["model"] = normalize_preset_name(config.model)
    resolved["dataset_config"] = train_split.config
    _write_json(os.path.join(run_dir, CONFIG_FILE), resolved)

    model = config.estimator().fit(X, y)
    ckpt = os.path.join(run_dir, CHECKPOINT_FILE)
    model.save(ckpt, extra={"train_config": resolved})
    rows = list(model.history_)
    evaluations = {}
    for name in config.eval_splits:
        split = data[name] if name in data else load_split(config.dataset, name)
        Xe, ye = split.arrays()
        row = model.evaluate(Xe, ye, split=name)
        evaluations[name] = row
        rows.append(row)
    write_metrics(os.path.join(run_dir, METRICS_FILE), rows)
    summary = {
        "run": config.run_id,
        "model": resolved["model"],
        "best_epoch": model.best_epoch_,
        "best_validation_metric": model.best_score_,
        "n_parameters": model.network_.n_parameters(),
        "evaluations": {k: v.to_dict() for k, v in evaluations.items()},
        "seconds": time.perf_counter() - t0,
    }
    _write_json(os.path.join(run_dir, RESULTS_FILE), summary)
    return RunResult(run_dir, ckpt, model.history_, evaluations, summary)


def evaluate(checkpoint, split, split_name=None):
    """Eval-mode loss and accuracy (or mAP) of a saved model on one split.

    ``split`` is a :class:`Split` or a container path.

    Raises:
        LoadError: the checkpoint is unreadable or corrupt.
        ConfigurationError: the split does not match the model's input.
    """
    model = VideoClassifier.load(checkpoint)
    split = load_split(split)
    X, y = split.arrays()
    return model.evaluate(X, y, split=split_name or split.name)
