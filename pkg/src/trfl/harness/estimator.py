"""Scikit-learn style video classifier backed by :class:`trfl.nn.Network`."""
import copy
import logging
import time

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_is_fitted

from ..arch import ArchGraph, arch_from_config, build_preset, shape_inference
from ..exceptions import ConfigurationError, LoadError, NumericalError
from ..nn import (Network, cosine_lr, load_checkpoint, make_optimizer, save_checkpoint,
                  sigmoid_bce, softmax, softmax_cross_entropy)
from .metrics import MetricsRow, accuracy, mean_average_precision
from .validation import check_targets, check_videos

log = logging.getLogger(__name__)

LOSSES = ("softmax_ce", "sigmoid_bce")
CHECKPOINT_FORMAT = "trfl-video-classifier"


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


class VideoClassifier(BaseEstimator, ClassifierMixin):
    """3D convolutional video classifier trained from scratch.

    Parameters:
        arch: preset name (``"video_bagnet_9"``, ``"resnet50_3d"``...) or an
            :class:`ArchGraph` whose input channels and class count match
            the data.
        width: channel multiplier passed to the preset; ``None`` keeps the
            preset default.
        downsample_at: ``"mid_conv"`` or ``"bottleneck_entry"``; ``None``
            keeps the preset default.
        optimizer: ``"sgd"`` or ``"adam"``.
        lr, momentum, weight_decay: optimizer settings.
        schedule: ``"cosine"`` (per step, down to 0) or ``"constant"``.
        epochs, batch_size: loop length and minibatch size.
        loss: ``"softmax_ce"`` (integer labels) or ``"sigmoid_bce"``
            (multi-hot labels).
        validation_fraction: share of the training data held out, stratified
            for single-label data. Ignored when ``fit`` receives explicit
            validation data; ``0`` disables validation.
        restore_best: after fitting, reload the weights of the epoch with the
            best validation metric (earliest on ties).
        random_state: seeds initialization, the validation split and the
            batch order.
        run_id: label written into every :class:`MetricsRow`.
        eval_batch_size: minibatch size for inference.
        eval_every: validate every this many epochs (and after the last).
        fc_init: classifier initialization, ``"small"`` (std 0.01),
            ``"fan_in"`` (variance ``1 / features``) or ``"fan_out"``
            (variance ``2 / classes``). With three classes the last one
            starts training with class scores in the tens.
    """

    def __init__(self, arch="video_bagnet_9", width=None, downsample_at=None, optimizer="sgd",
                 lr=0.01, momentum=0.9, weight_decay=1e-4, schedule="cosine", epochs=10,
                 batch_size=8, loss="softmax_ce", validation_fraction=0.1, restore_best=True,
                 random_state=0, run_id="run", eval_batch_size=32, eval_every=1,
                 fc_init="small"):
        self.arch = arch
        self.width = width
        self.downsample_at = downsample_at
        self.optimizer = optimizer
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.schedule = schedule
        self.epochs = epochs
        self.batch_size = batch_size
        self.loss = loss
        self.validation_fraction = validation_fraction
        self.restore_best = restore_best
        self.random_state = random_state
        self.run_id = run_id
        self.eval_batch_size = eval_batch_size
        self.eval_every = eval_every
        self.fc_init = fc_init

    # ------------------------------------------------------------------ setup
    def _check_params(self):
        if self.loss not in LOSSES:
            raise ConfigurationError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if int(self.epochs) < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.schedule not in ("cosine", "constant"):
            raise ConfigurationError(f"schedule must be 'cosine' or 'constant', got {self.schedule!r}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigurationError(f"validation_fraction must lie in [0, 1), got {self.validation_fraction}")
        if int(self.eval_every) < 1:
            raise ConfigurationError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")

    def _build_arch(self, in_channels, n_classes):
        if isinstance(self.arch, ArchGraph):
            arch = self.arch
        elif isinstance(self.arch, dict):
            arch = arch_from_config(self.arch)
        else:
            arch = build_preset(self.arch, width=self.width, n_classes=n_classes,
                                in_channels=in_channels, downsample_at=self.downsample_at)
        if arch.source.out_channels != in_channels:
            raise ConfigurationError(
                f"architecture expects {arch.source.out_channels} input channels, data has {in_channels}")
        if arch.sink.out_channels != n_classes:
            raise ConfigurationError(
                f"architecture has {arch.sink.out_channels} outputs, data has {n_classes} classes")
        return arch

    def _loss(self, logits, y):
        if self.loss == "softmax_ce":
            return softmax_cross_entropy(logits, y)
        return sigmoid_bce(logits, y)

    def _metric(self, logits, y):
        if self.loss == "softmax_ce":
            return accuracy(logits, y)
        return mean_average_precision(logits, y)

    # -------------------------------------------------------------- training
    def fit(self, X, y, X_val=None, y_val=None):
        """Train on ``(X, y)``; see the class docstring for the recipe.

        Raises:
            ConfigurationError: data and model disagree on shape, channels
                or label type. Checked before the first step.
            NumericalError: the training loss became non-finite.
        """
        self._check_params()
        X = check_videos(X)
        if self.loss == "softmax_ce":
            y = check_targets(y, self.loss, len(X))
            n_classes = int(y.max()) + 1
            if isinstance(self.arch, ArchGraph):
                n_classes = self.arch.sink.out_channels
        else:
            y = check_targets(y, self.loss, len(X))
            n_classes = y.shape[1]
        arch = self._build_arch(X.shape[1], n_classes)
        y = check_targets(y, self.loss, len(X), n_classes)
        shape_inference(arch, X.shape[1:])

        if X_val is None and self.validation_fraction > 0:
            n_val = int(np.ceil(self.validation_fraction * len(X)))
            if n_val >= len(X):
                raise ConfigurationError(f"validation_fraction leaves no training data ({len(X)} videos)")
            stratify = None
            if self.loss == "softmax_ce" and n_val >= n_classes and len(X) - n_val >= n_classes \
                    and np.bincount(y).min() >= 2:
                stratify = y
            X, X_val, y, y_val = train_test_split(X, y, test_size=n_val,
                                                  random_state=self.random_state, stratify=stratify)
        elif X_val is not None:
            X_val = check_videos(X_val, X.shape[1])
            y_val = check_targets(y_val, self.loss, len(X_val), n_classes)

        self.arch_ = arch
        self.n_classes_ = n_classes
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        self.input_shape_ = tuple(X.shape[1:])
        self.network_ = Network(arch, seed=self.random_state, fc_init=self.fc_init)
        opt = make_optimizer(self.optimizer, self.network_.parameters(), self.lr,
                             momentum=self.momentum, weight_decay=self.weight_decay)
        rng = np.random.default_rng(self.random_state)
        bs = int(self.batch_size)
        steps_per_epoch = -(-len(X) // bs)
        total = steps_per_epoch * int(self.epochs)
        self.history_ = []
        self.step_losses_ = []
        best, best_state, self.best_epoch_ = -np.inf, None, int(self.epochs)
        for epoch in range(1, int(self.epochs) + 1):
            t0 = time.perf_counter()
            order = rng.permutation(len(X))
            loss_sum, hit_sum = 0.0, 0.0
            for start in range(0, len(X), bs):
                idx = np.sort(order[start:start + bs])
                if self.schedule == "cosine":
                    opt.lr = cosine_lr(self.lr, opt.step_count, total)
                self.network_.zero_grad()
                logits = self.network_.forward(X[idx], train=True)
                loss, grad = self._loss(logits, y[idx])
                if not np.isfinite(loss):
                    raise NumericalError(f"non-finite training loss at epoch {epoch}, step {opt.step_count}")
                self.network_.backward(grad.astype(logits.dtype, copy=False))
                opt.step()
                self.step_losses_.append(loss)
                loss_sum += loss * len(idx)
                if self.loss == "softmax_ce":
                    hit_sum += accuracy(logits, y[idx]) * len(idx)
            train_metric = hit_sum / len(X) if self.loss == "softmax_ce" else \
                self._metric(self.decision_function(X), y)
            self.history_.append(MetricsRow(self.run_id, epoch, "train", loss_sum / len(X),
                                            float(train_metric), time.perf_counter() - t0))
            due = epoch % int(self.eval_every) == 0 or epoch == int(self.epochs)
            if X_val is not None and due:
                row = self.evaluate(X_val, y_val, split="val", epoch=epoch)
                self.history_.append(row)
                score = row.metric
            elif X_val is None:
                score = train_metric
            else:
                score = -np.inf
            log.info("%s epoch %d: %s", self.run_id, epoch,
                     ", ".join(f"{r.split} loss {r.loss:.4f} metric {r.metric:.4f}"
                               for r in self.history_[-2:] if r.epoch == epoch))
            if score > best:
                best, self.best_epoch_ = score, epoch
                best_state = copy.deepcopy(self.network_.state_dict())
        self.best_score_ = float(best)
        if self.restore_best and best_state is not None:
            self.network_.load_state_dict(best_state)
        return self

    # ------------------------------------------------------------- inference
    def decision_function(self, X):
        """Raw class scores ``(N, n_classes)`` in eval mode."""
        check_is_fitted(self, "network_")
        X = check_videos(X, self.network_.in_channels)
        step = max(1, int(self.eval_batch_size))
        out = [self.network_.forward(X[i:i + step], train=False) for i in range(0, len(X), step)]
        logits = np.concatenate(out, axis=0)
        if not np.all(np.isfinite(logits)):
            raise NumericalError("non-finite class scores")
        return logits

    def predict_proba(self, X):
        logits = self.decision_function(X).astype(np.float64)
        return softmax(logits) if self.loss == "softmax_ce" else _sigmoid(logits)

    def predict(self, X):
        """Class index per video, or a 0/1 matrix for multi-label models."""
        logits = self.decision_function(X)
        if self.loss == "softmax_ce":
            return np.argmax(logits, axis=1)
        return (logits > 0).astype(np.int64)

    def score(self, X, y, sample_weight=None):
        """Top-1 accuracy, or mAP for multi-label models."""
        y = check_targets(y, self.loss, len(X), self.n_classes_)
        return self._metric(self.decision_function(X), y)

    def evaluate(self, X, y, split="test", epoch=None):
        """Eval-mode loss and metric on ``(X, y)`` as a :class:`MetricsRow`."""
        t0 = time.perf_counter()
        y = check_targets(y, self.loss, len(X), self.n_classes_)
        logits = self.decision_function(X)
        loss, _ = self._loss(logits.astype(np.float64), y)
        return MetricsRow(self.run_id, int(self.best_epoch_ if epoch is None else epoch), split,
                          float(loss), float(self._metric(logits, y)), time.perf_counter() - t0)

    # ------------------------------------------------------------ checkpoint
    def save(self, path, extra=None):
        """Write weights plus everything needed to rebuild the model."""
        check_is_fitted(self, "network_")
        params = self.get_params()
        if isinstance(params["arch"], ArchGraph):
            params["arch"] = params["arch"].to_dict()
        header = {"format": CHECKPOINT_FORMAT, "arch": self.arch_.to_dict(), "params": params,
                  "n_classes": self.n_classes_, "input_shape": list(self.input_shape_),
                  "best_epoch": self.best_epoch_}
        if extra:
            header["extra"] = extra
        save_checkpoint(path, self.network_.state_dict(), header)

    @classmethod
    def load(cls, path):
        """Rebuild a fitted classifier from :meth:`save` output.

        Raises:
            LoadError: unreadable or corrupt file, or a header that does not
                describe a video classifier.
        """
        header, tensors = load_checkpoint(path)
        if header.get("format") != CHECKPOINT_FORMAT:
            raise LoadError(f"{path}: not a video classifier checkpoint")
        try:
            arch = arch_from_config(header["arch"])
            model = cls(**header["params"])
            model.arch_ = arch
            model.n_classes_ = int(header["n_classes"])
            model.classes_ = np.arange(model.n_classes_)
            model.input_shape_ = tuple(header["input_shape"])
            model.n_features_in_ = int(np.prod(model.input_shape_))
            model.best_epoch_ = int(header["best_epoch"])
            model.network_ = Network(arch)
            model.network_.load_state_dict(tensors)
        except (KeyError, TypeError, ConfigurationError) as exc:
            raise LoadError(f"{path}: inconsistent checkpoint ({exc})") from exc
        model.header_ = header
        return model
