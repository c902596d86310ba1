"""Input checks shared by the estimator and the run helpers."""
import numpy as np
from sklearn.utils.validation import check_array

from ..exceptions import ConfigurationError


def check_videos(X, in_channels=None):
    """Return ``X`` as a finite float32 ``(N, C, T, H, W)`` array.

    A 4-D input ``(N, T, H, W)`` gains a singleton channel axis.
    """
    X = check_array(X, allow_nd=True, dtype=np.float32, ensure_2d=False)
    if X.ndim == 4:
        X = X[:, None]
    if X.ndim != 5:
        raise ConfigurationError(f"videos must be (N, C, T, H, W) or (N, T, H, W), got shape {X.shape}")
    if in_channels is not None and X.shape[1] != in_channels:
        raise ConfigurationError(f"videos have {X.shape[1]} channels, model expects {in_channels}")
    return X


def check_targets(y, loss, n_samples, n_classes=None):
    """Validate labels against the loss.

    ``softmax_ce`` needs integer class indices of shape ``(N,)``;
    ``sigmoid_bce`` needs a 0/1 matrix of shape ``(N, n_classes)``.
    """
    y = np.asarray(y)
    if len(y) != n_samples:
        raise ConfigurationError(f"{n_samples} videos but {len(y)} labels")
    if loss == "softmax_ce":
        if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
            if y.ndim == 1 and np.all(np.mod(y, 1) == 0):
                y = y.astype(np.int64)
            else:
                raise ConfigurationError("softmax_ce needs integer class labels of shape (N,)")
        if y.min() < 0 or (n_classes is not None and y.max() >= n_classes):
            raise ConfigurationError(f"labels must lie in [0, {n_classes}), got [{y.min()}, {y.max()}]")
        return y.astype(np.int64)
    if loss == "sigmoid_bce":
        if y.ndim != 2 or not np.isin(y, (0, 1)).all():
            raise ConfigurationError("sigmoid_bce needs a multi-hot 0/1 label matrix of shape (N, C)")
        if n_classes is not None and y.shape[1] != n_classes:
            raise ConfigurationError(f"label matrix has {y.shape[1]} columns, model has {n_classes} outputs")
        return y.astype(np.float32)
    raise ConfigurationError(f"unknown loss {loss!r}; choose 'softmax_ce' or 'sigmoid_bce'")
