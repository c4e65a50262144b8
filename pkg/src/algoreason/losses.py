"""Per-feature-kind training losses on raw decoder outputs.

scalar -> mean squared error; mask -> element-wise binary cross-entropy on
logits; mask_one / categorical / pointer -> softmax cross-entropy over the
last axis (averaged over any leading axes). All log-sum-exps are shifted by
the row max so losses stay finite for any finite logits.
"""

import numpy as np

from .autodiff import Tensor, _acc, _make


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _as_one_hot(target: np.ndarray, pred_shape: tuple[int, ...]) -> np.ndarray:
    target = np.asarray(target)
    if target.shape == pred_shape:
        return target.astype(np.float64)
    if np.issubdtype(target.dtype, np.integer) and target.shape == pred_shape[:-1]:
        one_hot = np.zeros(pred_shape)
        np.put_along_axis(one_hot, target[..., None], 1.0, axis=-1)
        return one_hot
    raise ValueError(f"target shape {target.shape} incompatible with logits {pred_shape}")


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    target = np.asarray(target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ValueError(f"mse target shape {target.shape} vs {pred.shape}")
    diff = pred.data - target
    count = max(diff.size, 1)

    def backward(g):
        _acc(pred, g * 2.0 * diff / count)

    return _make(np.mean(diff * diff) if diff.size else 0.0, (pred,), backward)


def bce_logits_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    target = np.asarray(target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ValueError(f"bce target shape {target.shape} vs {pred.shape}")
    z = pred.data
    # softplus(z) - z*t, computed as max(z,0) - z*t + log1p(exp(-|z|))
    loss = np.maximum(z, 0.0) - z * target + np.log1p(np.exp(-np.abs(z)))
    count = max(z.size, 1)
    sig = 1.0 / (1.0 + np.exp(-np.abs(z)))
    sig = np.where(z >= 0, sig, 1.0 - sig)

    def backward(g):
        _acc(pred, g * (sig - target) / count)

    return _make(loss.mean(), (pred,), backward)


def softmax_ce_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Cross-entropy of the last axis against a one-hot (or index) target."""
    one_hot = _as_one_hot(target, pred.shape)
    log_probs = _log_softmax(pred.data)
    rows = max(int(np.prod(pred.shape[:-1])), 1)

    def backward(g):
        _acc(pred, g * (_softmax(pred.data) - one_hot) / rows)

    return _make(-(one_hot * log_probs).sum() / rows, (pred,), backward)


def loss_by_kind(kind: str, pred: Tensor, target: np.ndarray) -> Tensor:
    if kind == "scalar":
        return mse_loss(pred, target)
    if kind == "mask":
        return bce_logits_loss(pred, target)
    if kind in ("mask_one", "categorical", "pointer"):
        return softmax_ce_loss(pred, target)
    raise ValueError(f"no loss for feature kind {kind!r}")
