"""Training losses; each returns (value, gradient w.r.t. the prediction)."""

from __future__ import annotations

import numpy as np

_CLAMP = 1e-7


def loss_mse(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over all cells."""
    diff = pred - target
    n = diff.size
    return float(np.mean(diff * diff)), (2.0 / n) * diff


def loss_bce(pred: np.ndarray, target: np.ndarray):
    """Mean binary cross entropy on probabilities.

    Probabilities are clamped to [1e-7, 1 - 1e-7]; the gradient is zero
    where the clamp is active.
    """
    p = np.clip(pred, _CLAMP, 1.0 - _CLAMP)
    n = p.size
    value = float(-np.mean(target * np.log(p) + (1.0 - target) * np.log1p(-p)))
    inside = (pred > _CLAMP) & (pred < 1.0 - _CLAMP)
    grad = np.where(inside, (p - target) / (p * (1.0 - p)), 0.0) / n
    return value, grad.astype(pred.dtype)


def loss_masked_mse(pred: np.ndarray, target: np.ndarray, mask: np.ndarray):
    """MSE restricted to active cells.

    `mask` has one entry per (frame, class) and broadcasts over the vector
    components; the sum of squared differences is divided by the number of
    unmasked cells, max(sum(mask_broadcast), 1).
    """
    m = np.broadcast_to(np.asarray(mask)[..., None], pred.shape)
    denom = max(float(m.sum()), 1.0)
    diff = pred - target
    value = float(np.sum(m * diff * diff) / denom)
    return value, (2.0 / denom) * m * diff
