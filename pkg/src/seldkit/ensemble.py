"""Class- and model-wise weighted averaging of DOA vector sequences.

Weights form an (n_classes, n_models) array fitted by minibatch gradient
descent on validation MSE; classes decouple, so each row is an independent
least-squares problem.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class EnsembleWeights:
    """(n_classes, n_models) combination weights; unconstrained."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.ndim != 2:
            raise ValueError(f"expected (n_classes, n_models), got {self.w.shape}")
        if not np.all(np.isfinite(self.w)):
            raise ValueError("non-finite weights")

    @property
    def n_classes(self) -> int:
        return self.w.shape[0]

    @property
    def n_models(self) -> int:
        return self.w.shape[1]


def _stack_outputs(outputs) -> np.ndarray:
    arrs = [np.asarray(o, dtype=float) for o in outputs]
    shape = arrs[0].shape
    for a in arrs:
        if a.shape != shape:
            raise ValueError(f"output shapes differ: {a.shape} vs {shape}")
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"expected (T, N, 3) outputs, got {a.shape}")
    return np.stack(arrs)


def combine(outputs, weights: EnsembleWeights) -> np.ndarray:
    """result[t, c] = sum_m w[c, m] * outputs[m][t, c]."""
    stacked = _stack_outputs(outputs)
    if stacked.shape[2] != weights.n_classes or stacked.shape[0] != weights.n_models:
        raise ValueError(
            f"weights {weights.w.shape} incompatible with {stacked.shape[0]} models "
            f"x {stacked.shape[2]} classes"
        )
    return np.einsum("mtnc,nm->tnc", stacked, weights.w)


def ensemble_mse(outputs, weights: EnsembleWeights, targets: np.ndarray) -> float:
    diff = combine(outputs, weights) - np.asarray(targets, dtype=float)
    return float(np.mean(diff * diff))


def fit_weights(
    outputs,
    targets: np.ndarray,
    lr: float = 0.1,
    iters: int = 2000,
    batch: int = 0,
    seed: int = 0,
    record_every: int = 0,
):
    """Fit combination weights by minibatch gradient descent on MSE.

    Weights start at 1/n_models.  `batch` counts label frames per step; 0
    uses the full validation set (deterministic gradient descent).  When
    `record_every` > 0, returns (weights, [(iteration, full-set MSE), ...]).
    """
    stacked = _stack_outputs(outputs)          # (M, T, N, 3)
    targets = np.asarray(targets, dtype=float)
    if targets.shape != stacked.shape[1:]:
        raise ValueError(f"target shape {targets.shape} != output shape {stacked.shape[1:]}")
    n_models, n_t, n_classes, _ = stacked.shape
    # per class: design matrix (T*3, M) against flattened targets
    a = stacked.transpose(2, 1, 3, 0).reshape(n_classes, n_t * 3, n_models)
    y = targets.transpose(1, 0, 2).reshape(n_classes, n_t * 3)
    w = np.full((n_classes, n_models), 1.0 / n_models)
    rng = np.random.default_rng(seed)
    n_samples = a.shape[1]
    history = []
    for it in range(iters):
        if batch and batch * 3 < n_samples:
            idx = rng.integers(0, n_samples, size=batch * 3)
            ab, yb = a[:, idx, :], y[:, idx]
        else:
            ab, yb = a, y
        resid = np.einsum("nsm,nm->ns", ab, w) - yb
        grad = 2.0 * np.einsum("nsm,ns->nm", ab, resid) / ab.shape[1]
        w -= lr * grad
        if record_every and ((it + 1) % record_every == 0 or it + 1 == iters):
            full = np.einsum("nsm,nm->ns", a, w) - y
            history.append((it + 1, float(np.mean(full * full))))
    weights = EnsembleWeights(w)
    return (weights, history) if record_every else weights


def write_weights_csv(path, weights: EnsembleWeights) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class_id"] + [f"model_{m}" for m in range(weights.n_models)])
        for c in range(weights.n_classes):
            writer.writerow([c] + [repr(float(v)) for v in weights.w[c]])


def read_weights_csv(path) -> EnsembleWeights:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][0] != "class_id":
        raise ValueError(f"{path}: not a weights file")
    data = sorted((int(r[0]), [float(v) for v in r[1:]]) for r in rows[1:] if r)
    return EnsembleWeights(np.array([vals for _, vals in data]))
