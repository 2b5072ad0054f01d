"""Adam with decoupled weight decay and a stepped learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    lr_decay: float = 0.9
    decay_interval: int = 20000
    weight_decay: float = 1e-6
    batch_size: int = 32
    input_frames: int = 1024
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        for name in ("lr", "lr_decay", "decay_interval", "batch_size", "input_frames"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def learning_rate(cfg: TrainConfig, iteration: int) -> float:
    """lr * decay^(iteration // decay_interval)."""
    return cfg.lr * cfg.lr_decay ** (iteration // cfg.decay_interval)


class Adam:
    """Standard Adam with bias correction; weight decay is applied as a
    separate lr * wd * param term, not folded into the gradient."""

    def __init__(self, params: dict, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict, iteration: int) -> None:
        cfg = self.cfg
        self.t += 1
        lr = learning_rate(cfg, iteration)
        b1c = 1.0 - cfg.beta1 ** self.t
        b2c = 1.0 - cfg.beta2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            update = (m / b1c) / (np.sqrt(v / b2c) + cfg.eps)
            p -= lr * update
            if cfg.weight_decay:
                p -= lr * cfg.weight_decay * p
