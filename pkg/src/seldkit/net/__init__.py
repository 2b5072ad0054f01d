"""Trainable model: layers, losses, optimizer, training loops, checkpoints."""

from .checkpoint import load_checkpoint, load_model, save_checkpoint, save_model
from .losses import loss_bce, loss_masked_mse, loss_mse
from .model import NetConfig, RD3NetLite, TwoStageNet
from .optim import Adam, TrainConfig, learning_rate
from .train import AugmentOptions, SceneBatchStream, train_single_stage, train_two_stage
