"""Trainable biaffine linker with structural auxiliary heads."""

from .losses import aux_losses, cross_entropy, link_loss, link_loss_grad, mtl_loss, mtl_sigma_grad
from .model import ForwardOutput, ModelConfig, backward, biaffine, forward, init_params
from .optim import AdamState, adam_step
from .train import (
    TrainResult,
    load_checkpoint,
    predict_trees,
    save_checkpoint,
    train,
)

__all__ = [
    "AdamState",
    "ForwardOutput",
    "ModelConfig",
    "TrainResult",
    "adam_step",
    "aux_losses",
    "backward",
    "biaffine",
    "cross_entropy",
    "forward",
    "init_params",
    "link_loss",
    "link_loss_grad",
    "load_checkpoint",
    "mtl_loss",
    "mtl_sigma_grad",
    "predict_trees",
    "save_checkpoint",
    "train",
]
