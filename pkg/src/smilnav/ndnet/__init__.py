from .layers import (
    AvgPool2d,
    ConfigError,
    Conv2d,
    Dropout,
    Flatten,
    FullyConnected,
    Identity,
    Layer,
    Net,
    Param,
    ReLU,
    MaxPool2d,
    Trace,
    UsageError,
)
from .losses import LossValue, cross_entropy, mse
from .optim import TrainingError, sgd_step
from .checkpoint import MAGIC, load_checkpoint, save_checkpoint

__all__ = [
    "AvgPool2d",
    "ConfigError",
    "Conv2d",
    "Dropout",
    "Flatten",
    "FullyConnected",
    "Identity",
    "Layer",
    "LossValue",
    "MAGIC",
    "MaxPool2d",
    "Net",
    "Param",
    "ReLU",
    "Trace",
    "TrainingError",
    "UsageError",
    "cross_entropy",
    "load_checkpoint",
    "mse",
    "save_checkpoint",
    "sgd_step",
]
