"""Scalar losses with analytic gradients w.r.t. the predictions."""

from dataclasses import dataclass

import numpy as np

from .layers import ConfigError


@dataclass
class LossValue:
    value: float
    grad: np.ndarray


def mse(pred, target):
    """Mean over all elements of the squared componentwise difference."""
    if pred.shape != target.shape:
        raise ConfigError(f"mse: shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return LossValue(float(np.mean(diff * diff)), (2.0 / diff.size) * diff)


def cross_entropy(logits, labels):
    """Softmax cross-entropy, averaged over the batch; labels are class ints."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ConfigError(f"cross_entropy: expected {n} labels, got {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ConfigError(f"cross_entropy: label out of range [0,{k})")
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=1, keepdims=True)
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + 1e-300)))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return LossValue(loss, grad / n)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)
