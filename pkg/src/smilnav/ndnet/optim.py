"""Plain SGD with decoupled-from-bias weight decay."""

import numpy as np


class TrainingError(Exception):
    pass


def sgd_step(params, lr, weight_decay=0.0):
    """w <- w - lr * (g + wd * w); gradients are zeroed afterwards.

    Weight decay skips parameters flagged decay=False (biases).
    """
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in '{p.name}'")
        g = p.grad
        if weight_decay and p.decay:
            g = g + weight_decay * p.value
        p.value -= lr * g
        p.grad[...] = 0
