"""Policy architectures: shared multi-headed, independent multi-headed, plain.

All three share the trainable conv feature extractor. Each task head is a
three-layer fully connected branch; in shared mode the second-layer
activations of every head are summed (the addition operation) and the task
embedding routes that sum to the selected head's final layer (the switch
operation). The plain baseline is a single task-agnostic head.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ndnet
from .ndnet import (
    AvgPool2d,
    ConfigError,
    Conv2d,
    Dropout,
    Flatten,
    FullyConnected,
    Net,
    ReLU,
    cross_entropy,
    mse,
)
from .ndnet.losses import softmax

TASKS = ("traverse_hallway", "traverse_classroom", "to_classroom", "to_hallway")
ENV_LABELS = ("hallway", "classroom")

SHARE_MODES = ("shared", "independent", "plain")


class InputError(Exception):
    """Invalid runtime input (e.g. malformed task embedding)."""


def one_hot(task_id):
    v = np.zeros(len(TASKS), dtype=np.float64)
    v[task_id] = 1.0
    return v


def task_from_embedding(t):
    t = np.asarray(t)
    if t.shape != (len(TASKS),) or np.count_nonzero(t == 1.0) != 1 or np.count_nonzero(t) != 1:
        raise InputError(f"task embedding must be one-hot over {len(TASKS)} tasks, got {t!r}")
    return int(np.argmax(t))


@dataclass
class PolicyConfig:
    share_mode: str = "shared"
    image_shape: tuple = (3, 48, 64)
    conv_channels: tuple = (12, 24, 48)
    feature_dim: int = 128
    hidden_dims: tuple = (64, 64)
    dropout_keep: float = 0.8
    use_dropout: bool = True
    env_head: bool = True
    aux_weight: float = 0.5
    dtype: str = "float32"

    def __post_init__(self):
        if self.share_mode not in SHARE_MODES:
            raise ConfigError(f"unknown share_mode {self.share_mode!r}")

    @property
    def n_heads(self):
        return 1 if self.share_mode == "plain" else len(TASKS)

    def to_dict(self):
        d = self.__dict__.copy()
        d["image_shape"] = list(self.image_shape)
        d["conv_channels"] = list(self.conv_channels)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("image_shape", "conv_channels", "hidden_dims"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class PolicyTrace:
    """Caches from one full forward pass, consumable once by backward."""

    __slots__ = (
        "features_trace",
        "trunk_traces",
        "final_caches",
        "head_rows",
        "env_cache",
        "features",
        "raw_actions",
        "env_logits",
        "task_ids",
        "mode",
        "used",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw.get(k))
        self.used = False


class SmilPolicy:
    def __init__(self, config: PolicyConfig, rng):
        self.config = config
        dtype = np.dtype(config.dtype).type
        c, h, w = config.image_shape
        chans = list(config.conv_channels) + [config.feature_dim]
        layers = []
        cin = c
        for i, cout in enumerate(chans):
            layers.append(Conv2d(cin, cout, 3, 2, rng, name=f"ext.c{i + 1}", dtype=dtype))
            layers.append(ReLU())
            cin = cout
        pool_shape = Net(layers).out_shape((c, h, w))
        layers.append(AvgPool2d(pool_shape[1:]))
        layers.append(Flatten())
        self.extractor = Net(layers, name="extractor")
        if self.extractor.out_shape((c, h, w)) != (config.feature_dim,):
            raise ConfigError("extractor output does not match feature_dim")

        d = config.feature_dim
        d1, d2 = config.hidden_dims
        self.trunks = []
        self.finals = []
        for i in range(config.n_heads):
            t = [FullyConnected(d, d1, rng, name=f"head{i}.fc1", dtype=dtype), ReLU()]
            if config.use_dropout:
                t.append(Dropout(config.dropout_keep, name=f"head{i}.drop1"))
            t.append(FullyConnected(d1, d2, rng, name=f"head{i}.fc2", dtype=dtype))
            t.append(ReLU())
            if config.use_dropout:
                t.append(Dropout(config.dropout_keep, name=f"head{i}.drop2"))
            self.trunks.append(Net(t, name=f"head{i}.trunk"))
            self.finals.append(FullyConnected(d2, 2, rng, name=f"head{i}.out", dtype=dtype))
        self.env_fc = FullyConnected(d, 2, rng, name="env.out", dtype=dtype) if config.env_head else None

    def params(self):
        out = list(self.extractor.params())
        for t in self.trunks:
            out.extend(t.params())
        for f in self.finals:
            out.extend(f.params())
        if self.env_fc is not None:
            out.extend(self.env_fc.params())
        return out

    def zero_grads(self):
        for p in self.params():
            p.grad[...] = 0

    # ---- forward ----

    def extract_features(self, images, mode="infer", rng=None):
        if images.shape[1:] != self.config.image_shape:
            raise ConfigError(
                f"extractor expects images of shape {self.config.image_shape}, got {images.shape[1:]}"
            )
        return self.extractor.forward(images, mode, rng)

    def forward(self, images, task_ids, mode="infer", rng=None):
        """Full pass: images + integer task ids -> raw actions (+ env logits)."""
        ft = self.extract_features(images, mode, rng)
        return self._heads_forward(ft, np.asarray(task_ids), mode, rng)

    def policy_forward(self, features_trace, embedding, mode="infer", rng=None):
        """Heads-only pass from extracted features and one-hot embeddings."""
        emb = np.atleast_2d(np.asarray(embedding))
        task_ids = np.array([task_from_embedding(row) for row in emb])
        return self._heads_forward(features_trace, task_ids, mode, rng)

    def _heads_forward(self, features_trace, task_ids, mode, rng):
        f = features_trace.output
        n = f.shape[0]
        cfg = self.config
        if cfg.share_mode == "plain":
            task_ids = np.zeros(n, dtype=int)
        elif task_ids.shape != (n,) or task_ids.min() < 0 or task_ids.max() >= len(TASKS):
            raise InputError(f"need one task id per sample in [0,{len(TASKS)}), got {task_ids!r}")

        trunk_traces = [t.forward(f, mode, rng) for t in self.trunks]
        if cfg.share_mode == "shared":
            j = trunk_traces[0].output.copy()
            for t in trunk_traces[1:]:
                j += t.output
        elif cfg.share_mode == "independent":
            j = np.empty_like(trunk_traces[0].output)
            for i, t in enumerate(trunk_traces):
                rows = task_ids == i
                j[rows] = t.output[rows]
        else:
            j = trunk_traces[0].output

        raw = np.empty((n, 2), dtype=j.dtype)
        final_caches = [None] * len(self.finals)
        head_rows = [None] * len(self.finals)
        for i, fc in enumerate(self.finals):
            rows = np.nonzero(task_ids == i)[0]
            head_rows[i] = rows
            if rows.size == 0:
                continue
            y, cache = fc.forward(j[rows], mode, rng)
            raw[rows] = y
            final_caches[i] = cache

        env_logits, env_cache = (None, None)
        if self.env_fc is not None:
            env_logits, env_cache = self.env_fc.forward(f, mode, rng)

        return PolicyTrace(
            features_trace=features_trace,
            trunk_traces=trunk_traces,
            final_caches=final_caches,
            head_rows=head_rows,
            env_cache=env_cache,
            features=f,
            raw_actions=raw,
            env_logits=env_logits,
            task_ids=task_ids,
            mode=mode,
        )

    @staticmethod
    def actions(trace):
        """Deployable actions: raw output clamped into the action box."""
        return np.clip(trace.raw_actions, -1.0, 1.0)

    def act(self, image, embedding):
        """Single-observation inference; returns a clamped 2-vector."""
        trace = self.extract_features(image[None], "infer")
        out = self.policy_forward(trace, np.atleast_2d(embedding), "infer")
        return self.actions(out)[0]

    def predict_env(self, images):
        """Environment-class probabilities for a batch of images."""
        if self.env_fc is None:
            raise ConfigError("environment head is disabled in this configuration")
        ft = self.extract_features(images, "infer")
        logits, _ = self.env_fc.forward(ft.output, "infer", None)
        return softmax(logits)

    # ---- backward ----

    def backward(self, trace, d_raw_actions, d_env_logits=None):
        if trace.used:
            raise ndnet.UsageError("policy trace already consumed; re-run forward first")
        trace.used = True
        cfg = self.config
        d2 = cfg.hidden_dims[1]
        n = trace.raw_actions.shape[0]
        dj = np.zeros((n, d2), dtype=trace.raw_actions.dtype)
        for i, fc in enumerate(self.finals):
            rows = trace.head_rows[i]
            if rows is None or rows.size == 0:
                continue
            dj[rows] = fc.backward(d_raw_actions[rows], trace.final_caches[i])

        df = np.zeros_like(trace.features)
        if cfg.share_mode == "shared":
            for t, tt in zip(self.trunks, trace.trunk_traces):
                df += t.backward(tt, dj)
        elif cfg.share_mode == "independent":
            for i, (t, tt) in enumerate(zip(self.trunks, trace.trunk_traces)):
                masked = np.where((trace.task_ids == i)[:, None], dj, 0.0).astype(dj.dtype)
                df += t.backward(tt, masked)
        else:
            df += self.trunks[0].backward(trace.trunk_traces[0], dj)

        if d_env_logits is not None:
            if self.env_fc is None:
                raise ConfigError("environment gradient supplied but env head is disabled")
            df += self.env_fc.backward(d_env_logits, trace.env_cache)
        return self.extractor.backward(trace.features_trace, df)


@dataclass
class JointLoss:
    value: float
    control_mse: float
    env_ce: float
    d_pred: np.ndarray
    d_env: np.ndarray | None = field(default=None)


def joint_loss(pred, target, env_logits=None, env_labels=None, aux_weight=0.0):
    """Control regression plus weighted environment classification.

    loss = mse(pred, target) + aux_weight * cross_entropy(env_logits, labels);
    the auxiliary term drops out when the head is disabled or weight is 0.
    """
    control = mse(pred, target)
    if env_logits is None or aux_weight == 0.0:
        return JointLoss(control.value, control.value, 0.0, control.grad, None)
    aux = cross_entropy(env_logits, env_labels)
    return JointLoss(
        control.value + aux_weight * aux.value,
        control.value,
        aux.value,
        control.grad,
        aux_weight * aux.grad,
    )
