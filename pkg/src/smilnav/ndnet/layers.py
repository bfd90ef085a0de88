"""Layers, parameter storage, and the hand-wired forward/backward machinery.

Every layer is a pure shape transform: ``out_shape`` is computable without
running data, ``forward`` returns the output plus a cache, and ``backward``
consumes that cache exactly once. Parameter gradients accumulate into the
paired ``Param.grad`` buffers until the optimizer zeroes them.
"""

import numpy as np

from smilnav import _kernels


class ConfigError(Exception):
    """Layer/shape misconfiguration."""


class UsageError(Exception):
    """API misuse, e.g. reusing a consumed trace."""


class Param:
    """A named tensor with a same-shaped gradient buffer."""

    __slots__ = ("name", "value", "grad", "decay")

    def __init__(self, name, value, decay=True):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.decay = decay  # weight decay applies (off for biases)


class Layer:
    name = "layer"

    def params(self):
        return []

    def out_shape(self, in_shape):
        raise NotImplementedError

    def forward(self, x, mode, rng):
        raise NotImplementedError

    def backward(self, dy, cache):
        raise NotImplementedError


def he_init(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d(Layer):
    """Valid (no padding) 2D convolution via patch gather + GEMM."""

    def __init__(self, in_channels, out_channels, kernel, stride, rng, name="conv", bias=True, dtype=np.float32):
        kh, kw = kernel if isinstance(kernel, tuple) else (kernel, kernel)
        sh, sw = stride if isinstance(stride, tuple) else (stride, stride)
        self.name = name
        self.cin, self.cout = in_channels, out_channels
        self.kh, self.kw, self.sh, self.sw = kh, kw, sh, sw
        self.w = Param(f"{name}.w", he_init(rng, (out_channels, in_channels, kh, kw), in_channels * kh * kw, dtype))
        self.b = Param(f"{name}.b", np.zeros(out_channels, dtype=dtype), decay=False) if bias else None

    def params(self):
        return [self.w] + ([self.b] if self.b is not None else [])

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.cin:
            raise ConfigError(f"layer '{self.name}': expected input ({self.cin},H,W), got {in_shape}")
        c, h, w = in_shape
        if h < self.kh or w < self.kw:
            raise ConfigError(f"layer '{self.name}': input {h}x{w} smaller than kernel {self.kh}x{self.kw}")
        return (self.cout, (h - self.kh) // self.sh + 1, (w - self.kw) // self.sw + 1)

    def forward(self, x, mode, rng):
        _, oh, ow = self.out_shape(x.shape[1:])
        n = x.shape[0]
        cols = _kernels.im2col(np.ascontiguousarray(x), self.kh, self.kw, self.sh, self.sw)
        wmat = self.w.value.reshape(self.cout, -1)
        y = cols @ wmat.T
        if self.b is not None:
            y += self.b.value
        y = np.ascontiguousarray(y.reshape(n, oh, ow, self.cout).transpose(0, 3, 1, 2))
        return y, (x.shape, cols)

    def backward(self, dy, cache):
        x_shape, cols = cache
        n, _, h, w = x_shape
        dy_cols = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(-1, self.cout)
        self.w.grad += (dy_cols.T @ cols).reshape(self.w.value.shape)
        if self.b is not None:
            self.b.grad += dy_cols.sum(axis=0)
        dx_cols = np.ascontiguousarray(dy_cols @ self.w.value.reshape(self.cout, -1))
        return _kernels.col2im(dx_cols, n, self.cin, h, w, self.kh, self.kw, self.sh, self.sw)


class FullyConnected(Layer):
    def __init__(self, in_dim, out_dim, rng, name="fc", bias=True, dtype=np.float32):
        self.name = name
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w = Param(f"{name}.w", he_init(rng, (out_dim, in_dim), in_dim, dtype))
        self.b = Param(f"{name}.b", np.zeros(out_dim, dtype=dtype), decay=False) if bias else None

    def params(self):
        return [self.w] + ([self.b] if self.b is not None else [])

    def out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.in_dim:
            raise ConfigError(f"layer '{self.name}': expected input ({self.in_dim},), got {in_shape}")
        return (self.out_dim,)

    def forward(self, x, mode, rng):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ConfigError(f"layer '{self.name}': expected (N,{self.in_dim}), got {x.shape}")
        y = x @ self.w.value.T
        if self.b is not None:
            y += self.b.value
        return y, x

    def backward(self, dy, cache):
        x = cache
        self.w.grad += dy.T @ x
        if self.b is not None:
            self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value


class ReLU(Layer):
    def __init__(self, name="relu"):
        self.name = name

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, mode, rng):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, cache):
        return dy * cache


class Identity(Layer):
    def __init__(self, name="identity"):
        self.name = name

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, mode, rng):
        return x, None

    def backward(self, dy, cache):
        return dy


class Dropout(Layer):
    """Inverted dropout: train-time scaling by 1/keep, no-op at inference."""

    def __init__(self, keep, name="dropout"):
        if not 0.0 < keep <= 1.0:
            raise ConfigError(f"layer '{name}': keep rate must be in (0,1], got {keep}")
        self.name = name
        self.keep = keep

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, mode, rng):
        if mode != "train" or self.keep >= 1.0:
            return x, None
        if rng is None:
            raise UsageError(f"layer '{self.name}': train-mode forward requires an rng")
        mask = (rng.random(x.shape) < self.keep).astype(x.dtype) / self.keep
        return x * mask, mask

    def backward(self, dy, cache):
        if cache is None:
            return dy
        return dy * cache


class Flatten(Layer):
    def __init__(self, name="flatten"):
        self.name = name

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, mode, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache)


class _Pool2d(Layer):
    def __init__(self, kernel, stride, name):
        kh, kw = kernel if isinstance(kernel, tuple) else (kernel, kernel)
        if stride is None:
            sh, sw = kh, kw
        else:
            sh, sw = stride if isinstance(stride, tuple) else (stride, stride)
        self.name = name
        self.kh, self.kw, self.sh, self.sw = kh, kw, sh, sw

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ConfigError(f"layer '{self.name}': expected (C,H,W), got {in_shape}")
        c, h, w = in_shape
        if h < self.kh or w < self.kw:
            raise ConfigError(f"layer '{self.name}': input {h}x{w} smaller than window {self.kh}x{self.kw}")
        return (c, (h - self.kh) // self.sh + 1, (w - self.kw) // self.sw + 1)

    def _cols(self, x):
        n, c, h, w = x.shape
        flat = np.ascontiguousarray(x.reshape(n * c, 1, h, w))
        return _kernels.im2col(flat, self.kh, self.kw, self.sh, self.sw)


class MaxPool2d(_Pool2d):
    def __init__(self, kernel, stride=None, name="maxpool"):
        super().__init__(kernel, stride, name)

    def forward(self, x, mode, rng):
        n, c, h, w = x.shape
        _, oh, ow = self.out_shape(x.shape[1:])
        cols = self._cols(x)
        arg = cols.argmax(axis=1)
        y = cols[np.arange(cols.shape[0]), arg].reshape(n, c, oh, ow)
        return y, (x.shape, arg)

    def backward(self, dy, cache):
        x_shape, arg = cache
        n, c, h, w = x_shape
        cols = np.zeros((arg.shape[0], self.kh * self.kw), dtype=dy.dtype)
        cols[np.arange(arg.shape[0]), arg] = dy.reshape(-1)
        dx = _kernels.col2im(cols, n * c, 1, h, w, self.kh, self.kw, self.sh, self.sw)
        return dx.reshape(x_shape)


class AvgPool2d(_Pool2d):
    def __init__(self, kernel, stride=None, name="avgpool"):
        super().__init__(kernel, stride, name)

    def forward(self, x, mode, rng):
        n, c, h, w = x.shape
        _, oh, ow = self.out_shape(x.shape[1:])
        cols = self._cols(x)
        y = cols.mean(axis=1).reshape(n, c, oh, ow)
        return y, x.shape

    def backward(self, dy, cache):
        x_shape = cache
        n, c, h, w = x_shape
        k = self.kh * self.kw
        cols = np.repeat(dy.reshape(-1, 1) / k, k, axis=1).astype(dy.dtype)
        dx = _kernels.col2im(cols, n * c, 1, h, w, self.kh, self.kw, self.sh, self.sw)
        return dx.reshape(x_shape)


class Trace:
    """Per-layer caches from one forward pass; consumable exactly once."""

    __slots__ = ("output", "caches", "mode", "used")

    def __init__(self, output, caches, mode):
        self.output = output
        self.caches = caches
        self.mode = mode
        self.used = False


class Net:
    """A fixed sequence of layers with explicit forward/backward."""

    def __init__(self, layers, name="net"):
        self.layers = list(layers)
        self.name = name

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def zero_grads(self):
        for p in self.params():
            p.grad[...] = 0

    def out_shape(self, in_shape):
        shape = tuple(in_shape)
        for layer in self.layers:
            shape = layer.out_shape(shape)
        return shape

    def forward(self, x, mode="infer", rng=None):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, mode, rng)
            caches.append(cache)
        return Trace(x, caches, mode)

    def backward(self, trace, dy):
        if trace.used:
            raise UsageError(f"net '{self.name}': trace already consumed; re-run forward first")
        trace.used = True
        for layer, cache in zip(reversed(self.layers), reversed(trace.caches)):
            dy = layer.backward(dy, cache)
        return dy
