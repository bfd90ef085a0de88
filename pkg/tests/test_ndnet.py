import numpy as np
import pytest
from _oracles import fd_grad, max_rel_err

from smilnav import ndnet
from smilnav.ndnet import (
    AvgPool2d,
    ConfigError,
    Conv2d,
    Dropout,
    Flatten,
    FullyConnected,
    Identity,
    MaxPool2d,
    Net,
    ReLU,
    TrainingError,
    UsageError,
    cross_entropy,
    mse,
    sgd_step,
)
from smilnav.ndnet.checkpoint import CheckpointError, load_checkpoint, save_checkpoint

F64 = np.float64


def test_identity_passthrough():
    net = Net([Identity()])
    v = np.array([[1.0, -2.0, 3.5]])
    trace = net.forward(v)
    np.testing.assert_array_equal(trace.output, v)


def test_relu_definition():
    y, _ = ReLU().forward(np.array([[-1.0, 0.0, 2.0]]), "infer", None)
    np.testing.assert_array_equal(y, [[0.0, 0.0, 2.0]])


def test_dropout_mask_statistics():
    # inverted dropout at keep=0.8: ~20% zeros, survivors scaled by 1/0.8
    rng = np.random.default_rng(7)
    x = np.ones((1, 100_000))
    y, _ = Dropout(0.8).forward(x, "train", rng)
    zeros = np.count_nonzero(y == 0)
    n, p = x.size, 0.2
    sigma = np.sqrt(n * p * (1 - p))
    assert abs(zeros - n * p) < 4 * sigma
    survivors = y[y != 0]
    np.testing.assert_allclose(survivors, 1.0 / 0.8)


def test_dropout_preserves_expectation():
    rng = np.random.default_rng(8)
    x = np.full((1, 200), 2.0)
    layer = Dropout(0.8)
    acc = np.zeros_like(x)
    trials = 4000
    for _ in range(trials):
        y, _ = layer.forward(x, "train", rng)
        acc += y
    infer_y, _ = layer.forward(x, "infer", None)
    np.testing.assert_allclose((acc / trials).mean(), infer_y.mean(), rtol=0.01)


def test_dropout_infer_noop_and_train_needs_rng():
    x = np.ones((2, 4))
    y, _ = Dropout(0.5).forward(x, "infer", None)
    np.testing.assert_array_equal(y, x)
    with pytest.raises(UsageError):
        Dropout(0.5).forward(x, "train", None)


def _loss_through(net, x, target, seed=None):
    def run():
        rng = np.random.default_rng(seed) if seed is not None else None
        trace = net.forward(x, "train", rng)
        return mse(trace.output, target).value

    return run


def _check_net_grads(net, x, seed=None, tol=1e-4):
    rng = np.random.default_rng(seed) if seed is not None else None
    trace = net.forward(x, "train", rng)
    target = np.zeros_like(trace.output)
    loss = mse(trace.output, target)
    net.zero_grads()
    dx = net.backward(trace, loss.grad)

    run = _loss_through(net, x, target, seed)
    for p in net.params():
        numeric = fd_grad(run, p.value)
        assert max_rel_err(p.grad, numeric) < tol, p.name
    numeric_dx = fd_grad(run, x)
    assert max_rel_err(dx, numeric_dx) < tol


LAYER_CASES = {
    "conv2d": lambda rng: (Net([Conv2d(2, 3, 3, 2, rng, dtype=F64)]), (2, 2, 9, 11), None),
    "fully-connected": lambda rng: (Net([FullyConnected(5, 4, rng, dtype=F64)]), (3, 5), None),
    "relu": lambda rng: (Net([FullyConnected(4, 4, rng, dtype=F64), ReLU()]), (3, 4), None),
    "identity": lambda rng: (Net([FullyConnected(4, 2, rng, dtype=F64), Identity()]), (3, 4), None),
    "maxpool": lambda rng: (Net([MaxPool2d(2)]), (2, 2, 6, 8), None),
    "avgpool": lambda rng: (Net([AvgPool2d((2, 3))]), (2, 2, 6, 9), None),
    "flatten": lambda rng: (Net([Flatten(), FullyConnected(12, 3, rng, dtype=F64)]), (2, 3, 2, 2), None),
    "dropout": lambda rng: (Net([Dropout(0.7)]), (2, 10), 123),
}


@pytest.mark.parametrize("kind", sorted(LAYER_CASES))
def test_gradcheck_each_layer_kind(kind):
    rng = np.random.default_rng(11)
    net, xshape, seed = LAYER_CASES[kind](rng)
    x = rng.standard_normal(xshape)
    _check_net_grads(net, x, seed=seed)


def test_gradcheck_composed_stack():
    rng = np.random.default_rng(13)
    net = Net(
        [
            Conv2d(1, 2, 3, 2, rng, name="c1", dtype=F64),
            ReLU(),
            Conv2d(2, 3, 3, 2, rng, name="c2", dtype=F64),
            ReLU(),
            AvgPool2d((2, 3)),
            Flatten(),
            FullyConnected(3, 4, rng, name="f1", dtype=F64),
            ReLU(),
            Dropout(0.8, name="d1"),
            FullyConnected(4, 2, rng, name="f2", dtype=F64),
        ]
    )
    x = rng.standard_normal((2, 1, 13, 17))
    _check_net_grads(net, x, seed=99)


def test_fc_mse_closed_form():
    # out_dim 1: dL/dW = 2 (w x - y) x^T / batch, bias-free
    rng = np.random.default_rng(17)
    layer = FullyConnected(4, 1, rng, bias=False, dtype=F64)
    net = Net([layer])
    x = rng.standard_normal((6, 4))
    y = rng.standard_normal((6, 1))
    trace = net.forward(x, "train")
    loss = mse(trace.output, y)
    net.backward(trace, loss.grad)
    expected = 2.0 * (x @ layer.w.value.T - y).T @ x / x.shape[0]
    np.testing.assert_allclose(layer.w.grad, expected, rtol=1e-12)


def test_zero_output_gradient_gives_zero_param_grads():
    rng = np.random.default_rng(19)
    net = Net([FullyConnected(3, 2, rng, dtype=F64), ReLU()])
    trace = net.forward(rng.standard_normal((4, 3)), "train")
    net.backward(trace, np.zeros_like(trace.output))
    for p in net.params():
        assert not p.grad.any()


def test_backward_twice_raises():
    rng = np.random.default_rng(23)
    net = Net([FullyConnected(3, 2, rng)])
    trace = net.forward(rng.standard_normal((2, 3)).astype(np.float32), "train")
    net.backward(trace, np.ones_like(trace.output))
    with pytest.raises(UsageError):
        net.backward(trace, np.ones_like(trace.output))


def test_shape_mismatch_names_layer():
    rng = np.random.default_rng(29)
    net = Net([Conv2d(3, 4, 3, 2, rng, name="stem")])
    with pytest.raises(ConfigError, match="stem"):
        net.forward(np.zeros((1, 2, 8, 8), dtype=np.float32), "infer")


def test_out_shape_matches_forward():
    rng = np.random.default_rng(31)
    net = Net(
        [
            Conv2d(3, 4, 3, 2, rng),
            ReLU(),
            MaxPool2d(2),
            Conv2d(4, 6, 3, 1, rng, name="c2"),
            AvgPool2d((2, 2)),
            Flatten(),
            FullyConnected(6 * 1 * 2, 5, rng),
        ]
    )
    in_shape = (3, 24, 31)
    inferred = net.out_shape(in_shape)
    trace = net.forward(np.zeros((2, *in_shape), dtype=np.float32))
    assert trace.output.shape == (2, *inferred)


def test_infer_mode_deterministic():
    rng = np.random.default_rng(37)
    net = Net([Conv2d(1, 2, 3, 2, rng), ReLU(), Flatten(), FullyConnected(2 * 3 * 3, 2, rng), Dropout(0.5)])
    x = rng.standard_normal((1, 1, 8, 8)).astype(np.float32)
    a = net.forward(x).output
    b = net.forward(x).output
    np.testing.assert_array_equal(a, b)


def test_sgd_examples():
    p = ndnet.Param("w", np.array([1.0]))
    p.grad[...] = 1.0
    sgd_step([p], lr=0.01)
    np.testing.assert_allclose(p.value, [0.99])

    p = ndnet.Param("w", np.array([2.0]))
    sgd_step([p], lr=0.01, weight_decay=0.0005)
    np.testing.assert_allclose(p.value, [2 - 0.01 * 2 * 0.0005], rtol=1e-12)

    p = ndnet.Param("w", np.array([3.0]))
    p.grad[...] = 5.0
    sgd_step([p], lr=0.0)
    np.testing.assert_allclose(p.value, [3.0])


def test_sgd_skips_decay_on_bias():
    b = ndnet.Param("b", np.array([2.0]), decay=False)
    sgd_step([b], lr=0.01, weight_decay=0.5)
    np.testing.assert_allclose(b.value, [2.0])


def test_sgd_nonfinite_gradient_names_param():
    p = ndnet.Param("head.w", np.array([1.0]))
    p.grad[...] = np.nan
    with pytest.raises(TrainingError, match="head.w"):
        sgd_step([p], lr=0.01)


def test_mse_examples():
    assert mse(np.array([1.0, 0.0]), np.array([0.0, 1.0])).value == pytest.approx(1.0)
    a = np.array([0.3, -0.7])
    assert mse(a, a).value == 0.0


def test_mse_bounded_for_normalized_actions():
    rng = np.random.default_rng(41)
    for _ in range(200):
        pred = rng.uniform(-1, 1, size=2)
        target = rng.uniform(-1, 1, size=2)
        assert mse(pred, target).value <= 4.0


def test_cross_entropy_uniform_logits():
    lv = cross_entropy(np.array([[0.0, 0.0]]), np.array([0]))
    assert lv.value == pytest.approx(np.log(2.0))
    assert lv.value >= 0


def test_loss_gradients_match_fd():
    rng = np.random.default_rng(43)
    pred = rng.standard_normal((4, 2))
    target = rng.standard_normal((4, 2))
    lv = mse(pred, target)
    numeric = fd_grad(lambda: mse(pred, target).value, pred)
    assert max_rel_err(lv.grad, numeric) < 1e-6

    logits = rng.standard_normal((4, 2))
    labels = np.array([0, 1, 1, 0])
    lv = cross_entropy(logits, labels)
    numeric = fd_grad(lambda: cross_entropy(logits, labels).value, logits)
    assert max_rel_err(lv.grad, numeric) < 1e-6


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(47)
    net = Net([Conv2d(1, 2, 3, 1, rng, name="c"), Flatten(), FullyConnected(2 * 4 * 4, 3, rng, name="f")])
    path = tmp_path / "net.smilnet"
    save_checkpoint(path, net.params())
    stored = {p.name: p.value.copy() for p in net.params()}
    for p in net.params():
        p.value[...] = 0
    load_checkpoint(path, net.params())
    for p in net.params():
        np.testing.assert_array_equal(p.value, stored[p.name])


def test_checkpoint_magic_and_size_validation(tmp_path):
    rng = np.random.default_rng(53)
    net = Net([FullyConnected(2, 2, rng, name="f")])
    path = tmp_path / "net.smilnet"
    save_checkpoint(path, net.params())

    blob = path.read_bytes()
    assert blob.startswith(b"SMILNET1")

    (tmp_path / "bad_magic.smilnet").write_bytes(b"XXXXXXXX" + blob[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(tmp_path / "bad_magic.smilnet", net.params())

    (tmp_path / "trailing.smilnet").write_bytes(blob + b"\x00\x00")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "trailing.smilnet", net.params())

    (tmp_path / "truncated.smilnet").write_bytes(blob[:-4])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "truncated.smilnet", net.params())
