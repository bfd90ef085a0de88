import numpy as np
import pytest
from _oracles import fd_grad, max_rel_err

from smilnav.ndnet import ConfigError
from smilnav.policy import (
    TASKS,
    InputError,
    PolicyConfig,
    SmilPolicy,
    joint_loss,
    one_hot,
    task_from_embedding,
)

F64_CFG = dict(
    image_shape=(3, 13, 17),
    conv_channels=(2,),
    feature_dim=6,
    hidden_dims=(5, 4),
    dtype="float64",
)


def _tiny_policy(share_mode="shared", seed=0, **kw):
    params = {**F64_CFG, **kw}
    cfg = PolicyConfig(share_mode=share_mode, **params)
    return SmilPolicy(cfg, np.random.default_rng(seed))


def _weights_by_name(policy):
    return {p.name: p for p in policy.params()}


def brute_force_heads(policy, f, task_id):
    """Independent numpy reconstruction: per-head two FC+ReLU stages, summed,
    then the active head's final layer. Reads raw weights only."""
    w = {p.name: p.value for p in policy.params()}
    total = None
    for i in range(policy.config.n_heads):
        h1 = np.maximum(f @ w[f"head{i}.fc1.w"].T + w[f"head{i}.fc1.b"], 0.0)
        h2 = np.maximum(h1 @ w[f"head{i}.fc2.w"].T + w[f"head{i}.fc2.b"], 0.0)
        total = h2 if total is None else total + h2
    return total @ w[f"head{task_id}.out.w"].T + w[f"head{task_id}.out.b"]


def test_task_embedding_validation():
    assert task_from_embedding(one_hot(2)) == 2
    with pytest.raises(InputError):
        task_from_embedding(np.array([1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(InputError):
        task_from_embedding(np.array([0.5, 0.5, 0.0, 0.0]))
    with pytest.raises(InputError):
        task_from_embedding(np.zeros(4))


def test_default_extractor_feature_dim():
    cfg = PolicyConfig()
    policy = SmilPolicy(cfg, np.random.default_rng(0))
    img = np.random.default_rng(1).random((2, 3, 48, 64)).astype(np.float32)
    trace = policy.extract_features(img)
    assert trace.output.shape == (2, 128)


def test_zero_image_features_deterministic():
    policy = _tiny_policy()
    img = np.zeros((1, 3, 13, 17))
    a = policy.extract_features(img).output
    b = policy.extract_features(img).output
    np.testing.assert_array_equal(a, b)


def test_shared_addition_matches_brute_force():
    # acceptance: 100 random (weights, input) draws agree to 1e-9
    for draw in range(100):
        policy = _tiny_policy(seed=draw, use_dropout=False)
        rng = np.random.default_rng(1000 + draw)
        f = rng.standard_normal((3, 6))
        task = draw % len(TASKS)
        emb = np.tile(one_hot(task), (3, 1))

        class _FT:
            output = f

        trace = policy.policy_forward(_FT(), emb, "infer")
        expected = brute_force_heads(policy, f, task)
        np.testing.assert_allclose(trace.raw_actions, expected, atol=1e-9, rtol=0)


def test_zeroed_inactive_heads_shared_equals_independent():
    shared = _tiny_policy("shared", seed=5, use_dropout=False)
    indep = _tiny_policy("independent", seed=5, use_dropout=False)
    for p, q in zip(shared.params(), indep.params()):
        q.value[...] = p.value
    task = 2
    for policy in (shared, indep):
        w = _weights_by_name(policy)
        for i in range(4):
            if i != task:
                w[f"head{i}.fc1.w"].value[...] = 0
                w[f"head{i}.fc1.b"].value[...] = 0
                w[f"head{i}.fc2.w"].value[...] = 0
                w[f"head{i}.fc2.b"].value[...] = 0
    img = np.random.default_rng(6).random((4, 3, 13, 17))
    ids = np.full(4, task)
    a = shared.forward(img, ids).raw_actions
    b = indep.forward(img, ids).raw_actions
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("mode", ["shared", "independent"])
def test_inactive_final_layer_gradients_exactly_zero(mode):
    policy = _tiny_policy(mode, seed=7, use_dropout=False)
    img = np.random.default_rng(8).random((5, 3, 13, 17))
    ids = np.array([1, 3, 1, 3, 1])
    trace = policy.forward(img, ids, "train")
    policy.zero_grads()
    policy.backward(trace, np.ones_like(trace.raw_actions), np.ones_like(trace.env_logits))
    w = _weights_by_name(policy)
    for i in range(4):
        grads = np.concatenate([w[f"head{i}.out.w"].grad.ravel(), w[f"head{i}.out.b"].grad.ravel()])
        if i in (1, 3):
            assert np.abs(grads).max() > 0
        else:
            assert not grads.any()
    if mode == "shared":
        # the addition operation feeds gradient to every head's first layers
        for i in range(4):
            assert np.abs(w[f"head{i}.fc1.w"].grad).max() > 0


def test_switch_from_head1_to_head3_moves_final_gradient():
    policy = _tiny_policy("shared", seed=9, use_dropout=False)
    img = np.random.default_rng(10).random((2, 3, 13, 17))
    w = _weights_by_name(policy)

    trace = policy.forward(img, np.array([1, 1]), "train")
    policy.zero_grads()
    policy.backward(trace, np.ones_like(trace.raw_actions))
    assert np.abs(w["head1.out.w"].grad).max() > 0
    assert not w["head3.out.w"].grad.any()

    trace = policy.forward(img, np.array([3, 3]), "train")
    policy.zero_grads()
    policy.backward(trace, np.ones_like(trace.raw_actions))
    assert np.abs(w["head3.out.w"].grad).max() > 0
    assert not w["head1.out.w"].grad.any()


def test_plain_mode_ignores_embedding():
    policy = _tiny_policy("plain", seed=11)
    img = np.random.default_rng(12).random((1, 3, 13, 17))
    outs = [policy.act(img[0], one_hot(t)) for t in range(4)]
    for o in outs[1:]:
        np.testing.assert_array_equal(o, outs[0])


def test_action_clamp():
    policy = _tiny_policy(seed=13, use_dropout=False)
    for p in policy.params():
        if p.name.endswith(".out.w"):
            p.value[...] = 100.0
    img = np.random.default_rng(14).random((3, 3, 13, 17)) + 1.0
    trace = policy.forward(img, np.array([0, 1, 2]))
    acts = policy.actions(trace)
    assert np.all(acts >= -1.0) and np.all(acts <= 1.0)
    assert np.abs(trace.raw_actions).max() > 1.0  # clamp actually did something


def test_predict_env_probabilities():
    policy = _tiny_policy(seed=15)
    img = np.random.default_rng(16).random((4, 3, 13, 17))
    probs = policy.predict_env(img)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    with np.errstate(all="ignore"):
        w = _weights_by_name(policy)
        w["env.out.w"].value[...] = 0
        w["env.out.b"].value[...] = 0
    probs = policy.predict_env(img)
    np.testing.assert_allclose(probs, 0.5)


def test_predict_env_disabled_errors():
    policy = _tiny_policy(seed=17, env_head=False)
    img = np.zeros((1, 3, 13, 17))
    with pytest.raises(ConfigError):
        policy.predict_env(img)


def test_joint_loss_arithmetic():
    pred = np.array([[0.5, 0.5]])
    lv = joint_loss(pred, pred, aux_weight=0.0)
    assert lv.value == 0.0

    # mse exactly 0.2 and cross-entropy exactly 0.6 -> 0.2 + 0.5*0.6 = 0.5
    target = pred - np.array([[np.sqrt(0.4), 0.0]])
    p0 = np.exp(-0.6)
    logits = np.log(np.array([[p0, 1.0 - p0]]))
    lv = joint_loss(pred, target, logits, np.array([0]), aux_weight=0.5)
    assert lv.control_mse == pytest.approx(0.2, rel=1e-12)
    assert lv.env_ce == pytest.approx(0.6, rel=1e-9)
    assert lv.value == pytest.approx(0.5, rel=1e-9)

    # certain and correct env prediction with matching control -> zero loss
    sure = np.array([[50.0, -50.0]])
    lv = joint_loss(pred, pred, sure, np.array([0]), aux_weight=0.5)
    assert lv.value == pytest.approx(0.0, abs=1e-12)


def test_joint_loss_lambda_zero_is_pure_mse():
    rng = np.random.default_rng(18)
    pred, target = rng.random((4, 2)), rng.random((4, 2))
    logits = rng.random((4, 2))
    lv = joint_loss(pred, target, logits, np.array([0, 1, 0, 1]), aux_weight=0.0)
    assert lv.value == lv.control_mse
    assert lv.d_env is None


@pytest.mark.parametrize("mode", ["shared", "independent", "plain"])
def test_full_policy_gradcheck(mode):
    policy = _tiny_policy(mode, seed=21)
    rng = np.random.default_rng(22)
    # jitter biases off zero: exact ReLU kinks make finite differences undefined
    for p in policy.params():
        if p.name.endswith(".b"):
            p.value += rng.uniform(0.05, 0.15, p.value.shape)
    img = rng.random((4, 3, 13, 17))
    ids = np.array([0, 1, 2, 3])
    target = rng.uniform(-1, 1, (4, 2))
    env_labels = np.array([0, 1, 1, 0])
    lam = policy.config.aux_weight
    drop_seed = 555

    def loss_value():
        trace = policy.forward(img, ids, "train", np.random.default_rng(drop_seed))
        return joint_loss(trace.raw_actions, target, trace.env_logits, env_labels, lam).value

    trace = policy.forward(img, ids, "train", np.random.default_rng(drop_seed))
    lv = joint_loss(trace.raw_actions, target, trace.env_logits, env_labels, lam)
    policy.zero_grads()
    policy.backward(trace, lv.d_pred, lv.d_env)

    for p in policy.params():
        numeric = fd_grad(loss_value, p.value)
        assert max_rel_err(p.grad, numeric) < 1e-4, p.name


def test_policy_checkpoint_roundtrip(tmp_path):
    from smilnav.ndnet import load_checkpoint, save_checkpoint

    policy = _tiny_policy(seed=23, dtype="float32")
    path = tmp_path / "p.smilnet"
    save_checkpoint(path, policy.params())
    img = np.random.default_rng(24).random((2, 3, 13, 17)).astype(np.float32)
    before = policy.forward(img, np.array([0, 1])).raw_actions

    other = _tiny_policy(seed=99, dtype="float32")
    load_checkpoint(path, other.params())
    after = other.forward(img, np.array([0, 1])).raw_actions
    np.testing.assert_array_equal(before, after)
