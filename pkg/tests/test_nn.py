import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annctl import nn
from annctl.errors import ConfigError, DivergenceError
from annctl.nn import Dataset, Layer, Mlp, TrainConfig


def numeric_grad(net, x, target, h=1e-5):
    theta = net.get_params()
    out = np.empty_like(theta)
    probe = net.copy()

    def loss(th):
        probe.set_params(th)
        return 0.5 * np.sum((probe(x) - target) ** 2)

    for j in range(len(theta)):
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        out[j] = (loss(up) - loss(dn)) / (2 * h)
    return out


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8))


def test_sigmoid_values():
    assert nn.sigmoid(0.0, 3.7) == 0.5
    assert nn.sigmoid(math.log(3), 1.0) == pytest.approx(0.75, abs=1e-15)


def test_sigmoid_derivative_matches_fd():
    h = 1e-5
    fd = (nn.sigmoid(h) - nn.sigmoid(-h)) / (2 * h)
    assert nn.sigmoid_grad(0.0) == 0.25
    assert fd == pytest.approx(0.25, abs=1e-8)
    for a, x in [(1.0, 0.3), (2.5, -0.7), (0.4, 4.0)]:
        fd = (nn.sigmoid(x + h, a) - nn.sigmoid(x - h, a)) / (2 * h)
        assert nn.sigmoid_grad(x, a) == pytest.approx(fd, abs=1e-8)


@given(st.floats(-1e6, 1e6), st.floats(0.01, 10.0))
def test_sigmoid_bounded_and_finite(x, a):
    with np.errstate(over="raise"):
        f = nn.sigmoid(x, a)
    assert math.isfinite(f) and 0.0 <= f <= 1.0


def test_sigmoid_open_interval_moderate_inputs():
    f = nn.sigmoid(np.array([-30.0, -1.0, 1.0, 30.0]))
    assert np.all((f > 0) & (f < 1))


def test_forward_zero_net():
    net = nn.init_mlp([3, 4, 2], 0)
    for l in net.layers:
        l.weights[...] = 0
        l.biases[...] = 0
    y, acts = nn.forward(net, np.ones(3))
    assert np.all(y == 0.0)
    assert len(acts) == 3


def test_forward_single_unit():
    net = Mlp([Layer(np.ones((1, 1)), np.zeros(1)), Layer(np.ones((1, 1)), np.zeros(1))])
    assert nn.forward(net, np.zeros(1))[0][0] == 0.5


def test_forward_hidden_permutation_invariance():
    net = nn.init_mlp([3, 6, 2], 4)
    perm = np.random.default_rng(1).permutation(6)
    p = net.copy()
    p.layers[0].weights = net.layers[0].weights[perm]
    p.layers[0].biases = net.layers[0].biases[perm]
    p.layers[1].weights = net.layers[1].weights[:, perm]
    x = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(p(x), net(x), rtol=1e-14)


def test_forward_dimension_mismatch():
    with pytest.raises(ConfigError):
        nn.forward(nn.init_mlp([3, 4, 1], 0), np.ones(2))


def test_mlp_requires_hidden_layer():
    with pytest.raises(ConfigError):
        nn.init_mlp([3, 1], 0)


def test_init_range():
    net = nn.init_mlp([16, 50, 1], 3)
    assert np.abs(net.layers[0].weights).max() <= 0.25
    assert np.abs(net.layers[1].weights).max() <= 1 / math.sqrt(50)
    z = nn.init_mlp([4, 5, 1], 3, zero_output=True)
    assert np.all(z(np.ones((7, 4))) == 0.0)


def test_backprop_zero_at_target():
    net = nn.init_mlp([3, 4, 2], 2)
    x = np.array([0.1, 0.2, -0.3])
    g = nn.flatten_grads(nn.backprop(net, x, net(x)))
    assert np.all(g == 0.0)


@pytest.mark.parametrize("sizes", [[3, 4, 2], [2, 7, 1], [4, 5, 3, 2]])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backprop_matches_finite_differences(sizes, seed):
    rng = np.random.default_rng(seed)
    net = nn.init_mlp(sizes, rng, activation_slope=rng.uniform(0.5, 2.0))
    x = rng.normal(size=sizes[0])
    target = rng.normal(size=sizes[-1])
    g = nn.flatten_grads(nn.backprop(net, x, target))
    assert rel_err(g, numeric_grad(net, x, target)) < 1e-5


def test_backprop_batch_is_sum_of_samples():
    rng = np.random.default_rng(5)
    net = nn.init_mlp([3, 4, 2], rng)
    X, T = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    total = nn.flatten_grads(nn.backprop(net, X, T))
    parts = sum(nn.flatten_grads(nn.backprop(net, X[i], T[i])) for i in range(6))
    np.testing.assert_allclose(total, parts, rtol=1e-12, atol=1e-14)


def test_backprop_duplicate_hidden_neurons_share_gradient():
    net = nn.init_mlp([2, 3, 1], 0)
    net.layers[0].weights[1] = net.layers[0].weights[0]
    net.layers[0].biases[1] = net.layers[0].biases[0]
    net.layers[1].weights[0, 1] = net.layers[1].weights[0, 0]
    g = nn.backprop(net, np.array([0.4, -0.9]), np.array([1.0]))
    np.testing.assert_array_equal(g[0].weights[0], g[0].weights[1])
    assert g[0].biases[0] == g[0].biases[1]
    assert g[1].weights[0, 0] == g[1].weights[0, 1]


def test_mse_contract():
    assert nn.mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert nn.mse([0.0, 0.0], [1.0, 1.0]) == 1.0
    assert nn.mse([[1.0, 1.0]], [[0.0, 0.0]]) == 2.0
    with pytest.raises(ValueError):
        nn.mse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        nn.mse([], [])


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=20), st.randoms())
def test_mse_order_invariant(pairs, rnd):
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    p, t = zip(*pairs)
    ps, ts = zip(*shuffled)
    assert nn.mse(ps, ts) == pytest.approx(nn.mse(p, t), rel=1e-12, abs=1e-300)


def linear_data():
    x = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])[:, None]
    return Dataset(x, 2 * x + 1)


def test_train_zero_learning_rate_is_identity():
    net = nn.init_mlp([1, 8, 1], 0)
    res = nn.train(net, linear_data(), TrainConfig(5, 0.0))
    assert res.net.equals(net)
    assert len(set(res.mse_history)) == 1


@pytest.mark.parametrize("mode,lr", [("full", 1.0), ("sample", 0.5)])
def test_train_linear_regression(mode, lr):
    net = nn.init_mlp([1, 8, 1], 0)
    res = nn.train(net, linear_data(), TrainConfig(500, lr, mode, 1))
    assert len(res.mse_history) == 500
    assert res.mse_history[-1] < 1e-3
    assert res.mse_history[-1] < res.mse_history[0]


def test_train_sine_regression():
    x = np.linspace(-np.pi, np.pi, 41)[:, None]
    net = nn.init_mlp([1, 15, 1], 0)
    res = nn.train(net, Dataset(x / np.pi, np.sin(x)), TrainConfig(500, 0.1, "sample", 2))
    assert res.mse_history[-1] < 1e-2
    assert res.mse_history[-1] < res.mse_history[0]


def test_train_deterministic():
    net = nn.init_mlp([1, 8, 1], 11)
    a = nn.train(net, linear_data(), TrainConfig(50, 0.1, "sample", 3))
    b = nn.train(net, linear_data(), TrainConfig(50, 0.1, "sample", 3))
    assert a.net.equals(b.net) and a.mse_history == b.mse_history
    c = nn.train(net, linear_data(), TrainConfig(50, 0.1, "sample", 4))
    assert not a.net.equals(c.net)


def test_train_does_not_mutate_input():
    net = nn.init_mlp([1, 8, 1], 0)
    before = net.copy()
    nn.train(net, linear_data(), TrainConfig(10, 0.1))
    assert net.equals(before)


def test_train_divergence_reports_epoch_and_rate():
    net = nn.init_mlp([1, 8, 1], 0)
    with pytest.raises(DivergenceError, match=r"epoch \d+ \(learning_rate=1e\+06\)"):
        nn.train(net, linear_data(), TrainConfig(200, 1e6))


def test_train_config_validation():
    with pytest.raises(ConfigError, match="train.batch_mode"):
        TrainConfig(batch_mode="mini")
    with pytest.raises(ConfigError, match="train.learning_rate"):
        TrainConfig(learning_rate=-1.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=3, max_size=4), st.integers(0, 2 ** 32 - 1),
       st.floats(0.1, 3.0))
def test_text_round_trip_bit_exact(sizes, seed, slope):
    net = nn.init_mlp(sizes, seed, slope)
    net.layers[0].weights[0, 0] = 1 / 3
    back = nn.loads(nn.dumps(net))
    assert back.equals(net)
    assert nn.dumps(back) == nn.dumps(net)


def test_text_format_header(tmp_path):
    net = nn.init_mlp([4, 10, 1], 0, 1.5)
    path = tmp_path / "net.txt"
    nn.save(net, path)
    lines = path.read_text().splitlines()
    assert lines[:3] == ["annctl-mlp 1", "sizes 4 10 1", "activation_slope 1.5"]
    assert nn.load(path).equals(net)


def test_text_format_rejects_garbage():
    with pytest.raises(ConfigError):
        nn.loads("annctl-mlp 9\nsizes 1 1 1\n")
