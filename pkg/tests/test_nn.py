import numpy as np
import pytest

from visracer import nn
from visracer.errors import ShapeMismatch
from visracer.nn import (
    Adam,
    Dense,
    DepthwiseSeparableConv,
    Flatten,
    Network,
    ReLU,
    SpaceToDepth,
    Tanh,
    mse_loss,
)


def numeric_grad(f, x, h=1e-4):
    """Central finite differences of a scalar function, element by element."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def check_network_grads(net, x, rtol, param_sample=None, seed=0):
    """Compare backward() against finite differences in float64."""
    net64 = net.astype(np.float64)
    x = x.astype(np.float64)
    rng = np.random.default_rng(seed)
    y, acts = net64.forward(x)
    gy = rng.normal(size=y.shape)

    def loss():
        out, _ = net64.forward(x)
        return float((out * gy).sum())

    param_grads, input_grad = net64.backward(acts, gy)

    if net64.num_params:
        idx = np.arange(net64.num_params)
        if param_sample is not None and net64.num_params > param_sample:
            idx = rng.choice(net64.num_params, size=param_sample, replace=False)
        num = np.zeros(idx.size)
        for k, i in enumerate(idx):
            orig = net64.params[i]
            net64.params[i] = orig + 1e-4
            fp = loss()
            net64.params[i] = orig - 1e-4
            fm = loss()
            net64.params[i] = orig
            num[k] = (fp - fm) / 2e-4
        rel = np.abs(param_grads[idx] - num) / np.maximum(np.abs(num), 1e-3)
        assert rel.max() < rtol

    num_in = numeric_grad(loss, x)
    rel = np.abs(input_grad - num_in) / max(np.abs(num_in).max(), 1e-3)
    assert rel.max() < rtol


# ---------------------------------------------------------------- forward identities

def test_dense_identity():
    net = Network([Dense(4, 4)], (4,), rng_seed=0)
    w = np.eye(4, dtype=np.float32).ravel()
    net.params[:16] = w
    net.params[16:] = 0.0
    x = np.random.default_rng(0).normal(size=(3, 4)).astype(np.float32)
    y, _ = net.forward(x)
    assert np.array_equal(y, x)


def test_relu_zeroes_negatives():
    net = Network([ReLU()], (5,))
    x = -np.abs(np.random.default_rng(1).normal(size=(2, 5))).astype(np.float32)
    y, _ = net.forward(x)
    assert np.all(y == 0.0)


def test_dsconv_delta_kernel_identity():
    c = 3
    layer = DepthwiseSeparableConv(c, c, kernel=3, stride=1)
    net = Network([layer], (6, 8, c))
    dw = np.zeros((c, 3, 3), dtype=np.float32)
    dw[:, 1, 1] = 1.0  # centered delta
    pw = np.eye(c, dtype=np.float32)
    net.params[:] = np.concatenate([dw.ravel(), np.zeros(c), pw.ravel(), np.zeros(c)])
    x = np.random.default_rng(2).normal(size=(2, 6, 8, c)).astype(np.float32)
    y, _ = net.forward(x)
    assert np.array_equal(y, x)


def test_param_count_below_dense_conv():
    for cin, cout, k in ((16, 32, 3), (4, 16, 3), (8, 8, 5)):
        layer = DepthwiseSeparableConv(cin, cout, kernel=k)
        dense_conv = cin * cout * k * k
        assert layer.param_count < dense_conv


def test_shape_chaining_validated():
    with pytest.raises(ShapeMismatch):
        Network([Dense(4, 8), Dense(9, 2)], (4,))
    with pytest.raises(ShapeMismatch):
        Network([SpaceToDepth(3)], (8, 8, 1))


def test_forward_is_side_effect_free():
    net = Network([Dense(6, 6), ReLU(), Dense(6, 2)], (6,), rng_seed=3)
    before = net.params.copy()
    x = np.random.default_rng(3).normal(size=(4, 6)).astype(np.float32)
    x0 = x.copy()
    y, acts = net.forward(x)
    gy = np.ones_like(y)
    acts_copy = [a.copy() if isinstance(a, np.ndarray) else a for a in acts]
    net.backward(acts, gy)
    assert np.array_equal(net.params, before)
    assert np.array_equal(x, x0)
    for a, b in zip(acts, acts_copy):
        if isinstance(a, np.ndarray):
            assert np.array_equal(a, b)


def test_zero_grad_output_gives_zero_grads():
    net = Network([Dense(5, 7), Tanh(), Dense(7, 3)], (5,), rng_seed=4)
    x = np.random.default_rng(4).normal(size=(2, 5)).astype(np.float32)
    y, acts = net.forward(x)
    g, gx = net.backward(acts, np.zeros_like(y))
    assert np.all(g == 0.0) and np.all(gx == 0.0)


# ---------------------------------------------------------------- gradient checks

@pytest.mark.parametrize(
    "layers,in_shape",
    [
        ([Dense(6, 4)], (6,)),
        ([ReLU()], (8,)),
        ([Tanh()], (8,)),
        ([Flatten()], (3, 4, 2)),
        ([SpaceToDepth(2)], (4, 6, 2)),
        ([DepthwiseSeparableConv(2, 3, kernel=3, stride=1)], (5, 7, 2)),
        ([DepthwiseSeparableConv(3, 4, kernel=3, stride=2)], (6, 8, 3)),
    ],
)
def test_layer_gradients_match_finite_differences(layers, in_shape):
    net = Network(layers, in_shape, rng_seed=7)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(3,) + tuple(in_shape)) + 0.05  # keep clear of ReLU kinks
    check_network_grads(net, x, rtol=1e-4)


def test_full_stack_gradcheck_16x16():
    # representation tower shape on a 16x16 input, regression head on top
    layers = [
        SpaceToDepth(2),
        DepthwiseSeparableConv(4, 8, kernel=3, stride=2),
        ReLU(),
        DepthwiseSeparableConv(8, 8, kernel=3, stride=2),
        ReLU(),
        Flatten(),
        Dense(8 * 2 * 2, 16),
        Dense(16, 5),
    ]
    net = Network(layers, (16, 16, 1), rng_seed=8)
    x = np.random.default_rng(8).random((2, 16, 16, 1))
    check_network_grads(net, x, rtol=1e-3, param_sample=160)


# ---------------------------------------------------------------- loss / optimizer

def test_mse_examples():
    pred = np.zeros((1, 27))
    target = np.zeros((1, 27))
    loss, grad = mse_loss(pred, target)
    assert loss == 0.0 and np.all(grad == 0.0)

    loss, grad = mse_loss(np.ones((1, 27)), np.zeros((1, 27)))
    assert loss == pytest.approx(27.0)
    assert np.allclose(grad, 2.0)

    with pytest.raises(ShapeMismatch):
        mse_loss(np.zeros((1, 3)), np.zeros((1, 4)))


def test_mse_gradient_matches_fd():
    rng = np.random.default_rng(9)
    pred = rng.normal(size=(4, 6))
    target = rng.normal(size=(4, 6))
    _, grad = mse_loss(pred, target)
    num = numeric_grad(lambda: mse_loss(pred, target)[0], pred, h=1e-6)
    assert np.abs(grad - num).max() < 1e-6


def test_adam_first_step_magnitude():
    params = np.zeros(4, dtype=np.float32)
    g = np.array([10.0, -5.0, 2.0, 100.0], dtype=np.float32)
    opt = Adam(4, lr=1e-3)
    opt.step(params, g)
    expected = -1e-3 * g / (np.abs(g) + 1e-8)
    assert np.allclose(params, expected, rtol=1e-5)


def test_adam_zero_grad_noop():
    params = np.full(3, 1.5, dtype=np.float32)
    opt = Adam(3, lr=0.1)
    opt.step(params, np.zeros(3, dtype=np.float32))
    assert np.array_equal(params, np.full(3, 1.5, dtype=np.float32))
    assert opt.step_count == 1


def test_adam_minimizes_quadratic():
    w = np.zeros(1, dtype=np.float32)
    opt = Adam(1, lr=0.05)
    for _ in range(2000):
        grad = 2.0 * (w - 3.0)
        opt.step(w, grad.astype(np.float32))
    assert abs(float(w[0]) - 3.0) < 0.01


# ---------------------------------------------------------------- manifest

def test_manifest_roundtrip_reconstructs_stack():
    layers = [
        SpaceToDepth(2),
        DepthwiseSeparableConv(4, 8, kernel=3, stride=2),
        ReLU(),
        Flatten(),
        Dense(8 * 4 * 6, 10),
        Tanh(),
    ]
    net = Network(layers, (16, 24, 1), rng_seed=11)
    clone = Network.from_manifest(net.manifest())
    clone.params[:] = net.params
    x = np.random.default_rng(11).random((2, 16, 24, 1)).astype(np.float32)
    assert np.array_equal(net.forward(x)[0], clone.forward(x)[0])


def test_seeded_init_reproducible():
    a = Network([Dense(10, 10)], (10,), rng_seed=42)
    b = Network([Dense(10, 10)], (10,), rng_seed=42)
    c = Network([Dense(10, 10)], (10,), rng_seed=43)
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)
