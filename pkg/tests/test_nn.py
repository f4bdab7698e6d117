"""Neural core: forward oracles, gradient checks, optimizer reference."""

import numpy as np
import pytest

from mrfpipe.nn import (AdamState, DepthwiseConv3x3, Dropout, PointwiseConv, ReLU,
                        adam_step, dropout, grad_check, mse_loss,
                        mse_loss_backward, relu)

from oracles import naive_depthwise3x3, naive_pointwise, reference_adam


@pytest.mark.parametrize("seed", range(4))
def test_depthwise_forward_matches_naive(seed):
    rng = np.random.default_rng(seed)
    layer = DepthwiseConv3x3(3, rng=rng)
    layer.bias = rng.standard_normal(3)
    x = rng.standard_normal((2, 3, 6, 5))
    np.testing.assert_allclose(
        layer.forward(x), naive_depthwise3x3(x, layer.kernels, layer.bias),
        atol=1e-12,
    )


@pytest.mark.parametrize("seed", range(4))
def test_pointwise_forward_matches_naive(seed):
    rng = np.random.default_rng(seed)
    layer = PointwiseConv(4, 3, rng=rng)
    layer.bias = rng.standard_normal(3)
    x = rng.standard_normal((2, 4, 5, 6))
    np.testing.assert_allclose(
        layer.forward(x), naive_pointwise(x, layer.weight, layer.bias), atol=1e-12
    )


def _coords(rng, size, n=40):
    return rng.choice(size, min(n, size), replace=False)


@pytest.mark.parametrize("seed", range(6))
def test_depthwise_gradients(seed):
    rng = np.random.default_rng(100 + seed)
    layer = DepthwiseConv3x3(2, rng=rng)
    x = rng.standard_normal((2, 2, 5, 4))
    w = rng.standard_normal((2, 2, 5, 4))

    gx = None

    def run(xx):
        return float(np.sum(layer.forward(xx) * w))

    layer.forward(x)
    gx = layer.backward(w)
    assert grad_check(run, x, gx, coords=_coords(rng, x.size)).ok(1e-6)

    k0 = layer.kernels.copy()

    def run_k(kk):
        layer.kernels = kk
        out = float(np.sum(layer.forward(x) * w))
        layer.kernels = k0
        return out

    layer.kernels = k0
    layer.forward(x)
    layer.backward(w)
    gk = dict(layer.gradients())["kernels"]
    assert grad_check(run_k, k0, gk).ok(1e-6)

    b0 = layer.bias.copy()

    def run_b(bb):
        layer.bias = bb
        out = float(np.sum(layer.forward(x) * w))
        layer.bias = b0
        return out

    layer.bias = b0
    layer.forward(x)
    layer.backward(w)
    gb = dict(layer.gradients())["bias"]
    assert grad_check(run_b, b0, gb).ok(1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_pointwise_gradients(seed):
    rng = np.random.default_rng(200 + seed)
    layer = PointwiseConv(3, 4, rng=rng)
    x = rng.standard_normal((2, 3, 4, 5))
    w = rng.standard_normal((2, 4, 4, 5))

    layer.forward(x)
    gx = layer.backward(w)
    assert grad_check(lambda xx: float(np.sum(layer.forward(xx) * w)), x, gx,
                      coords=_coords(rng, x.size)).ok(1e-6)

    w0 = layer.weight.copy()

    def run_w(ww):
        layer.weight = ww
        out = float(np.sum(layer.forward(x) * w))
        layer.weight = w0
        return out

    layer.weight = w0
    layer.forward(x)
    layer.backward(w)
    gw = dict(layer.gradients())["weight"]
    assert grad_check(run_w, w0, gw).ok(1e-6)


def test_relu_forward_and_subgradient():
    x = np.array([[-2.0, 0.0], [3.0, -0.5]])[None, None]
    layer = ReLU()
    np.testing.assert_array_equal(layer.forward(x),
                                  np.array([[0.0, 0.0], [3.0, 0.0]])[None, None])
    g = layer.backward(np.ones_like(x))
    # subgradient at exactly zero is taken as zero
    np.testing.assert_array_equal(g, np.array([[0.0, 0.0], [1.0, 0.0]])[None, None])
    assert relu(x).shape == x.shape


def test_dropout_eval_is_identity():
    x = np.random.default_rng(0).standard_normal((2, 3, 4, 4))
    out, mask = dropout(x, rate=0.5, train=False, seed=1)
    np.testing.assert_array_equal(out, x)
    assert mask is None or np.all(mask == 1.0)
    layer = Dropout(0.5)
    np.testing.assert_array_equal(layer.forward(x, train=False, seed=1), x)


def test_dropout_train_scales_and_reproduces():
    rng = np.random.default_rng(3)
    x = np.ones((1, 1, 50, 50))
    out1, mask1 = dropout(x, rate=0.3, train=True, seed=42)
    out2, mask2 = dropout(x, rate=0.3, train=True, seed=42)
    np.testing.assert_array_equal(out1, out2)
    np.testing.assert_array_equal(mask1, mask2)
    # inverted scaling: surviving entries are 1/(1-rate)
    kept = out1[out1 != 0.0]
    np.testing.assert_allclose(kept, 1.0 / 0.7, rtol=1e-12)
    keep_rate = (out1 != 0.0).mean()
    assert abs(keep_rate - 0.7) < 0.05
    out3, _ = dropout(x, rate=0.3, train=True, seed=43)
    assert not np.array_equal(out1, out3)


def test_dropout_backward_reuses_mask():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((2, 2, 6, 6))
    layer = Dropout(0.4)
    out = layer.forward(x, train=True, seed=7)
    g = rng.standard_normal(x.shape)
    gx = layer.backward(g)
    # gradient flows exactly where activations survived, with the same scale
    scale = 1.0 / 0.6
    np.testing.assert_array_equal(gx[out == 0.0], np.zeros_like(gx[out == 0.0]))
    np.testing.assert_allclose(gx[out != 0.0], g[out != 0.0] * scale, rtol=1e-12)


def test_dropout_rate_zero_is_identity_in_train():
    x = np.random.default_rng(1).standard_normal((1, 2, 3, 3))
    out, _ = dropout(x, rate=0.0, train=True, seed=5)
    np.testing.assert_array_equal(out, x)


def test_mse_loss_scalar_reference():
    pred = np.array([[1.0, 2.0], [3.0, 4.0]])[None, None]
    target = np.array([[1.5, 2.0], [2.0, 6.0]])[None, None]
    expect = ((0.5) ** 2 + 0.0 + 1.0 + 4.0) / 4.0
    assert mse_loss(pred, target) == pytest.approx(expect, rel=1e-15)


def test_mse_loss_masked():
    pred = np.zeros((1, 2, 2, 2))
    target = np.ones((1, 2, 2, 2))
    mask = np.array([[True, False], [False, True]])
    # mask keeps 2 voxels; both channels of each count toward the mean
    assert mse_loss(pred, target, mask) == pytest.approx(1.0)
    grad = mse_loss_backward(pred, target, mask)
    assert grad.shape == pred.shape
    # unmasked entries carry 2*(p-t)/count, masked are zero
    count = 4
    np.testing.assert_allclose(grad[0, :, 0, 0], -2.0 / count)
    np.testing.assert_allclose(grad[0, :, 0, 1], 0.0)


def test_mse_empty_mask_rejected():
    with pytest.raises(ValueError):
        mse_loss(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 2)),
                 np.zeros((2, 2), dtype=bool))


@pytest.mark.parametrize("seed", range(3))
def test_mse_gradient(seed):
    rng = np.random.default_rng(300 + seed)
    pred = rng.standard_normal((2, 3, 4, 4))
    target = rng.standard_normal((2, 3, 4, 4))
    mask = rng.random((2, 1, 4, 4)) > 0.3
    g = mse_loss_backward(pred, target, mask)
    assert grad_check(lambda p: mse_loss(p, target, mask), pred, g,
                      coords=_coords(rng, pred.size)).ok(1e-6)


def test_adam_matches_reference():
    rng = np.random.default_rng(17)
    p0 = rng.standard_normal(6)
    a = np.array([3.0, 1.0, 0.5, 2.0, 1.5, 0.25])

    def grad_fn(p):
        return 2.0 * a * (p - 1.0)

    expect = reference_adam(p0, grad_fn, lr=0.05, beta1=0.9, beta2=0.999,
                            eps=1e-8, steps=75)
    p = p0.copy()
    state = AdamState(learning_rate=0.05)
    for _ in range(75):
        adam_step([("p", p)], [("p", grad_fn(p))], state)
    np.testing.assert_allclose(p, expect, rtol=1e-12)
    assert state.step == 75


def test_adam_updates_in_place():
    p = np.zeros(3)
    ref = p
    state = AdamState(learning_rate=0.1)
    adam_step([("p", p)], [("p", np.ones(3))], state)
    assert ref is p
    assert np.all(p != 0.0)


def test_adam_state_tracks_multiple_params():
    p1, p2 = np.zeros(2), np.zeros((2, 2))
    state = AdamState(learning_rate=0.1)
    adam_step([("a", p1), ("b", p2)], [("a", np.ones(2)), ("b", np.ones((2, 2)))],
              state)
    assert set(state.m) == {"a", "b"}
    assert state.m["b"].shape == (2, 2)


def test_grad_check_detects_wrong_gradient():
    x = np.array([2.0, -1.0])

    def f(v):
        return float(np.sum(v**2))

    good = 2.0 * x
    assert grad_check(f, x, good).ok(1e-8)
    bad = 2.0 * x + 0.5
    assert not grad_check(f, x, bad).ok(1e-4)


def test_layers_require_4d():
    layer = DepthwiseConv3x3(2)
    with pytest.raises(ValueError):
        layer.forward(np.zeros((2, 3, 3)))
    pw = PointwiseConv(2, 2)
    with pytest.raises(ValueError):
        pw.forward(np.zeros((1, 3, 3, 3)))  # channel mismatch
