"""Finite-difference validation of every differentiable operator.

Checks run in double precision with central differences (step 1e-4) over
randomly sampled coordinates.  `OP_TOL` applies to single operators,
`BLOCK_TOL` to the full dual-attention block.
"""

import numpy as np
import pytest

from earfa import ops
from earfa.blocks import DualAttentionBlock
from earfa.tensor import Tensor, absolute, add, mul, relu, sigmoid, tmean
from earfa.training import l1_loss

from oracles import finite_difference_check, random_tensor

OP_TOL = 1e-4
BLOCK_TOL = 1e-3


def _weighted(out, weight):
    return tmean(mul(out, weight))


def test_conv2d_gradients(rng):
    x = random_tensor(rng, (2, 4, 6, 6))
    w = random_tensor(rng, (6, 4, 3, 3))
    b = random_tensor(rng, (6,))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 6, 6, 6)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.conv2d(x, w, b, padding=1), probe),
        [x, w, b], rng, n_coords=150)
    assert err < OP_TOL


def test_conv2d_dilated_grouped_gradients(rng):
    x = random_tensor(rng, (1, 4, 7, 7))
    w = random_tensor(rng, (4, 2, 3, 3))
    b = random_tensor(rng, (4,))
    probe = Tensor(rng.uniform(0.5, 1.5, (1, 4, 7, 7)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.conv2d(x, w, b, padding=2, dilation=2, groups=2), probe),
        [x, w, b], rng, n_coords=120)
    assert err < OP_TOL


def test_conv2d_depthwise_strided_gradients(rng):
    x = random_tensor(rng, (2, 5, 8, 8))
    w = random_tensor(rng, (5, 1, 3, 3))
    b = random_tensor(rng, (5,))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 5, 4, 4)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.conv2d(x, w, b, stride=2, padding=1, groups=5), probe),
        [x, w, b], rng, n_coords=120)
    assert err < OP_TOL


def test_layer_norm_gradients(rng):
    x = random_tensor(rng, (2, 6, 4, 4))
    gamma = Tensor(rng.uniform(0.5, 1.5, 6), requires_grad=True, dtype=np.float64)
    beta = random_tensor(rng, (6,))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 6, 4, 4)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.layer_norm(x, gamma, beta), probe),
        [x, gamma, beta], rng, n_coords=150)
    assert err < OP_TOL


def test_channel_shift_gradients(rng):
    x = random_tensor(rng, (1, 10, 5, 5))
    probe = Tensor(rng.uniform(0.5, 1.5, (1, 10, 5, 5)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.channel_shift(x), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_pixel_shuffle_gradients(rng):
    x = random_tensor(rng, (1, 8, 3, 3))
    probe = Tensor(rng.uniform(0.5, 1.5, (1, 2, 6, 6)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.pixel_shuffle(x, 2), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_split_channels_gradients(rng):
    x = random_tensor(rng, (1, 6, 4, 4))
    pa = Tensor(rng.uniform(0.5, 1.5, (1, 3, 4, 4)), dtype=np.float64)
    pb = Tensor(rng.uniform(0.5, 1.5, (1, 3, 4, 4)), dtype=np.float64)

    def loss():
        a, b = ops.split_channels(x, 2)
        return add(_weighted(a, pa), _weighted(mul(b, b), pb))

    err = finite_difference_check(loss, [x], rng, n_coords=100)
    assert err < OP_TOL


def test_channel_var_gradients(rng):
    x = random_tensor(rng, (2, 4, 5, 5))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 4, 1, 1)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.channel_var(x), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_channel_mean_gradients(rng):
    x = random_tensor(rng, (2, 4, 5, 5))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 4, 1, 1)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.channel_mean(x), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_channel_entropy_gradients(rng):
    x = random_tensor(rng, (2, 4, 6, 6))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 4, 1, 1)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(ops.channel_entropy(x), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_sigmoid_gradients(rng):
    x = random_tensor(rng, (2, 3, 4, 4))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 3, 4, 4)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(sigmoid(x), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_relu_gradients(rng):
    # Keep coordinates away from the kink at zero.
    base = rng.standard_normal((2, 3, 4, 4))
    base[np.abs(base) < 0.05] = 0.5
    x = Tensor(base, requires_grad=True, dtype=np.float64)
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 3, 4, 4)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(relu(x), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_abs_gradients(rng):
    base = rng.standard_normal((2, 3, 4, 4))
    base[np.abs(base) < 0.05] = 0.5
    x = Tensor(base, requires_grad=True, dtype=np.float64)
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 3, 4, 4)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(absolute(x), probe), [x], rng, n_coords=120)
    assert err < OP_TOL


def test_broadcast_mul_and_add_gradients(rng):
    weightvec = random_tensor(rng, (2, 4, 1, 1))
    x = random_tensor(rng, (2, 4, 5, 5))
    probe = Tensor(rng.uniform(0.5, 1.5, (2, 4, 5, 5)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(add(mul(x, weightvec), x), probe),
        [x, weightvec], rng, n_coords=120)
    assert err < OP_TOL


def test_l1_loss_gradient_is_scaled_sign(rng):
    pred = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True,
                  dtype=np.float64)
    target = Tensor(rng.standard_normal((2, 3, 4, 4)), dtype=np.float64)
    loss = l1_loss(pred, target)
    loss.backward()
    expected = np.sign(pred.data - target.data) / pred.size
    np.testing.assert_allclose(pred.grad, expected, rtol=1e-12)
    err = finite_difference_check(lambda: l1_loss(pred, target), [pred], rng,
                                  n_coords=120)
    assert err < OP_TOL


@pytest.mark.parametrize("spatial,channel", [("slka", "ea"), ("lka", "se")])
def test_full_dab_gradients(rng, spatial, channel):
    block = DualAttentionBlock(8, k_dw=3, k_ddw=3, dilation=2, k_sgfn=3,
                               reduction=8, spatial=spatial, channel=channel,
                               rng=rng)
    params = [p for _, p in block.named_params()]
    for p in params:
        p.data = p.data.astype(np.float64) + 0.01 * rng.standard_normal(p.data.shape)
    x = random_tensor(rng, (1, 8, 6, 6))
    probe = Tensor(rng.uniform(0.5, 1.5, (1, 8, 6, 6)), dtype=np.float64)
    err = finite_difference_check(
        lambda: _weighted(block(x), probe), [x] + params, rng, n_coords=160)
    assert err < BLOCK_TOL
