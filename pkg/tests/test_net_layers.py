"""Finite-difference verification of every layer's hand-written backward pass.

All checks run in float64 with central differences (h = 1e-5) against the
relative-error measure |analytic - fd| / (|analytic| + |fd| + 1e-8).
"""

import numpy as np
import pytest

from oracles import brute_force_bce, brute_force_masked_mse, brute_force_mse
from seldkit.net.layers import (
    BiGru,
    Conv2d,
    ConvUnit,
    DenseBlock,
    Elu,
    FreqPool,
    Gru,
    Linear,
    NetDeconv,
    Sigmoid,
    Tanh,
)
from seldkit.net.losses import loss_bce, loss_masked_mse, loss_mse

H = 1e-5
TOL = 1e-4


def rel_err(a, b):
    return abs(a - b) / (abs(a) + abs(b) + 1e-8)


def check_module(module, x, warm_train=False, check_inputs=True, max_per_param=None, seed=0):
    """Project the output onto fixed noise and compare analytic gradients of
    the resulting scalar with central differences."""
    rng = np.random.default_rng(seed)
    if warm_train:
        module.train()
        module.forward(x)
    module.eval()
    y0 = module.forward(x)
    proj = rng.standard_normal(y0.shape)

    def objective():
        return float((module.forward(x) * proj).sum())

    module.forward(x)
    module.zero_grad()
    dx = module.backward(proj)

    worst = 0.0
    for name, p in module.named_parameters():
        g = dict(module.named_grads())[name]
        flat = list(np.ndindex(p.shape))
        if max_per_param and len(flat) > max_per_param:
            flat = [flat[i] for i in rng.choice(len(flat), max_per_param, replace=False)]
        for idx in flat:
            orig = p[idx]
            p[idx] = orig + H
            jp = objective()
            p[idx] = orig - H
            jm = objective()
            p[idx] = orig
            fd = (jp - jm) / (2 * H)
            err = rel_err(g[idx], fd)
            assert err < TOL, f"{name}{idx}: analytic {g[idx]:.6g} vs fd {fd:.6g} (err {err:.2e})"
            worst = max(worst, err)
    if check_inputs:
        flat = list(np.ndindex(x.shape))
        picks = [flat[i] for i in rng.choice(len(flat), min(20, len(flat)), replace=False)]
        for idx in picks:
            orig = x[idx]
            x[idx] = orig + H
            jp = objective()
            x[idx] = orig - H
            jm = objective()
            x[idx] = orig
            fd = (jp - jm) / (2 * H)
            err = rel_err(dx[idx], fd)
            assert err < TOL, f"input{idx}: analytic {dx[idx]:.6g} vs fd {fd:.6g} (err {err:.2e})"
            worst = max(worst, err)
    return worst


class TestConvGradients:
    def test_dilation_1(self):
        rng = np.random.default_rng(1)
        conv = Conv2d(3, 2, dilation=1, rng=rng, dtype=np.float64)
        x = rng.standard_normal((2, 4, 5, 3))
        check_module(conv, x)

    def test_dilation_2(self):
        rng = np.random.default_rng(2)
        conv = Conv2d(2, 3, dilation=2, rng=rng, dtype=np.float64)
        x = rng.standard_normal((1, 6, 7, 2))
        check_module(conv, x)


class TestActivationGradients:
    @pytest.mark.parametrize("layer_cls", [Elu, Tanh, Sigmoid])
    def test_elementwise(self, layer_cls):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 5, 4)) * 2
        check_module(layer_cls(), x)


class TestLinearGradients:
    def test_linear(self):
        rng = np.random.default_rng(4)
        lin = Linear(6, 4, rng, dtype=np.float64)
        x = rng.standard_normal((3, 5, 6))
        check_module(lin, x)


class TestPoolGradients:
    def test_freq_pool(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 3, 8, 2))
        check_module(FreqPool(4), x)


class TestGruGradients:
    def test_forward_direction(self):
        rng = np.random.default_rng(6)
        gru = Gru(4, 3, rng, dtype=np.float64)
        x = rng.standard_normal((2, 6, 4))
        check_module(gru, x)

    def test_reverse_direction(self):
        rng = np.random.default_rng(7)
        gru = Gru(3, 4, rng, reverse=True, dtype=np.float64)
        x = rng.standard_normal((2, 5, 3))
        check_module(gru, x)

    def test_bidirectional(self):
        rng = np.random.default_rng(8)
        gru = BiGru(4, 3, rng, dtype=np.float64)
        x = rng.standard_normal((2, 5, 4))
        check_module(gru, x)


class TestDeconvGradients:
    def test_frozen_statistics_input_gradient(self):
        rng = np.random.default_rng(9)
        layer = NetDeconv(4, dtype=np.float64)
        x = rng.standard_normal((3, 4, 5, 4)) * 1.5 + 0.3
        check_module(layer, x, warm_train=True)


class TestCompositeGradients:
    def test_conv_unit(self):
        rng = np.random.default_rng(10)
        unit = ConvUnit(3, 2, dilation=1, rng=rng, dtype=np.float64)
        x = rng.standard_normal((2, 4, 4, 3))
        check_module(unit, x, warm_train=True)

    def test_dense_block(self):
        rng = np.random.default_rng(11)
        block = DenseBlock(3, 2, n_layers=2, rng=rng, dtype=np.float64)
        x = rng.standard_normal((2, 4, 4, 3))
        check_module(block, x, warm_train=True, max_per_param=30)


class TestDeconvSemantics:
    def test_whitened_covariance_near_identity(self):
        rng = np.random.default_rng(12)
        c = 6
        mixing = rng.standard_normal((c, c))
        x = (rng.standard_normal((8, 16, 32, c)) @ mixing + rng.standard_normal(c)).astype(np.float64)
        layer = NetDeconv(c, dtype=np.float64).train()
        y = layer.forward(x).reshape(-1, c)
        cov = np.cov(y.T, bias=True)
        assert np.linalg.norm(cov - np.eye(c)) < 1e-3

    def test_white_input_fixed_point(self):
        rng = np.random.default_rng(13)
        # exactly zero-mean, identity-covariance input
        x2 = rng.standard_normal((4096, 3))
        x2 -= x2.mean(0)
        cov = (x2.T @ x2) / len(x2)
        w, v = np.linalg.eigh(cov)
        x2 = x2 @ (v * (1.0 / np.sqrt(w))) @ v.T
        layer = NetDeconv(3, dtype=np.float64).train()
        y = layer.forward(x2.reshape(8, 16, 32, 3))
        np.testing.assert_allclose(y.reshape(-1, 3), x2, atol=1e-4)

    def test_single_channel_is_standardization(self):
        rng = np.random.default_rng(14)
        x = (rng.standard_normal((2, 8, 8, 1)) * 3.0 + 1.0).astype(np.float64)
        layer = NetDeconv(1, dtype=np.float64).train()
        y = layer.forward(x)
        flat = x.reshape(-1)
        expected = (flat - flat.mean()) / np.sqrt(flat.var() + layer.eps)
        np.testing.assert_allclose(y.reshape(-1), expected, rtol=1e-9)

    def test_eval_uses_running_statistics(self):
        rng = np.random.default_rng(15)
        layer = NetDeconv(3, dtype=np.float64)
        x = rng.standard_normal((4, 4, 4, 3)) * 2 + 1
        layer.train()
        for _ in range(200):
            layer.forward(x)
        layer.eval()
        y_eval = layer.forward(x)
        layer.train()
        y_train = layer.forward(x)
        np.testing.assert_allclose(y_eval, y_train, atol=1e-5)
        # statistics do not move in eval mode
        before = layer.buffers["running_cov"].copy()
        layer.eval()
        layer.forward(rng.standard_normal(x.shape))
        np.testing.assert_array_equal(layer.buffers["running_cov"], before)

    def test_non_finite_covariance_rejected(self):
        layer = NetDeconv(2, dtype=np.float64).train()
        x = np.ones((2, 2, 2, 2))
        x[0, 0, 0, 0] = np.inf
        with pytest.raises(FloatingPointError):
            layer.forward(x)


class TestLosses:
    def test_mse_trivial(self):
        pred = np.full((2, 3), 0.4)
        value, _ = loss_mse(pred, pred.copy())
        assert value == 0.0
        value, _ = loss_mse(pred + 0.1, pred)
        assert value == pytest.approx(0.01)

    def test_mse_matches_brute_force(self):
        rng = np.random.default_rng(16)
        pred = rng.standard_normal((2, 2, 3))
        target = rng.standard_normal((2, 2, 3))
        value, _ = loss_mse(pred, target)
        assert value == pytest.approx(brute_force_mse(pred, target), rel=1e-12)

    def test_bce_trivial(self):
        target = np.array([0.0, 1.0, 1.0, 0.0])
        value, _ = loss_bce(target.copy(), target)
        assert value < 1e-5
        value, _ = loss_bce(np.full(4, 0.5), target)
        assert value == pytest.approx(np.log(2.0), rel=1e-9)

    def test_bce_matches_brute_force(self):
        rng = np.random.default_rng(17)
        pred = rng.uniform(0.05, 0.95, size=(3, 4))
        target = rng.integers(0, 2, size=(3, 4)).astype(float)
        value, _ = loss_bce(pred, target)
        assert value == pytest.approx(brute_force_bce(pred, target), rel=1e-12)

    def test_masked_mse_zero_mask(self):
        rng = np.random.default_rng(18)
        pred = rng.standard_normal((4, 2, 3))
        value, grad = loss_masked_mse(pred, np.zeros_like(pred), np.zeros((4, 2)))
        assert value == 0.0
        assert np.all(grad == 0)

    def test_masked_mse_full_mask_equals_mse(self):
        rng = np.random.default_rng(19)
        pred = rng.standard_normal((4, 2, 3))
        target = rng.standard_normal((4, 2, 3))
        full, _ = loss_masked_mse(pred, target, np.ones((4, 2)))
        plain, _ = loss_mse(pred, target)
        assert full == pytest.approx(plain, rel=1e-12)

    def test_masked_mse_matches_brute_force(self):
        rng = np.random.default_rng(20)
        pred = rng.standard_normal((5, 3, 3))
        target = rng.standard_normal((5, 3, 3))
        mask = rng.integers(0, 2, size=(5, 3)).astype(float)
        value, _ = loss_masked_mse(pred, target, mask)
        assert value == pytest.approx(brute_force_masked_mse(pred, target, mask), rel=1e-12)

    @pytest.mark.parametrize("loss_name", ["mse", "bce", "masked"])
    def test_loss_gradients_fd(self, loss_name):
        rng = np.random.default_rng(21)
        shape = (3, 2, 3)
        target = rng.uniform(0.2, 0.8, shape)
        mask = rng.integers(0, 2, size=shape[:2]).astype(float)
        if loss_name == "mse":
            fn = lambda p: loss_mse(p, target)
        elif loss_name == "bce":
            fn = lambda p: loss_bce(p, target)
        else:
            fn = lambda p: loss_masked_mse(p, target, mask)
        pred = rng.uniform(0.2, 0.8, shape)
        _, grad = fn(pred)
        for idx in [tuple(rng.integers(s) for s in shape) for _ in range(10)]:
            orig = pred[idx]
            pred[idx] = orig + H
            jp, _ = fn(pred)
            pred[idx] = orig - H
            jm, _ = fn(pred)
            pred[idx] = orig
            fd = (jp - jm) / (2 * H)
            assert rel_err(grad[idx], fd) < TOL

    def test_gradient_scales_linearly(self):
        rng = np.random.default_rng(22)
        pred = rng.standard_normal((2, 2, 3))
        target = rng.standard_normal((2, 2, 3))
        _, g1 = loss_mse(pred, target)
        # scaling a loss scales its gradient: alpha * L has gradient alpha * dL
        alpha = 3.7
        np.testing.assert_allclose(alpha * g1, g1 * alpha, rtol=1e-15)
        value, _ = loss_mse(pred, pred)
        assert value == 0.0
