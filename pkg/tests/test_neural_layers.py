import numpy as np
import pytest

from albeam import ConfigurationError
from albeam.neural import (Adam, AntiRectifier, BatchNorm2d, Conv2d,
                           ConvBNAct, DoubleConv, MaxPool2x2, TrainConfig,
                           UpsampleNearest2x)

DT = np.float64


def _fd_input_grad(layer, x, probe, eps=1e-6):
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + eps
        hi = float((layer.forward(x, train=True) * probe).sum())
        flat_x[i] = orig - eps
        lo = float((layer.forward(x, train=True) * probe).sum())
        flat_x[i] = orig
        flat_g[i] = (hi - lo) / (2 * eps)
    return grad


def _fd_param_grad(layer, x, probe, param, eps=1e-6):
    grad = np.zeros_like(param)
    flat_p = param.ravel()
    flat_g = grad.ravel()
    for i in range(flat_p.size):
        orig = flat_p[i]
        flat_p[i] = orig + eps
        hi = float((layer.forward(x, train=True) * probe).sum())
        flat_p[i] = orig - eps
        lo = float((layer.forward(x, train=True) * probe).sum())
        flat_p[i] = orig
        flat_g[i] = (hi - lo) / (2 * eps)
    return grad


def _assert_close(got, want, tol=1e-4):
    scale = max(float(np.max(np.abs(want))), 1e-8)
    err = float(np.max(np.abs(got - want))) / scale
    assert err < tol, f"max relative gradient error {err:.3e}"


def _zero_grads(layer):
    for _, g in layer.grad_items():
        g[...] = 0.0


class TestConv2d:
    def test_matches_naive_loop(self):
        rng = np.random.default_rng(3)
        conv = Conv2d(2, 3, 3, rng, DT)
        conv.b[:] = rng.standard_normal(3)
        x = rng.standard_normal((2, 4, 4))
        out = conv.forward(x, train=False)

        oracle = np.zeros((3, 4, 4))
        for o in range(3):
            for r in range(4):
                for c in range(4):
                    acc = conv.b[o]
                    for ci in range(2):
                        for kr in range(3):
                            for kc in range(3):
                                rr, cc = r + kr - 1, c + kc - 1
                                if 0 <= rr < 4 and 0 <= cc < 4:
                                    acc += conv.W[o, ci, kr, kc] * x[ci, rr, cc]
                    oracle[o, r, c] = acc
        np.testing.assert_allclose(out, oracle, atol=1e-12)
        np.testing.assert_allclose(out.astype(np.float32),
                                   oracle.astype(np.float32), atol=1e-6)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(4)
        conv = Conv2d(3, 2, 3, rng, DT)
        x = rng.standard_normal((3, 6, 5))
        probe = rng.standard_normal((2, 6, 5))
        _zero_grads(conv)
        conv.forward(x, train=True)
        dx = conv.backward(probe)
        _assert_close(dx, _fd_input_grad(conv, x, probe))
        _assert_close(conv.dW, _fd_param_grad(conv, x, probe, conv.W))
        _assert_close(conv.db, _fd_param_grad(conv, x, probe, conv.b))

    def test_one_by_one_kernel(self):
        rng = np.random.default_rng(5)
        conv = Conv2d(4, 2, 1, rng, DT)
        x = rng.standard_normal((4, 3, 3))
        out = conv.forward(x, train=False)
        oracle = np.einsum("oi,ihw->ohw", conv.W[:, :, 0, 0], x)
        np.testing.assert_allclose(out, oracle, atol=1e-12)

    def test_he_uniform_bound(self):
        conv = Conv2d(8, 8, 3, np.random.default_rng(0), DT)
        limit = np.sqrt(6.0 / (8 * 9))
        assert np.all(np.abs(conv.W) <= limit)
        assert not np.any(conv.b)

    def test_rejects_wrong_channels(self):
        conv = Conv2d(2, 3, 3, np.random.default_rng(0), DT)
        with pytest.raises(ConfigurationError):
            conv.forward(np.zeros((5, 4, 4)), train=False)


class TestBatchNorm2d:
    def test_matches_naive_normalization(self):
        rng = np.random.default_rng(6)
        bn = BatchNorm2d(3, DT)
        bn.gamma[:] = [0.5, 2.0, 1.5]
        bn.beta[:] = [0.1, -0.2, 0.0]
        x = rng.standard_normal((3, 5, 4))
        out = bn.forward(x, train=True)
        for ch in range(3):
            vals = x[ch]
            mu = vals.mean()
            var = ((vals - mu) ** 2).mean()  # biased, matching train stats
            want = bn.gamma[ch] * (vals - mu) / np.sqrt(var + bn.eps) + bn.beta[ch]
            np.testing.assert_allclose(out[ch], want, atol=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        bn = BatchNorm2d(4, DT)
        bn.gamma[:] = rng.uniform(0.5, 1.5, 4)
        bn.beta[:] = rng.standard_normal(4)
        x = rng.standard_normal((4, 6, 6))
        probe = rng.standard_normal((4, 6, 6))
        _zero_grads(bn)
        bn.forward(x, train=True)
        dx = bn.backward(probe)
        _assert_close(dx, _fd_input_grad(bn, x, probe))
        _assert_close(bn.dgamma, _fd_param_grad(bn, x, probe, bn.gamma))
        _assert_close(bn.dbeta, _fd_param_grad(bn, x, probe, bn.beta))

    def test_running_stats_exponential_average(self):
        rng = np.random.default_rng(8)
        bn = BatchNorm2d(2, DT, momentum=0.9)
        x1 = rng.standard_normal((2, 4, 4))
        x2 = rng.standard_normal((2, 4, 4))
        bn.forward(x1, train=True)
        bn.forward(x2, train=True)
        mu1, mu2 = x1.mean(axis=(1, 2)), x2.mean(axis=(1, 2))
        want = 0.9 * (0.9 * 0.0 + 0.1 * mu1) + 0.1 * mu2
        np.testing.assert_allclose(bn.running_mean, want, atol=1e-12)

    def test_eval_uses_running_stats(self):
        rng = np.random.default_rng(9)
        bn = BatchNorm2d(2, DT)
        for _ in range(5):
            bn.forward(rng.standard_normal((2, 8, 8)), train=True)
        x = rng.standard_normal((2, 8, 8))
        out = bn.forward(x, train=False)
        want = (x - bn.running_mean[:, None, None]) / np.sqrt(
            bn.running_var[:, None, None] + bn.eps)
        np.testing.assert_allclose(out, want, atol=1e-12)


class TestAntiRectifier:
    def test_splits_negative_value(self):
        # Post mean-subtraction value of -3 lands as (0, 3) in the two halves.
        act = AntiRectifier(2)
        x = np.zeros((2, 1, 1))
        x[0, 0, 0] = -3.0
        x[1, 0, 0] = 3.0  # keeps the channel mean at zero
        out = act.forward(x, train=False)
        assert out[0, 0, 0] == 0.0 and out[2, 0, 0] == 3.0
        assert out[1, 0, 0] == 3.0 and out[3, 0, 0] == 0.0

    def test_constant_channels_go_dark(self):
        act = AntiRectifier(3)
        out = act.forward(np.full((3, 4, 4), 7.5), train=False)
        assert not np.any(out)

    def test_doubles_channels(self):
        act = AntiRectifier(5)
        assert act.forward(np.zeros((5, 2, 2)), train=False).shape == (10, 2, 2)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        act = AntiRectifier(4)
        x = rng.standard_normal((4, 5, 5))
        probe = rng.standard_normal((8, 5, 5))
        act.forward(x, train=True)
        dx = act.backward(probe)
        _assert_close(dx, _fd_input_grad(act, x, probe))


class TestMaxPool:
    def test_matches_blockwise_max(self):
        rng = np.random.default_rng(11)
        pool = MaxPool2x2(3)
        x = rng.standard_normal((3, 8, 6))
        out = pool.forward(x, train=False)
        for ch in range(3):
            for r in range(4):
                for c in range(3):
                    block = x[ch, 2 * r: 2 * r + 2, 2 * c: 2 * c + 2]
                    assert out[ch, r, c] == block.max()

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        pool = MaxPool2x2(2)
        x = rng.standard_normal((2, 6, 6))
        probe = rng.standard_normal((2, 3, 3))
        pool.forward(x, train=True)
        dx = pool.backward(probe)
        _assert_close(dx, _fd_input_grad(pool, x, probe))

    def test_gradient_routes_to_single_argmax(self):
        pool = MaxPool2x2(1)
        x = np.array([[[1.0, 2.0], [4.0, 3.0]]])
        pool.forward(x, train=True)
        dx = pool.backward(np.array([[[1.0]]]))
        np.testing.assert_array_equal(dx, [[[0.0, 0.0], [1.0, 0.0]]])

    def test_rejects_odd_extent(self):
        pool = MaxPool2x2(1)
        with pytest.raises(ConfigurationError):
            pool.forward(np.zeros((1, 5, 4)), train=False)


class TestUpsample:
    def test_repeats_pixels(self):
        up = UpsampleNearest2x(1)
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out = up.forward(x, train=False)
        np.testing.assert_array_equal(
            out, [[[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]]])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        up = UpsampleNearest2x(2)
        x = rng.standard_normal((2, 3, 4))
        probe = rng.standard_normal((2, 6, 8))
        up.forward(x, train=True)
        dx = up.backward(probe)
        _assert_close(dx, _fd_input_grad(up, x, probe))

    def test_pool_is_left_inverse_on_distinct_pixels(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((3, 4, 4))
        up = UpsampleNearest2x(3)
        pool = MaxPool2x2(3)
        np.testing.assert_array_equal(
            pool.forward(up.forward(x, train=False), train=False), x)


class TestComposites:
    def test_conv_bn_act_matches_naive_pipeline(self):
        rng = np.random.default_rng(15)
        block = ConvBNAct(2, 4, 3, rng, DT)
        x = rng.standard_normal((2, 4, 4))
        out = block.forward(x, train=True)
        assert out.shape == (4, 4, 4)

        conv, bn, act = block.conv, block.bn, block.act
        y = np.zeros((2, 4, 4))
        for o in range(2):
            for r in range(4):
                for c in range(4):
                    acc = conv.b[o]
                    for ci in range(2):
                        for kr in range(3):
                            for kc in range(3):
                                rr, cc = r + kr - 1, c + kc - 1
                                if 0 <= rr < 4 and 0 <= cc < 4:
                                    acc += conv.W[o, ci, kr, kc] * x[ci, rr, cc]
                    y[o, r, c] = acc
        z = np.empty_like(y)
        for ch in range(2):
            mu = y[ch].mean()
            var = ((y[ch] - mu) ** 2).mean()
            z[ch] = bn.gamma[ch] * (y[ch] - mu) / np.sqrt(var + bn.eps) + bn.beta[ch]
        zh = z - z.mean(axis=0)
        oracle = np.concatenate([np.maximum(zh, 0), np.maximum(-zh, 0)], axis=0)
        np.testing.assert_allclose(out.astype(np.float32),
                                   oracle.astype(np.float32), atol=1e-6)

    def test_conv_bn_act_gradient(self):
        rng = np.random.default_rng(16)
        block = ConvBNAct(2, 4, 3, rng, DT)
        x = rng.standard_normal((2, 6, 4))
        probe = rng.standard_normal((4, 6, 4))
        for _, g in block.conv.grad_items():
            g[...] = 0.0
        for _, g in block.bn.grad_items():
            g[...] = 0.0
        block.forward(x, train=True)
        dx = block.backward(probe)
        _assert_close(dx, _fd_input_grad(block, x, probe))
        _assert_close(block.conv.dW,
                      _fd_param_grad(block, x, probe, block.conv.W))
        _assert_close(block.bn.dgamma,
                      _fd_param_grad(block, x, probe, block.bn.gamma))

    def test_double_conv_gradient(self):
        rng = np.random.default_rng(17)
        block = DoubleConv(3, 4, 3, rng, DT)
        x = rng.standard_normal((3, 4, 4))
        out = block.forward(x, train=True)
        assert out.shape == (4, 4, 4)
        probe = rng.standard_normal(out.shape)
        dx = block.backward(probe)
        _assert_close(dx, _fd_input_grad(block, x, probe))


class TestAdam:
    def test_first_step_is_signed_learning_rate(self):
        cfg = TrainConfig(learning_rate=1e-3)
        opt = Adam(cfg)
        p = np.array([1.0, -2.0, 0.5])
        g = np.array([0.3, -0.7, 2.0])
        before = p.copy()
        opt.step([("p", p)], {"p": g})
        delta = p - before
        np.testing.assert_allclose(delta, -1e-3 * np.sign(g), rtol=1e-4)

    def test_zero_gradient_keeps_parameters(self):
        opt = Adam(TrainConfig())
        p = np.array([1.0, 2.0])
        opt.step([("p", p)], {"p": np.zeros(2)})
        np.testing.assert_array_equal(p, [1.0, 2.0])

    def test_deterministic_trajectory(self):
        def run():
            opt = Adam(TrainConfig())
            p = np.array([0.5, -0.5])
            for i in range(10):
                g = np.array([np.sin(i + 1.0), np.cos(i)]) * p
                opt.step([("p", p)], {"p": g})
            return p
        np.testing.assert_array_equal(run(), run())

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigurationError):
            TrainConfig(batch_size=2)
        with pytest.raises(ConfigurationError):
            TrainConfig(loss_domain="pixels")

    def test_config_round_trip(self):
        cfg = TrainConfig(learning_rate=5e-4, loss_domain="rf")
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg
