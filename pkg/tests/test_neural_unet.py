import numpy as np
import pytest

from albeam import ConfigurationError
from albeam.neural import UNet, UNetConfig, desk_unet_config, full_unet_config

TINY = UNetConfig(in_channels=4, stem_channels=4, out_channels=4)


def _naive_conv(conv, x):
    out_ch, in_ch, k, _ = conv.W.shape
    pad = k // 2
    height, width = x.shape[1:]
    out = np.zeros((out_ch, height, width))
    for o in range(out_ch):
        for r in range(height):
            for c in range(width):
                acc = conv.b[o]
                for ci in range(in_ch):
                    for kr in range(k):
                        for kc in range(k):
                            rr, cc = r + kr - pad, c + kc - pad
                            if 0 <= rr < height and 0 <= cc < width:
                                acc += conv.W[o, ci, kr, kc] * x[ci, rr, cc]
                out[o, r, c] = acc
    return out


def _naive_block(block, x, train):
    y = _naive_conv(block.conv, x)
    bn = block.bn
    z = np.empty_like(y)
    if train:
        for ch in range(y.shape[0]):
            mu = y[ch].mean()
            var = ((y[ch] - mu) ** 2).mean()
            z[ch] = bn.gamma[ch] * (y[ch] - mu) / np.sqrt(var + bn.eps) + bn.beta[ch]
    else:
        for ch in range(y.shape[0]):
            z[ch] = (bn.gamma[ch] * (y[ch] - bn.running_mean[ch])
                     / np.sqrt(bn.running_var[ch] + bn.eps) + bn.beta[ch])
    zh = z - z.mean(axis=0)
    return np.concatenate([np.maximum(zh, 0.0), np.maximum(-zh, 0.0)], axis=0)


def _naive_double(block, x, train):
    return _naive_block(block.c2, _naive_block(block.c1, x, train), train)


def _naive_pool(x):
    ch, height, width = x.shape
    out = np.empty((ch, height // 2, width // 2))
    for c in range(ch):
        for r in range(height // 2):
            for q in range(width // 2):
                out[c, r, q] = x[c, 2 * r: 2 * r + 2, 2 * q: 2 * q + 2].max()
    return out


def _naive_upsample(x):
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def _naive_forward(net, x, train):
    """Independent re-execution of the documented encoder-decoder wiring
    using per-layer loop arithmetic on the network's own parameters."""
    h = _naive_double(net.stem, x.astype(np.float64), train)
    skips = []
    for pool, down in zip(net.pools, net.down):
        skips.append(h)
        h = _naive_double(down, _naive_pool(h), train)
    for proj, conv in zip(net.up_proj, net.up_conv):
        skip = skips.pop()
        h = _naive_block(proj, _naive_upsample(h), train)
        h = _naive_double(conv, np.concatenate([h, skip], axis=0), train)
    return _naive_conv(net.final, h)


class TestUNetConfig:
    def test_round_trip(self):
        cfg = UNetConfig(in_channels=16, stem_channels=16, out_channels=16,
                         seed=3)
        assert UNetConfig.from_dict(cfg.to_dict()) == cfg

    def test_digest_tracks_every_field(self):
        base = desk_unet_config()
        assert base.digest() == desk_unet_config().digest()
        assert base.digest() != desk_unet_config(seed=1).digest()
        assert base.digest() != desk_unet_config(stem_channels=32).digest()

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            UNetConfig(in_channels=0, stem_channels=4, out_channels=4)
        with pytest.raises(ConfigurationError):
            UNetConfig(in_channels=4, stem_channels=5, out_channels=4)
        with pytest.raises(ConfigurationError):
            UNetConfig(in_channels=4, stem_channels=4, out_channels=4,
                       kernel=2)
        with pytest.raises(ConfigurationError):
            UNetConfig(in_channels=4, stem_channels=4, out_channels=4,
                       dtype="float16")

    def test_presets(self):
        desk = desk_unet_config()
        assert (desk.in_channels, desk.stem_channels, desk.out_channels) == (16, 16, 16)
        full = full_unet_config()
        assert (full.in_channels, full.stem_channels, full.out_channels) == (128, 64, 128)


class TestForwardShape:
    def test_desk_scale_preserves_shape(self):
        net = UNet(desk_unet_config())
        x = np.random.default_rng(0).standard_normal((16, 256, 64))
        assert net.forward(x).shape == (16, 256, 64)

    def test_small_sizes(self):
        net = UNet(TINY)
        for shape in [(4, 8, 8), (4, 16, 8), (4, 24, 32)]:
            assert net.forward(np.zeros(shape)).shape == shape

    def test_rejects_indivisible_extent(self):
        net = UNet(TINY)
        with pytest.raises(ConfigurationError):
            net.forward(np.zeros((4, 12, 8)))
        with pytest.raises(ConfigurationError):
            net.forward(np.zeros((4, 16, 20)))

    def test_rejects_wrong_channel_count(self):
        net = UNet(TINY)
        with pytest.raises(ConfigurationError):
            net.forward(np.zeros((3, 16, 8)))


class TestForwardValues:
    def test_zero_input_propagates_zero_biases(self):
        # Fresh biases are zero, so the constant field a zero input produces
        # is itself zero all the way through.
        net = UNet(TINY)
        out = net.forward(np.zeros((4, 16, 8)), train=True)
        assert not np.any(out)
        np.testing.assert_allclose(
            out, _naive_forward(net, np.zeros((4, 16, 8)), train=True),
            atol=1e-12)

    def test_matches_naive_oracle_eval_mode(self):
        net = UNet(TINY)
        x = np.random.default_rng(21).standard_normal((4, 16, 8))
        want = _naive_forward(net, x, train=False)
        got = net.forward(x, train=False)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_matches_naive_oracle_train_mode(self):
        net = UNet(TINY)
        x = np.random.default_rng(22).standard_normal((4, 16, 8))
        want = _naive_forward(net, x, train=True)
        got = net.forward(x, train=True)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_same_seed_same_network(self):
        x = np.random.default_rng(1).standard_normal((4, 16, 8))
        a = UNet(TINY).forward(x)
        b = UNet(TINY).forward(x)
        np.testing.assert_array_equal(a, b)

    def test_different_seed_different_network(self):
        x = np.random.default_rng(1).standard_normal((4, 16, 8))
        other = UNetConfig(in_channels=4, stem_channels=4, out_channels=4,
                           seed=9)
        assert np.any(UNet(TINY).forward(x) != UNet(other).forward(x))


class TestBackward:
    def test_input_gradient_matches_finite_differences(self):
        net = UNet(TINY)
        rng = np.random.default_rng(30)
        x = rng.standard_normal((4, 8, 8))
        probe = rng.standard_normal((4, 8, 8))

        net.zero_grads()
        net.forward(x, train=True)
        dx = net.backward(probe)

        fd = np.zeros_like(x)
        eps = 1e-6
        flat_x, flat_fd = x.ravel(), fd.ravel()
        for i in range(flat_x.size):
            orig = flat_x[i]
            flat_x[i] = orig + eps
            hi = float((net.forward(x, train=True) * probe).sum())
            flat_x[i] = orig - eps
            lo = float((net.forward(x, train=True) * probe).sum())
            flat_x[i] = orig
            flat_fd[i] = (hi - lo) / (2 * eps)
        err = np.max(np.abs(dx - fd)) / max(np.max(np.abs(fd)), 1e-8)
        assert err < 1e-4

    def test_parameter_gradients_match_finite_differences(self):
        net = UNet(TINY)
        rng = np.random.default_rng(31)
        x = rng.standard_normal((4, 8, 8))
        probe = rng.standard_normal((4, 8, 8))

        net.zero_grads()
        net.forward(x, train=True)
        net.backward(probe)
        grads = net.named_grads()
        params = dict(net.named_params())

        # Conv biases inside conv+BN blocks are deliberately absent here:
        # the normalization subtracts the per-channel mean, so those biases
        # cannot move the output (checked separately below).
        eps = 1e-6
        picks = ["stem.c1.conv.W", "stem.c2.bn.gamma", "down1.c1.bn.beta",
                 "up0.proj.conv.W", "up2.conv.c2.bn.beta", "final.W",
                 "final.b"]
        for name in picks:
            p = params[name]
            flat = p.ravel()
            idx = rng.integers(flat.size)
            orig = flat[idx]
            flat[idx] = orig + eps
            hi = float((net.forward(x, train=True) * probe).sum())
            flat[idx] = orig - eps
            lo = float((net.forward(x, train=True) * probe).sum())
            flat[idx] = orig
            fd = (hi - lo) / (2 * eps)
            got = grads[name].ravel()[idx]
            assert abs(got - fd) / max(abs(fd), 1e-8) < 1e-4, name

    def test_normalization_absorbs_preceding_conv_bias(self):
        net = UNet(TINY)
        rng = np.random.default_rng(33)
        x = rng.standard_normal((4, 8, 8))
        net.zero_grads()
        net.forward(x, train=True)
        net.backward(rng.standard_normal((4, 8, 8)))
        grads = net.named_grads()
        np.testing.assert_allclose(grads["stem.c1.conv.b"], 0.0, atol=1e-12)
        np.testing.assert_allclose(grads["down2.c2.conv.b"], 0.0, atol=1e-12)

    def test_gradients_accumulate_across_backward_calls(self):
        net = UNet(TINY)
        rng = np.random.default_rng(32)
        x = rng.standard_normal((4, 8, 8))
        probe = rng.standard_normal((4, 8, 8))

        net.zero_grads()
        net.forward(x, train=True)
        net.backward(probe)
        once = {k: v.copy() for k, v in net.named_grads().items()}
        net.forward(x, train=True)
        net.backward(probe)
        for k, v in net.named_grads().items():
            np.testing.assert_allclose(v, 2 * once[k], rtol=1e-12)


class TestIntrospection:
    def test_named_params_and_grads_align(self):
        net = UNet(TINY)
        params = net.named_params()
        grads = net.named_grads()
        assert len(params) == len(grads)
        for name, arr in params:
            assert grads[name].shape == arr.shape

    def test_num_params_counts_everything(self):
        net = UNet(TINY)
        assert net.num_params() == sum(a.size for _, a in net.named_params())

    def test_state_contains_running_stats(self):
        net = UNet(TINY)
        names = [n for n, _ in net.named_state()]
        assert names and all("running_" in n for n in names)
