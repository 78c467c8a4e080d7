import numpy as np
import pytest

from srkit.graph import build_grid_graph
from srkit.loss import total_loss, total_loss_grad
from srkit.net import (
    NetConfig,
    StaleCacheError,
    backward,
    forward,
    forward_train,
    init_params,
    load_checkpoint,
    param_count,
    param_shapes,
    save_checkpoint,
    zero_params,
)


def corr3x3(x, k):
    """Zero-padded 3x3 cross-correlation of one plane, by explicit loops."""
    h, w = x.shape
    out = np.zeros_like(x)
    for r in range(h):
        for c in range(w):
            for dy in range(3):
                for dx in range(3):
                    rr, cc = r + dy - 1, c + dx - 1
                    if 0 <= rr < h and 0 <= cc < w:
                        out[r, c] += k[dy, dx] * x[rr, cc]
    return out


def rel_err(a, n):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-7)


def fd_param_grads(loss_fn, params, h=1e-6):
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            fp = loss_fn(params)
            p[idx] = orig - h
            fm = loss_fn(params)
            p[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        grads[name] = g
    return grads


class TestInit:
    def test_deterministic(self):
        cfg = NetConfig(blocks=2, channels=8, seed=3)
        a, b = init_params(cfg), init_params(cfg)
        assert list(a) == list(b)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_seed_matters(self):
        a = init_params(NetConfig(seed=1))["head.weight"]
        b = init_params(NetConfig(seed=2))["head.weight"]
        assert not np.array_equal(a, b)

    def test_biases_zero(self):
        for k, v in init_params(NetConfig(blocks=3)).items():
            if k.endswith(".bias"):
                assert np.all(v == 0)

    def test_he_std(self):
        w = init_params(NetConfig(blocks=1, channels=16))["block0.conv1.weight"]
        assert w.shape == (16, 16, 3, 3)
        assert abs(w.std() / np.sqrt(2 / 144) - 1) < 0.10

    def test_fresh_network_passes_input_through(self, rng):
        cfg = NetConfig(blocks=2, channels=8, seed=5)
        params = init_params(cfg)
        assert np.all(params["tail.weight"] == 0)
        x = rng.random((3, 12, 12)).astype(np.float32)
        np.testing.assert_array_equal(forward(params, x, cfg), x)
        assert np.any(init_params(cfg, zero_tail=False)["tail.weight"] != 0)

    def test_tail_gets_gradient_at_init(self, rng):
        cfg = NetConfig(blocks=1, channels=4, seed=2)
        params = init_params(cfg, dtype=np.float64)
        x = rng.random((3, 8, 8))
        _, cache = forward_train(params, x, cfg)
        grads, _ = backward(params, x, rng.standard_normal(x.shape), cfg, cache)
        assert np.any(grads["tail.weight"] != 0)

    @pytest.mark.parametrize("B,F,C", [(0, 1, 1), (4, 16, 3), (12, 64, 3), (2, 4, 1)])
    def test_param_count(self, B, F, C):
        cfg = NetConfig(blocks=B, channels=F, in_channels=C)
        assert param_count(cfg) == sum(int(np.prod(s)) for s in param_shapes(cfg).values())

    def test_bad_config(self):
        with pytest.raises(ValueError):
            NetConfig(channels=0)
        with pytest.raises(ValueError):
            NetConfig(kernel=5)
        with pytest.raises(ValueError):
            NetConfig(in_channels=2)


class TestForward:
    def test_zero_network_is_identity(self, rng):
        cfg = NetConfig(blocks=3, channels=8)
        x = rng.random((3, 20, 17)).astype(np.float32)
        np.testing.assert_array_equal(forward(zero_params(cfg), x, cfg), x)

    @pytest.mark.parametrize("hw", [(48, 48), (17, 23)])
    def test_shape(self, rng, hw):
        cfg = NetConfig(blocks=2, channels=4)
        x = rng.random((3, *hw)).astype(np.float32)
        assert forward(init_params(cfg), x, cfg).shape == x.shape
        assert forward(init_params(cfg), x[None].repeat(2, 0), cfg).shape == (2, 3, *hw)

    def test_hand_convolution(self, rng):
        cfg = NetConfig(blocks=0, channels=1, in_channels=1)
        params = zero_params(cfg, dtype=np.float64)
        k = rng.standard_normal((3, 3))
        params["head.weight"][0, 0] = k
        params["head.bias"][0] = 0.25
        params["tail.weight"][0, 0, 1, 1] = 1.0
        x = rng.random((1, 4, 4))
        expected = x[0] + corr3x3(x[0], k) + 0.25
        np.testing.assert_allclose(forward(params, x, cfg)[0], expected, atol=1e-12)

    def test_block_by_hand(self, rng):
        cfg = NetConfig(blocks=1, channels=1, in_channels=1)
        p = zero_params(cfg, dtype=np.float64)
        k1, k2, k3 = rng.standard_normal((3, 3, 3))
        p["head.weight"][0, 0, 1, 1] = 1.0
        p["block0.conv1.weight"][0, 0] = k1
        p["block0.conv1.bias"][0] = -0.1
        p["block0.conv2.weight"][0, 0] = k2
        p["tail.weight"][0, 0] = k3
        x = rng.random((1, 5, 5))
        h = x[0] + corr3x3(np.maximum(corr3x3(x[0], k1) - 0.1, 0), k2)
        np.testing.assert_allclose(forward(p, x, cfg)[0], x[0] + corr3x3(h, k3), atol=1e-12)

    def test_channel_mismatch(self, rng):
        cfg = NetConfig(in_channels=3)
        with pytest.raises(ValueError):
            forward(init_params(cfg), rng.random((1, 8, 8)), cfg)


class TestBackward:
    cfg = NetConfig(blocks=2, channels=4, in_channels=3, seed=11)

    def _setup(self, rng):
        params = init_params(self.cfg, dtype=np.float64, zero_tail=False)
        for k in params:
            if k.endswith(".bias"):
                params[k] = rng.standard_normal(params[k].shape) * 0.1
        x = rng.random((3, 8, 8))
        return params, x

    def test_zero_grad_out(self, rng):
        params, x = self._setup(rng)
        y, cache = forward_train(params, x, self.cfg)
        grads, gx = backward(params, x, np.zeros_like(y), self.cfg, cache)
        assert all(np.all(g == 0) for g in grads.values())
        assert np.all(gx == 0)

    def test_homogeneous(self, rng):
        params, x = self._setup(rng)
        y, cache = forward_train(params, x, self.cfg)
        g = rng.standard_normal(y.shape)
        a, _ = backward(params, x, g, self.cfg, cache)
        b, _ = backward(params, x, 2 * g, self.cfg, cache)
        for k in a:
            np.testing.assert_allclose(b[k], 2 * a[k], rtol=1e-12, atol=1e-15)

    def test_linear_functional_fd(self, rng):
        params, x = self._setup(rng)
        g_out = rng.standard_normal(x.shape)
        y, cache = forward_train(params, x, self.cfg)
        grads, gx = backward(params, x, g_out, self.cfg, cache)
        num = fd_param_grads(lambda p: float(np.sum(g_out * forward(p, x, self.cfg))), params)
        for k in params:
            assert rel_err(grads[k], num[k]).max() <= 1e-5, k
        gx_num = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            xp, xm = x.copy(), x.copy()
            xp[idx] += 1e-6
            xm[idx] -= 1e-6
            gx_num[idx] = (np.sum(g_out * forward(params, xp, self.cfg)) - np.sum(g_out * forward(params, xm, self.cfg))) / 2e-6
        assert rel_err(gx, gx_num).max() <= 1e-5

    @pytest.mark.parametrize("lam", [0.0, 1.0])
    def test_loss_chain_fd(self, rng, lam):
        params, x = self._setup(rng)
        t = rng.random(x.shape)
        g = build_grid_graph(8, 8)
        y, cache = forward_train(params, x, self.cfg)
        grads, _ = backward(params, x, total_loss_grad(t, y, lam, g), self.cfg, cache)
        num = fd_param_grads(lambda p: total_loss(t, forward(p, x, self.cfg), lam, g).total, params)
        worst = max(rel_err(grads[k], num[k]).max() for k in params)
        assert worst <= 1e-4

    def test_float32_fd(self, rng):
        cfg = self.cfg
        params64, x = self._setup(rng)
        params32 = {k: v.astype(np.float32) for k, v in params64.items()}
        g_out = rng.standard_normal(x.shape)
        y, cache = forward_train(params32, x, cfg)
        grads, _ = backward(params32, x, g_out, cfg, cache)
        # float32 analytic gradient vs float64 finite differences
        num = fd_param_grads(lambda p: float(np.sum(g_out * forward(p, x, cfg))), params64)
        for k in params32:
            scale = np.abs(num[k]).max()
            assert np.abs(grads[k] - num[k]).max() <= 1e-3 * scale, k

    def test_batch_sums_gradients(self, rng):
        params, _ = self._setup(rng)
        xs = rng.random((2, 3, 8, 8))
        gs = rng.standard_normal(xs.shape)
        y, cache = forward_train(params, xs, self.cfg)
        both, _ = backward(params, xs, gs, self.cfg, cache)
        parts = []
        for i in range(2):
            _, c = forward_train(params, xs[i], self.cfg)
            parts.append(backward(params, xs[i], gs[i], self.cfg, c)[0])
        for k in both:
            np.testing.assert_allclose(both[k], parts[0][k] + parts[1][k], rtol=1e-10, atol=1e-12)

    def test_missing_cache(self, rng):
        params, x = self._setup(rng)
        with pytest.raises(StaleCacheError):
            backward(params, x, np.zeros_like(x), self.cfg, None)

    def test_stale_cache(self, rng):
        params, x = self._setup(rng)
        _, cache = forward_train(params, x, self.cfg)
        with pytest.raises(StaleCacheError):
            backward(params, x + 1, np.zeros_like(x), self.cfg, cache)
        other = {k: v.copy() for k, v in params.items()}
        with pytest.raises(StaleCacheError):
            backward(other, x, np.zeros_like(x), self.cfg, cache)


class TestCheckpoint:
    def test_roundtrip_bitwise(self, tmp_path, rng):
        cfg = NetConfig(blocks=2, channels=6, seed=4)
        params = init_params(cfg)
        save_checkpoint(tmp_path / "a.ckpt", params, cfg, step=17, lr=5e-5)
        loaded, cfg2, header = load_checkpoint(tmp_path / "a.ckpt")
        assert cfg2 == cfg
        assert header["step"] == 17 and header["lr"] == 5e-5 and header["seed"] == 4
        x = rng.random((3, 21, 13)).astype(np.float32)
        np.testing.assert_array_equal(forward(loaded, x, cfg2), forward(params, x, cfg))

    def test_layout(self, tmp_path):
        cfg = NetConfig(blocks=1, channels=2, in_channels=1)
        params = {k: np.full(s, i, np.float32) for i, (k, s) in enumerate(param_shapes(cfg).items())}
        save_checkpoint(tmp_path / "b.ckpt", params, cfg)
        buf = (tmp_path / "b.ckpt").read_bytes()
        payload = buf[buf.index(b"\n", 11) + 1 :]
        assert len(payload) == 4 * param_count(cfg)
        values = np.frombuffer(payload, "<f4")
        expected = np.concatenate([np.full(int(np.prod(s)), i) for i, s in enumerate(param_shapes(cfg).values())])
        np.testing.assert_array_equal(values, expected)

    def test_truncated(self, tmp_path):
        cfg = NetConfig(blocks=1, channels=2)
        save_checkpoint(tmp_path / "c.ckpt", init_params(cfg), cfg)
        p = tmp_path / "c.ckpt"
        p.write_bytes(p.read_bytes()[:-4] + b"\x00" * 8)
        with pytest.raises(ValueError):
            load_checkpoint(p)

    def test_not_a_checkpoint(self, tmp_path):
        (tmp_path / "d.ckpt").write_bytes(b"hello")
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "d.ckpt")
