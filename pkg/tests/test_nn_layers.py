import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfakit import nn
from lfakit.nn import layers as L


def conv_ref(x, w, b):
    """Nested-loop valid convolution, the independent oracle."""
    bs, h, ww, c = x.shape
    kh, kw, _, co = w.shape
    oh, ow = h - kh + 1, ww - kw + 1
    out = np.zeros((bs, oh, ow, co))
    for n in range(bs):
        for i in range(oh):
            for j in range(ow):
                for o in range(co):
                    out[n, i, j, o] = b[o] + np.sum(
                        x[n, i:i + kh, j:j + kw, :] * w[:, :, :, o])
    return out


def pool_ref(x):
    bs, h, w, c = x.shape
    oh, ow = h // 2, w // 2
    out = np.zeros((bs, oh, ow, c))
    for n in range(bs):
        for i in range(oh):
            for j in range(ow):
                out[n, i, j] = x[n, 2 * i:2 * i + 2, 2 * j:2 * j + 2].max(axis=(0, 1))
    return out


def make_conv(cin, co, kernel=(3, 3), activation=L.NONE, seed=0):
    rng = np.random.default_rng(seed)
    layer = L.Conv2D(cin, co, kernel, activation, rng=rng)
    return layer


class TestConv2D:
    def test_table2_first_layer_shape(self):
        layer = make_conv(1, 128)
        x = np.zeros((32, 128, 128, 1), dtype=np.float32)
        assert layer.forward(x).shape == (32, 126, 126, 128)

    def test_identity_kernel(self):
        layer = make_conv(1, 1, kernel=(1, 1))
        layer.w[...] = 1.0
        layer.b[...] = 0.0
        x = np.random.default_rng(0).random((2, 5, 5, 1), dtype=np.float32)
        out = layer.forward(x)
        np.testing.assert_array_equal(out, x)

    def test_all_ones_kernel_sums_input(self):
        layer = make_conv(1, 1)
        layer.w[...] = 1.0
        layer.b[...] = 0.0
        x = np.arange(1, 10, dtype=np.float32).reshape(1, 3, 3, 1)
        out = layer.forward(x)
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == 45.0

    def test_channel_mismatch_raises(self):
        layer = make_conv(3, 4)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 5, 5, 2), dtype=np.float32))

    def test_input_smaller_than_kernel_raises(self):
        layer = make_conv(1, 4)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 2, 2, 1), dtype=np.float32))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(3, 6), st.integers(3, 6),
           st.integers(1, 3), st.integers(1, 4), st.integers(1, 3),
           st.integers(1, 3), st.integers(0, 2 ** 31 - 1))
    def test_matches_nested_loop_oracle(self, bs, h, w, cin, co, kh, kw, seed):
        if h < kh or w < kw:
            return
        rng = np.random.default_rng(seed)
        layer = make_conv(cin, co, (kh, kw), seed=seed)
        layer.b[...] = rng.normal(size=co).astype(np.float32)
        x = rng.normal(size=(bs, h, w, cin)).astype(np.float32)
        np.testing.assert_allclose(layer.forward(x),
                                   conv_ref(x, layer.w, layer.b),
                                   rtol=1e-5, atol=1e-5)

    def test_relu_clamps_and_masks(self):
        layer = make_conv(1, 2, kernel=(1, 1), activation=L.RELU)
        layer.w[0, 0, 0] = [1.0, -1.0]
        x = np.ones((1, 2, 2, 1), dtype=np.float32)
        out = layer.forward(x)
        assert (out[..., 0] == 1).all() and (out[..., 1] == 0).all()


class TestMaxPool2D:
    def test_table2_shapes(self):
        p = L.MaxPool2D()
        assert p.forward(np.zeros((32, 126, 126, 128), np.float32)).shape == (32, 63, 63, 128)
        assert p.forward(np.zeros((2, 61, 61, 8), np.float32)).shape == (2, 30, 30, 8)

    def test_simple_window(self):
        p = L.MaxPool2D()
        x = np.array([[1, 2], [3, 4]], dtype=np.float32).reshape(1, 2, 2, 1)
        assert p.forward(x)[0, 0, 0, 0] == 4.0

    def test_too_small_raises(self):
        with pytest.raises(ValueError):
            L.MaxPool2D().forward(np.zeros((1, 1, 4, 1), np.float32))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(2, 7), st.integers(2, 7),
           st.integers(1, 3), st.integers(0, 2 ** 31 - 1))
    def test_matches_naive_oracle(self, bs, h, w, c, seed):
        x = np.random.default_rng(seed).normal(size=(bs, h, w, c)).astype(np.float32)
        np.testing.assert_array_equal(L.MaxPool2D().forward(x), pool_ref(x))

    def test_backward_routes_to_first_max_on_ties(self):
        p = L.MaxPool2D()
        x = np.full((1, 2, 2, 1), 7.0, dtype=np.float32)
        cache = []
        p.forward(x, cache=cache)
        dx, _ = p.backward(np.ones((1, 1, 1, 1), np.float32), cache[0])
        expect = np.zeros_like(x)
        expect[0, 0, 0, 0] = 1.0
        np.testing.assert_array_equal(dx, expect)

    def test_backward_odd_crop_gets_zero_gradient(self):
        p = L.MaxPool2D()
        x = np.random.default_rng(0).random((1, 5, 5, 2), dtype=np.float32)
        cache = []
        out = p.forward(x, cache=cache)
        dx, _ = p.backward(np.ones_like(out), cache[0])
        assert dx.shape == x.shape
        assert (dx[:, 4, :, :] == 0).all() and (dx[:, :, 4, :] == 0).all()
        assert dx.sum() == out.size


class TestDropout:
    def test_inference_is_identity(self):
        d = L.Dropout(0.2)
        x = np.random.default_rng(0).random((4, 10), dtype=np.float32)
        np.testing.assert_array_equal(d.forward(x, training=False), x)

    def test_training_zeroes_about_rate_and_rescales(self):
        # binomial test at p < 0.001: |k - n*rate| < 3.29 * sqrt(n*rate*(1-rate))
        d = L.Dropout(0.2)
        n = 200_000
        x = np.ones((1, n), dtype=np.float32)
        out = d.forward(x, training=True, rng=np.random.default_rng(11))
        zeros = int((out == 0).sum())
        bound = 3.29 * np.sqrt(n * 0.2 * 0.8)
        assert abs(zeros - 0.2 * n) < bound
        survivors = out[out != 0]
        np.testing.assert_allclose(survivors, 1.0 / 0.8, rtol=1e-6)

    def test_bad_rate_rejected(self):
        with pytest.raises(ValueError):
            L.Dropout(1.0)
        with pytest.raises(ValueError):
            L.Dropout(-0.1)

    def test_training_requires_rng(self):
        with pytest.raises(ValueError):
            L.Dropout(0.2).forward(np.ones((1, 4), np.float32), training=True)


class TestDense:
    def test_table2_shape(self):
        layer = L.Dense(128, 16, L.RELU, rng=np.random.default_rng(0))
        assert layer.forward(np.zeros((32, 128), np.float32)).shape == (32, 16)

    def test_zero_weights_gives_bias(self):
        layer = L.Dense(3, 4)
        layer.b[...] = [1, 2, 3, 4]
        out = layer.forward(np.random.default_rng(0).random((5, 3), dtype=np.float32))
        np.testing.assert_array_equal(out, np.tile([1, 2, 3, 4], (5, 1)).astype(np.float32))

    def test_matches_nested_loop_matmul(self):
        rng = np.random.default_rng(3)
        layer = L.Dense(3, 2, rng=rng)
        x = rng.normal(size=(2, 3)).astype(np.float32)
        expect = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(3):
                    expect[i, j] += x[i, k] * layer.w[k, j]
        np.testing.assert_allclose(layer.forward(x), expect, atol=1e-6)

    def test_dim_mismatch_raises(self):
        with pytest.raises(ValueError):
            L.Dense(3, 2).forward(np.zeros((1, 4), np.float32))


class TestSoftmax:
    def test_uniform_on_zeros(self):
        np.testing.assert_allclose(L.softmax(np.zeros((1, 3))), [[1 / 3] * 3])

    def test_known_values(self):
        # direct high-precision exponentiation: e^2, e^1, e^0 normalized
        out = L.softmax(np.array([[2.0, 1.0, 0.0]]))
        np.testing.assert_allclose(
            out, [[0.6652409557748219, 0.24472847105479767, 0.09003057317038046]],
            atol=1e-7)

    # logit gaps are capped so no entry saturates to exactly 0.0 or 1.0
    # in float64 (a gap of ~37 rounds the winner up to 1.0)
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-15, 15), min_size=2, max_size=8),
           st.floats(-50, 50))
    def test_shift_invariance_and_normalization(self, row, c):
        z = np.array([row])
        a = L.softmax(z)
        b = L.softmax(z + c)
        np.testing.assert_allclose(a, b, atol=1e-6)
        assert abs(a.sum() - 1.0) < 1e-6
        assert (a > 0).all() and (a < 1).all()

    def test_single_class_degenerates_to_one(self):
        np.testing.assert_array_equal(L.softmax(np.array([[5.0]])), [[1.0]])

    def test_large_logits_stable(self):
        out = L.softmax(np.array([[1000.0, 999.0, 0.0]], dtype=np.float32))
        assert np.isfinite(out).all()
