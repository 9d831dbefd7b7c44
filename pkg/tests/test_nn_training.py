import numpy as np
import pytest

from lfakit import nn
from lfakit.nn import losses


def reduced_net(dtype=np.float64, seed=3):
    """8x8-input network with every production layer kind."""
    specs = [nn.conv(4), nn.pool(), nn.dropout(0.2), nn.conv(6), nn.flatten(),
             nn.dropout(0.2), nn.dense(8, nn.RELU), nn.dense(3, nn.SOFTMAX)]
    return nn.Network(specs, (8, 8, 1), seed=seed, dtype=dtype)


class TestCrossEntropy:
    def test_perfect_prediction_zero_loss(self):
        probs = np.array([[1.0, 0.0, 0.0]])
        onehot = np.array([[1.0, 0.0, 0.0]])
        assert losses.cross_entropy(probs, onehot) == 0.0

    def test_uniform_is_ln3(self):
        probs = np.full((4, 3), 1 / 3)
        onehot = nn.one_hot([0, 1, 2, 0], 3)
        assert losses.cross_entropy(probs, onehot) == pytest.approx(np.log(3), abs=1e-9)

    def test_hand_computed_batch(self):
        probs = np.array([[0.5, 0.3, 0.2], [0.25, 0.5, 0.25]])
        onehot = nn.one_hot([0, 0], 3)
        expect = (-np.log(0.5) - np.log(0.25)) / 2
        assert losses.cross_entropy(probs, onehot) == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(1.0397207708399179, abs=1e-12)

    def test_malformed_onehot_rejected(self):
        probs = np.full((1, 3), 1 / 3)
        with pytest.raises(ValueError):
            losses.cross_entropy(probs, np.array([[1.0, 1.0, 0.0]]))
        with pytest.raises(ValueError):
            losses.cross_entropy(probs, np.array([[0.0, 0.0, 0.0]]))

    def test_unnormalized_probs_rejected(self):
        with pytest.raises(ValueError):
            losses.cross_entropy(np.array([[0.9, 0.9, 0.9]]), nn.one_hot([0], 3))

    def test_clamp_keeps_loss_finite(self):
        probs = np.array([[0.0, 1.0, 0.0]])
        loss = losses.cross_entropy(probs, nn.one_hot([0], 3))
        assert np.isfinite(loss) and loss == pytest.approx(-np.log(1e-12))


class TestBackprop:
    def test_saturated_softmax_gives_zero_logit_gradient(self):
        # when the softmax output equals the one-hot target exactly, the
        # pre-activation gradient (p - y)/B vanishes identically
        layer = nn.Dense(4, 3, nn.SOFTMAX, rng=np.random.default_rng(0))
        x = np.random.default_rng(1).random((2, 4), dtype=np.float32)
        onehot = nn.one_hot([1, 2], 3)
        dprobs = losses.cross_entropy_grad(onehot.astype(np.float32), onehot)
        _, grads = layer.backward(dprobs, (x, onehot.astype(np.float32)))
        np.testing.assert_array_equal(grads["w"], np.zeros_like(grads["w"]))
        np.testing.assert_array_equal(grads["b"], np.zeros_like(grads["b"]))

    def test_gradient_shapes_mirror_parameters(self):
        net = reduced_net()
        x = np.random.default_rng(0).random((4, 8, 8, 1))
        y = nn.one_hot([0, 1, 2, 0], 3)
        _, grads = nn.backprop(net, x, y, rng=np.random.default_rng(5))
        params = net.param_dict()
        assert set(grads) == set(params)
        for name in params:
            assert grads[name].shape == params[name].shape

    def test_finite_difference_oracle(self):
        net = reduced_net()
        x = np.random.default_rng(2).random((4, 8, 8, 1))
        y = nn.one_hot([0, 1, 2, 0], 3)
        err = nn.gradcheck_network(net, x, y, coordinate_count=100, h=1e-3, seed=0)
        assert err < 1e-4

    def test_deterministic_given_rng_seed(self):
        net = reduced_net(dtype=np.float32)
        x = np.random.default_rng(0).random((4, 8, 8, 1), dtype=np.float32)
        y = nn.one_hot([0, 1, 2, 0], 3)
        l1, g1 = nn.backprop(net, x, y, rng=np.random.default_rng(42))
        l2, g2 = nn.backprop(net, x, y, rng=np.random.default_rng(42))
        assert l1 == l2
        for k in g1:
            np.testing.assert_array_equal(g1[k], g2[k])

    def test_inference_forward_is_pure(self):
        net = reduced_net(dtype=np.float32)
        x = np.random.default_rng(0).random((4, 8, 8, 1), dtype=np.float32)
        a = net.forward(x)
        b = net.forward(x)
        np.testing.assert_array_equal(a, b)

    def test_class_weights_reweight_loss(self):
        probs = np.array([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25]])
        onehot = nn.one_hot([0, 1], 3)
        plain = losses.cross_entropy(probs, onehot)
        assert plain == pytest.approx((-np.log(0.5) - np.log(0.5)) / 2)
        # both samples hit classes with equal weight -> same value
        same = losses.cross_entropy(probs, onehot, class_weights=[2.0, 2.0, 2.0])
        assert same == pytest.approx(plain)


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        params = {"w": np.array([1.0, -2.0], dtype=np.float32)}
        grads = {"w": np.zeros(2, dtype=np.float32)}
        state = nn.init_adam(params, lr=1e-3)
        before = params["w"].copy()
        nn.adam_step(params, grads, state)
        np.testing.assert_array_equal(params["w"], before)
        assert state.t == 1

    def test_first_step_hand_derivation(self):
        # theta=1, g=1: mhat=vhat=1 -> theta - lr * 1/(1 + eps)
        params = {"w": np.array([1.0], dtype=np.float64)}
        grads = {"w": np.array([1.0], dtype=np.float64)}
        state = nn.init_adam(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8)
        nn.adam_step(params, grads, state)
        expect = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8))
        assert params["w"][0] == pytest.approx(expect, abs=1e-15)

    def test_two_identical_runs_bitwise_identical(self):
        def run():
            net = reduced_net(dtype=np.float32, seed=9)
            params = net.param_dict()
            state = nn.init_adam(params)
            x = np.random.default_rng(1).random((4, 8, 8, 1), dtype=np.float32)
            y = nn.one_hot([0, 1, 2, 0], 3)
            rng = np.random.default_rng(7)
            for _ in range(5):
                _, grads = nn.backprop(net, x, y, rng=rng)
                nn.adam_step(params, grads, state)
            return net.copy_params()

        a, b = run(), run()
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_shape_mismatch_rejected(self):
        params = {"w": np.zeros(3, dtype=np.float32)}
        state = nn.init_adam(params)
        with pytest.raises(ValueError):
            nn.adam_step(params, {"w": np.zeros(4, dtype=np.float32)}, state)

    def test_nonpositive_lr_rejected(self):
        with pytest.raises(ValueError):
            nn.AdamState(lr=0.0)


class TestGradcheck:
    def test_quadratic_closed_form(self):
        # f(x) = 0.5 * ||x||^2 has gradient exactly x
        def fn(params):
            x = params["x"]
            return 0.5 * float(np.sum(x * x)), {"x": x.copy()}

        params = {"x": np.random.default_rng(0).normal(size=(10,))}
        err = nn.gradcheck_function(fn, params, coordinate_count=10, h=1e-3, seed=0)
        assert err < 1e-7

    def test_error_monotone_in_h_on_quadratic(self):
        def fn(params):
            x = params["x"]
            return 0.5 * float(np.sum(x * x)), {"x": x.copy()}

        params = {"x": np.random.default_rng(1).normal(size=(10,))}
        errs = [nn.gradcheck_function(fn, params, coordinate_count=10, h=h, seed=0)
                for h in (1e-4, 1e-3, 1e-2, 1e-1)]
        for lo, hi in zip(errs, errs[1:]):
            assert hi >= lo - 1e-9

    def test_dropout_disabled_during_check(self):
        # with dropout active the check would be meaningless; the harness
        # runs the deterministic inference-mode loss
        net = reduced_net()
        x = np.random.default_rng(2).random((2, 8, 8, 1))
        y = nn.one_hot([0, 1], 3)
        e1 = nn.gradcheck_network(net, x, y, coordinate_count=20, h=1e-3, seed=1)
        e2 = nn.gradcheck_network(net, x, y, coordinate_count=20, h=1e-3, seed=1)
        assert e1 == e2
