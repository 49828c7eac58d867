"""Elementwise layers and the masked BCE loss."""

import numpy as np
import pytest

from wetlandseg.errors import EmptySupportError
from wetlandseg.nn import (
    bce_loss,
    dropout,
    dropout_backward,
    grad_check,
    leaky_relu,
    leaky_relu_backward,
    sigmoid,
    sigmoid_backward,
)


class TestLeakyRelu:
    def test_positive_identity(self):
        assert leaky_relu(np.array(2.0), 0.01) == 2.0

    def test_negative_scaled(self):
        assert leaky_relu(np.array(-3.0), 0.01) == pytest.approx(-0.03)

    def test_slope_validated(self):
        with pytest.raises(ValueError):
            leaky_relu(np.zeros(3), slope=0.0)
        with pytest.raises(ValueError):
            leaky_relu(np.zeros(3), slope=1.0)

    def test_backward_matches_finite_differences(self, rng):
        x = rng.normal(size=(2, 2, 4, 4))
        x[np.abs(x) < 0.1] = 0.5  # keep away from the kink
        proj = rng.normal(size=x.shape)
        analytic = leaky_relu_backward(x, proj, 0.01)

        def fn(inputs):
            return float(np.sum(leaky_relu(inputs[0], 0.01) * proj))

        report = grad_check(fn, [x], [analytic])
        assert report.passed(1e-6), str(report)


class TestDropout:
    def test_eval_mode_is_identity(self, rng):
        x = rng.normal(size=(2, 3, 5, 5))
        out, mask = dropout(x, 0.3, mode="eval", rng_seed=1)
        assert np.array_equal(out, x)
        assert np.array_equal(mask, np.ones_like(x))

    def test_rate_zero_keeps_everything(self, rng):
        x = rng.normal(size=(4, 4))
        out, mask = dropout(x, 0.0, mode="train", rng_seed=1)
        assert np.array_equal(out, x)
        assert np.array_equal(mask, np.ones_like(x))

    def test_drop_fraction_near_rate(self):
        x = np.ones(1_000_000)
        _, mask = dropout(x, 0.3, mode="train", rng_seed=99)
        dropped = np.mean(mask == 0)
        assert abs(dropped - 0.3) < 0.002

    def test_survivors_scaled(self):
        x = np.ones(1000)
        out, mask = dropout(x, 0.25, mode="train", rng_seed=5)
        survivors = out[mask != 0]
        assert np.allclose(survivors, 1.0 / 0.75)

    def test_same_seed_bit_identical(self, rng):
        x = rng.normal(size=(3, 3, 8, 8))
        out1, mask1 = dropout(x, 0.3, mode="train", rng_seed=7)
        out2, mask2 = dropout(x, 0.3, mode="train", rng_seed=7)
        assert np.array_equal(out1, out2) and np.array_equal(mask1, mask2)

    def test_backward_applies_mask(self, rng):
        x = rng.normal(size=(2, 8))
        _, mask = dropout(x, 0.5, mode="train", rng_seed=3)
        grad = rng.normal(size=x.shape)
        assert np.array_equal(dropout_backward(grad, mask), grad * mask)


class TestSigmoid:
    def test_zero_maps_to_half(self):
        assert sigmoid(np.array(0.0)) == 0.5

    def test_saturation_is_finite(self):
        out = sigmoid(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(out))
        assert 0.0 <= out[0] <= 1e-300
        assert out[1] == 1.0

    def test_backward_matches_finite_differences(self, rng):
        x = rng.normal(size=(2, 3, 4, 4))
        proj = rng.normal(size=x.shape)
        out = sigmoid(x)
        analytic = sigmoid_backward(out, proj)

        def fn(inputs):
            return float(np.sum(sigmoid(inputs[0]) * proj))

        report = grad_check(fn, [x], [analytic])
        assert report.passed(1e-6), str(report)


class TestBceLoss:
    def test_analytic_value_at_half(self):
        loss, _ = bce_loss(np.array([[0.5]]), np.array([[1.0]]), np.array([[1]]))
        assert loss == pytest.approx(np.log(2.0), abs=1e-9)

    def test_perfect_prediction_is_tiny(self):
        y = np.array([[0.0, 1.0], [1.0, 0.0]])
        loss, _ = bce_loss(y.copy(), y)
        assert loss <= 1e-6

    def test_masked_loss_equals_subgrid_loss(self, rng):
        prob = rng.uniform(0.05, 0.95, size=(8, 8))
        label = (rng.random((8, 8)) < 0.5).astype(float)
        validity = np.zeros((8, 8), dtype=np.uint8)
        validity[:4] = 1  # contiguous half keeps summation order identical
        masked_loss, grad = bce_loss(prob, label, validity)
        sub_loss, _ = bce_loss(prob[:4], label[:4])
        assert masked_loss == sub_loss
        assert not grad[4:].any()

    def test_empty_support_rejected(self):
        with pytest.raises(EmptySupportError, match="empty loss support"):
            bce_loss(np.array([[0.5]]), np.array([[1.0]]), np.array([[0]]))

    def test_gradient_matches_finite_differences(self, rng):
        prob = rng.uniform(0.1, 0.9, size=(4, 4))
        label = (rng.random((4, 4)) < 0.5).astype(float)
        validity = (rng.random((4, 4)) < 0.8).astype(np.uint8)
        validity[0, 0] = 1
        _, analytic = bce_loss(prob, label, validity)

        def fn(inputs):
            loss, _ = bce_loss(inputs[0], label, validity)
            return loss

        report = grad_check(fn, [prob], [analytic])
        assert report.passed(1e-6), str(report)
