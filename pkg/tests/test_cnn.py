import numpy as np
import pytest

from buqo.cnn import (CnnInpainter, CnnWeights, ConvLayer, conv2d,
                      linearized_weights, random_weights, zero_weights)
from buqo.errors import ConfigurationError, StateError
from buqo.operators import restrict_comp

from conftest import disc_mask


def conv2d_reference(h, weight, bias):
    """Direct quadruple-loop cross-correlation with zero padding."""
    out_ch, in_ch, k, _ = weight.shape
    n = h.shape[1]
    p = k // 2
    padded = np.pad(h, ((0, 0), (p, p), (p, p)))
    out = np.zeros((out_ch, n, n))
    for o in range(out_ch):
        for r in range(n):
            for c in range(n):
                out[o, r, c] = np.sum(padded[:, r:r + k, c:c + k] * weight[o]) + bias[o]
    return out


class TestConvEngine:
    def test_matches_direct_convolution(self, rng):
        h = rng.standard_normal((3, 7, 7))
        w = rng.standard_normal((4, 3, 5, 5))
        b = rng.standard_normal(4)
        assert np.allclose(conv2d(h, w, b), conv2d_reference(h, w, b), atol=1e-12)


class TestCnnInpainter:
    def test_zero_weights_zero_out_the_mask(self, rng):
        mask = disc_mask(16, (8, 8), 3.2)
        op = CnnInpainter(zero_weights(width=8), mask)
        x = rng.random((16, 16))
        out = op.apply(x)
        expected = x * (1.0 - mask.float_pixels)
        assert np.array_equal(out, expected)

    def test_complement_preservation_exact(self, rng):
        mask = disc_mask(16, (8, 8), 3.2)
        op = CnnInpainter(random_weights(width=8, seed=3), mask)
        x = rng.random((16, 16))
        out = op.apply(x)
        assert np.array_equal(restrict_comp(mask, out), restrict_comp(mask, x))

    def test_idempotence_exact(self, rng):
        mask = disc_mask(16, (8, 8), 3.2)
        op = CnnInpainter(random_weights(width=8, seed=4), mask)
        out = op.apply(rng.random((16, 16)))
        assert np.array_equal(op.apply(out), out)

    def test_vjp_matches_central_differences(self, rng):
        mask = disc_mask(12, (6, 6), 2.5)
        op = CnnInpainter(random_weights(width=8, seed=5), mask)
        x = rng.random((12, 12))
        _, cache = op.forward(x)
        eps = 1e-5
        for _ in range(20):
            u = rng.standard_normal((12, 12))
            v = rng.standard_normal((12, 12))
            jt_u = op.vjp(cache, u)
            fd = (op.apply(x + eps * v) - op.apply(x - eps * v)) / (2 * eps)
            lhs = np.sum(jt_u * v)
            rhs = np.sum(u * fd)
            assert abs(lhs - rhs) <= 1e-5 * max(abs(lhs), abs(rhs), 1e-3)

    def test_vjp_equals_dense_jacobian_for_saturated_gates(self, rng):
        mask = disc_mask(8, (4, 4), 1.8)
        op = CnnInpainter(linearized_weights(width=4, seed=6), mask)
        x = rng.random((8, 8))
        n = 8
        base = op.apply(x)
        jac = np.zeros((n * n, n * n))
        for j in range(n * n):
            e = np.zeros(n * n)
            e[j] = 1.0
            jac[:, j] = (op.apply(x + e.reshape(n, n)) - base).ravel()
        _, cache = op.forward(x)
        for _ in range(10):
            u = rng.standard_normal((n, n))
            got = op.vjp(cache, u)
            want = (jac.T @ u.ravel()).reshape(n, n)
            assert np.allclose(got, want, atol=1e-10)

    def test_complement_supported_cotangent_passes_through(self, rng):
        mask = disc_mask(16, (8, 8), 3.2)
        op = CnnInpainter(random_weights(width=8, seed=7), mask)
        x = rng.random((16, 16))
        _, cache = op.forward(x)
        u = rng.standard_normal((16, 16)) * (1.0 - mask.float_pixels)
        got = op.vjp(cache, u)
        assert np.array_equal(got, (1.0 - mask.float_pixels) * u)

    def test_vjp_without_cache_raises(self, rng):
        mask = disc_mask(16, (8, 8), 3.2)
        op = CnnInpainter(random_weights(width=8, seed=8), mask)
        with pytest.raises(StateError):
            op.vjp(None, rng.standard_normal((16, 16)))

    def test_shape_mismatch_raises(self):
        mask = disc_mask(16, (8, 8), 3.2)
        op = CnnInpainter(zero_weights(width=8), mask)
        with pytest.raises(ConfigurationError):
            op.apply(np.zeros((8, 8)))


class TestWeightValidation:
    def test_wrong_layer_count(self):
        w = zero_weights(width=4)
        with pytest.raises(ConfigurationError):
            CnnWeights(leaky_slope=0.2, layers=w.layers[:9]).validate()

    def test_wrong_gating_pattern(self):
        w = zero_weights(width=4)
        layers = list(w.layers)
        first = layers[0]
        layers[0] = ConvLayer(gated=True, in_ch=first.in_ch, out_ch=first.out_ch,
                              weight=first.weight, bias=first.bias,
                              scale=first.scale, shift=first.shift,
                              gate_weight=first.weight, gate_bias=first.bias)
        with pytest.raises(ConfigurationError):
            CnnWeights(leaky_slope=0.2, layers=tuple(layers)).validate()

    def test_non_finite_rejected(self):
        w = zero_weights(width=4)
        layers = list(w.layers)
        bad = layers[2]
        weight = bad.weight.copy()
        weight[0, 0, 0, 0] = np.nan
        layers[2] = ConvLayer(gated=False, in_ch=bad.in_ch, out_ch=bad.out_ch,
                              weight=weight, bias=bad.bias,
                              scale=bad.scale, shift=bad.shift)
        with pytest.raises(ConfigurationError):
            CnnWeights(leaky_slope=0.2, layers=tuple(layers)).validate()
