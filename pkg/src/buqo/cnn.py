"""Gated-convolution network inference with a manual reverse pass.

The network F sees a 2-channel input [(1-m)*x, m] and the inpainting
output is composed as G(x) = (1-m)*x + m*F(z). The composition makes
complement preservation and idempotence hold exactly regardless of the
weights: re-applying G leaves the network input unchanged.

Layer stack: five plain convolutions (conv -> leaky ReLU -> folded affine),
four gated convolutions (leaky-ReLU feature path multiplied by a sigmoid
gate path, then folded affine), and a final linear convolution down to one
channel. All convolutions are 5x5, zero-padded, stride 1. Weights are
stored in float32 (the wire format) and promoted to float64 for compute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StateError
from .inpaint import InpaintingOperator

KERNEL = 5
N_LAYERS = 10
N_PLAIN_HEAD = 5


@dataclass(frozen=True)
class ConvLayer:
    gated: bool
    in_ch: int
    out_ch: int
    weight: np.ndarray                 # (out, in, 5, 5)
    bias: np.ndarray                   # (out,)
    scale: np.ndarray                  # (out,) folded normalization
    shift: np.ndarray                  # (out,)
    gate_weight: np.ndarray = None     # gated layers only
    gate_bias: np.ndarray = None


@dataclass(frozen=True)
class CnnWeights:
    leaky_slope: float
    layers: tuple

    @property
    def width(self):
        return self.layers[0].out_ch

    def validate(self):
        if len(self.layers) != N_LAYERS:
            raise ConfigurationError(f"expected {N_LAYERS} layers, got {len(self.layers)}")
        width = self.layers[0].out_ch
        for i, layer in enumerate(self.layers):
            expect_gated = N_PLAIN_HEAD <= i < N_LAYERS - 1
            if layer.gated != expect_gated:
                raise ConfigurationError(
                    f"layer {i + 1}: expected {'gated' if expect_gated else 'plain'} convolution")
            expect_in = 2 if i == 0 else width
            expect_out = 1 if i == N_LAYERS - 1 else width
            if layer.in_ch != expect_in or layer.out_ch != expect_out:
                raise ConfigurationError(
                    f"layer {i + 1}: channel counts ({layer.in_ch}, {layer.out_ch}) "
                    f"!= expected ({expect_in}, {expect_out})")
            arrays = [layer.weight, layer.bias, layer.scale, layer.shift]
            if layer.gated:
                arrays += [layer.gate_weight, layer.gate_bias]
            shapes = [(layer.out_ch, layer.in_ch, KERNEL, KERNEL), (layer.out_ch,),
                      (layer.out_ch,), (layer.out_ch,)]
            if layer.gated:
                shapes += [shapes[0], (layer.out_ch,)]
            for arr, shape in zip(arrays, shapes):
                if arr is None or arr.shape != shape:
                    raise ConfigurationError(f"layer {i + 1}: bad tensor shape")
                if not np.isfinite(arr).all():
                    raise ConfigurationError(f"layer {i + 1}: non-finite weights")
        if not np.isfinite(self.leaky_slope):
            raise ConfigurationError("non-finite leaky slope")
        return self


def _pad(h):
    p = KERNEL // 2
    return np.pad(h, ((0, 0), (p, p), (p, p)))


def _im2col(h):
    # (C, n, n) -> (n*n, C*25) patch matrix
    win = np.lib.stride_tricks.sliding_window_view(_pad(h), (KERNEL, KERNEL), axis=(1, 2))
    c, n, _ = h.shape
    return win.transpose(1, 2, 0, 3, 4).reshape(n * n, c * KERNEL * KERNEL)


def conv2d(h, weight, bias):
    """Zero-padded stride-1 cross-correlation."""
    out_ch = weight.shape[0]
    n = h.shape[1]
    wmat = weight.reshape(out_ch, -1)
    out = _im2col(h) @ wmat.T
    return out.T.reshape(out_ch, n, n) + bias[:, None, None]


def conv2d_input_grad(dout, weight, in_ch):
    """Gradient of conv2d with respect to its input."""
    out_ch, n = dout.shape[0], dout.shape[1]
    wmat = weight.reshape(out_ch, -1)
    dcols = dout.reshape(out_ch, n * n).T @ wmat          # (n*n, in_ch*25)
    dcols = dcols.reshape(n, n, in_ch, KERNEL, KERNEL)
    p = KERNEL // 2
    grad = np.zeros((in_ch, n + 2 * p, n + 2 * p))
    for di in range(KERNEL):
        for dj in range(KERNEL):
            grad[:, di:di + n, dj:dj + n] += dcols[:, :, :, di, dj].transpose(2, 0, 1)
    return grad[:, p:p + n, p:p + n]


def _lrelu(a, slope):
    return np.where(a > 0, a, slope * a)


def _lrelu_grad(a, slope):
    return np.where(a > 0, 1.0, slope)


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def network_forward(weights, z):
    """Run F on the 2-channel input; returns (output image, cache)."""
    slope = weights.leaky_slope
    h = z
    cache = []
    for i, layer in enumerate(weights.layers):
        w = layer.weight.astype(np.float64)
        a = conv2d(h, w, layer.bias.astype(np.float64))
        if layer.gated:
            f = _lrelu(a, slope)
            ag = conv2d(h, layer.gate_weight.astype(np.float64),
                        layer.gate_bias.astype(np.float64))
            g = _sigmoid(ag)
            pre = f * g
            cache.append(("gated", a, f, g))
        elif i == len(weights.layers) - 1:
            pre = a
            cache.append(("linear", a))
        else:
            pre = _lrelu(a, slope)
            cache.append(("plain", a))
        h = layer.scale.astype(np.float64)[:, None, None] * pre \
            + layer.shift.astype(np.float64)[:, None, None]
    return h[0], cache


def network_vjp(weights, cache, dout):
    """Pull a cotangent on F's output back to the 2-channel input."""
    slope = weights.leaky_slope
    d = dout[None, :, :]
    for layer, entry in zip(reversed(weights.layers), reversed(cache)):
        d = layer.scale.astype(np.float64)[:, None, None] * d
        kind = entry[0]
        if kind == "linear":
            d = conv2d_input_grad(d, layer.weight.astype(np.float64), layer.in_ch)
        elif kind == "plain":
            a = entry[1]
            d = d * _lrelu_grad(a, slope)
            d = conv2d_input_grad(d, layer.weight.astype(np.float64), layer.in_ch)
        else:
            _, a, f, g = entry
            df = d * g
            dg = d * f
            daf = df * _lrelu_grad(a, slope)
            dag = dg * g * (1.0 - g)
            d = (conv2d_input_grad(daf, layer.weight.astype(np.float64), layer.in_ch)
                 + conv2d_input_grad(dag, layer.gate_weight.astype(np.float64), layer.in_ch))
    return d


class CnnInpainter(InpaintingOperator):
    """Inpainting operator backed by the gated-convolution network."""

    kind = "cnn"

    def __init__(self, weights, mask):
        super().__init__(mask)
        self.weights = weights.validate()
        self._m = mask.float_pixels
        self._mc = 1.0 - self._m

    def forward(self, x):
        if x.shape != (self.mask.n, self.mask.n):
            raise ConfigurationError("image and mask shapes differ")
        z = np.stack([self._mc * x, self._m])
        f_out, net_cache = network_forward(self.weights, z)
        return self._mc * x + self._m * f_out, net_cache

    def vjp(self, cache, u):
        if cache is None:
            raise StateError("CNN vjp requires the cache from a paired forward pass")
        dz = network_vjp(self.weights, cache, self._m * u)
        return self._mc * u + self._mc * dz[0]


def zero_weights(width=16, slope=0.2):
    """All-zero network: F == 0, so G(x) = (1-m)*x."""
    layers = []
    for i in range(N_LAYERS):
        gated = N_PLAIN_HEAD <= i < N_LAYERS - 1
        in_ch = 2 if i == 0 else width
        out_ch = 1 if i == N_LAYERS - 1 else width
        kw = dict(
            gated=gated, in_ch=in_ch, out_ch=out_ch,
            weight=np.zeros((out_ch, in_ch, KERNEL, KERNEL), dtype=np.float32),
            bias=np.zeros(out_ch, dtype=np.float32),
            scale=np.ones(out_ch, dtype=np.float32),
            shift=np.zeros(out_ch, dtype=np.float32),
        )
        if gated:
            kw["gate_weight"] = np.zeros((out_ch, in_ch, KERNEL, KERNEL), dtype=np.float32)
            kw["gate_bias"] = np.zeros(out_ch, dtype=np.float32)
        layers.append(ConvLayer(**kw))
    return CnnWeights(leaky_slope=slope, layers=tuple(layers)).validate()


def random_weights(width=16, seed=0, weight_scale=0.08, slope=0.2):
    """Small random network for fixtures; biases keep activations off zero."""
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(N_LAYERS):
        gated = N_PLAIN_HEAD <= i < N_LAYERS - 1
        in_ch = 2 if i == 0 else width
        out_ch = 1 if i == N_LAYERS - 1 else width
        shape = (out_ch, in_ch, KERNEL, KERNEL)
        kw = dict(
            gated=gated, in_ch=in_ch, out_ch=out_ch,
            weight=(rng.standard_normal(shape) * weight_scale / np.sqrt(in_ch)
                    ).astype(np.float32),
            bias=(0.1 * rng.standard_normal(out_ch)).astype(np.float32),
            scale=np.ones(out_ch, dtype=np.float32),
            shift=np.zeros(out_ch, dtype=np.float32),
        )
        if gated:
            kw["gate_weight"] = (rng.standard_normal(shape) * weight_scale
                                 / np.sqrt(in_ch)).astype(np.float32)
            kw["gate_bias"] = (0.1 * rng.standard_normal(out_ch)).astype(np.float32)
        layers.append(ConvLayer(**kw))
    return CnnWeights(leaky_slope=slope, layers=tuple(layers)).validate()


def linearized_weights(width=8, seed=0, weight_scale=0.02, slope=0.2):
    """Fixture whose gates are saturated and activations sign-definite,
    so G is (locally) an affine map with a constant Jacobian."""
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(N_LAYERS):
        gated = N_PLAIN_HEAD <= i < N_LAYERS - 1
        in_ch = 2 if i == 0 else width
        out_ch = 1 if i == N_LAYERS - 1 else width
        shape = (out_ch, in_ch, KERNEL, KERNEL)
        kw = dict(
            gated=gated, in_ch=in_ch, out_ch=out_ch,
            weight=(rng.standard_normal(shape) * weight_scale / np.sqrt(in_ch)
                    ).astype(np.float32),
            # strongly positive bias keeps every leaky ReLU on its linear branch
            bias=np.full(out_ch, 5.0, dtype=np.float32),
            scale=np.ones(out_ch, dtype=np.float32),
            shift=np.zeros(out_ch, dtype=np.float32),
        )
        if gated:
            kw["gate_weight"] = np.zeros(shape, dtype=np.float32)
            kw["gate_bias"] = np.full(out_ch, 40.0, dtype=np.float32)  # sigmoid == 1
        layers.append(ConvLayer(**kw))
    return CnnWeights(leaky_slope=slope, layers=tuple(layers)).validate()
