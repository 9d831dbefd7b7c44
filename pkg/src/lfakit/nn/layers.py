"""Layer forward/backward kernels.

Layers hold their parameters as numpy arrays and are stateless across
calls: every forward writes what the backward pass needs into a caller
supplied cache list, so concurrent inference over shared weights is
safe.

Convolutions run as im2col + BLAS matmul over chunks of images, writing
straight into preallocated outputs (`np.matmul(..., out=...)`): on this
workload fresh 100-MB-scale allocations cost more in page faults than
the GEMM itself. The chunk size keeps the unrolled patch buffer under a
fixed byte budget — the second conv of the production net would
otherwise unroll to ~0.5 GB per 32-image batch.

Max pooling computes the window max as three pairwise maxima over
strided views and re-derives the winning positions in backward from the
cached input/output pair; ties route to the first window position in
row-major order, so gradient routing is deterministic.
"""
from __future__ import annotations

import threading

import numpy as np

from .tensor import DTYPE, require_finite

# Upper bound on the unrolled-patch buffer per conv GEMM chunk.
_COLS_BYTE_BUDGET = 192 * 1024 * 1024

_tl = threading.local()


def _scratch(label, shape, dtype):
    """Reusable per-thread work buffer; lifetime is one layer call."""
    store = getattr(_tl, "bufs", None)
    if store is None:
        store = _tl.bufs = {}
    need = int(np.prod(shape)) * np.dtype(dtype).itemsize
    cur = store.get(label)
    if cur is None or cur.nbytes < need:
        cur = store[label] = np.empty(need, dtype=np.uint8)
    return cur[:need].view(dtype).reshape(shape)

RELU = "relu"
SOFTMAX = "softmax"
NONE = "none"
_ACTIVATIONS = (NONE, RELU, SOFTMAX)


def _check_activation(name):
    if name not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; expected one of {_ACTIVATIONS}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability."""
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise ValueError(f"softmax expects a (B, K) array, got {logits.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    require_finite(out, "softmax output")
    return out


def _chunk_images(oh: int, ow: int, patch: int, itemsize: int) -> int:
    per_image = oh * ow * patch * itemsize
    return max(1, _COLS_BYTE_BUDGET // max(1, per_image))


def _fill_cols(buf, x, kh, kw, oh, ow):
    """Unroll valid patches of x into buf[(b,oh,ow,kh,kw,c)]; returns 2-D view."""
    n = x.shape[0]
    for di in range(kh):
        for dj in range(kw):
            buf[:n, :, :, di, dj, :] = x[:, di:di + oh, dj:dj + ow, :]
    return buf[:n].reshape(n * oh * ow, -1)


class Conv2D:
    """Valid (no padding) stride-1 convolution, NHWC, optional ReLU."""

    kind = "conv2d"

    def __init__(self, in_channels, filters, kernel=(3, 3), activation=RELU,
                 *, rng=None, dtype=DTYPE):
        _check_activation(activation)
        if activation == SOFTMAX:
            raise ValueError("softmax is not supported on conv layers")
        kh, kw = kernel
        self.in_channels = int(in_channels)
        self.filters = int(filters)
        self.kernel = (int(kh), int(kw))
        self.activation = activation
        fan_in = kh * kw * in_channels
        limit = np.sqrt(6.0 / fan_in)
        if rng is None:
            self.w = np.zeros((kh, kw, in_channels, filters), dtype=dtype)
        else:
            self.w = rng.uniform(-limit, limit,
                                 size=(kh, kw, in_channels, filters)).astype(dtype)
        self.b = np.zeros(filters, dtype=dtype)

    def out_shape(self, in_shape):
        h, w, c = in_shape
        kh, kw = self.kernel
        if c != self.in_channels:
            raise ValueError(
                f"conv2d expects {self.in_channels} input channels, got {c}")
        if h < kh or w < kw:
            raise ValueError(
                f"conv2d input {h}x{w} smaller than kernel {kh}x{kw}")
        return (h - kh + 1, w - kw + 1, self.filters)

    def forward(self, x, training=False, rng=None, cache=None):
        b, h, w, c = x.shape
        kh, kw = self.kernel
        oh, ow, cout = self.out_shape((h, w, c))
        patch = kh * kw * c
        wflat = self.w.reshape(patch, cout)
        out = np.empty((b, oh, ow, cout), dtype=x.dtype)
        out2d = out.reshape(b * oh * ow, cout)
        mask = np.empty(out.shape, dtype=bool) if (cache is not None and
                                                   self.activation == RELU) else None
        step = _chunk_images(oh, ow, patch, x.itemsize)
        buf = _scratch("conv_cols", (min(step, b), oh, ow, kh, kw, c), x.dtype)
        for s in range(0, b, step):
            xc = x[s:s + step]
            cols = _fill_cols(buf, xc, kh, kw, oh, ow)
            view = out2d[s * oh * ow:(s + len(xc)) * oh * ow]
            np.matmul(cols, wflat, out=view)
            view += self.b
            if self.activation == RELU:
                np.maximum(view, 0, out=view)
                if mask is not None:
                    np.greater(out[s:s + step], 0, out=mask[s:s + step])
        require_finite(out, "conv2d output")
        if cache is not None:
            cache.append((x, mask))
        return out

    def backward(self, dout, cache_entry, want_param_grads=True,
                 want_input_grad=True):
        x, mask = cache_entry
        if mask is not None:
            dpre = _scratch("conv_dpre", dout.shape, dout.dtype)
            np.multiply(dout, mask, out=dpre)
            dout = dpre
        b, h, w, c = x.shape
        kh, kw = self.kernel
        oh, ow = h - kh + 1, w - kw + 1
        cout = self.filters
        patch = kh * kw * c
        wflat = self.w.reshape(patch, cout)
        grads = None
        dw = np.zeros((patch, cout), dtype=x.dtype) if want_param_grads else None
        dx = np.zeros_like(x) if want_input_grad else None
        step = _chunk_images(oh, ow, patch, x.itemsize)
        buf = _scratch("conv_cols", (min(step, b), oh, ow, kh, kw, c), x.dtype)
        for s in range(0, b, step):
            n = min(step, b - s)
            dflat = dout[s:s + n].reshape(n * oh * ow, cout)
            if want_param_grads:
                cols = _fill_cols(buf, x[s:s + n], kh, kw, oh, ow)
                dw += cols.T @ dflat
            if want_input_grad:
                # buf is free again: the dW GEMM above has consumed cols
                dcols2d = buf[:n].reshape(n * oh * ow, patch)
                np.matmul(dflat, wflat.T, out=dcols2d)
                dcols = buf[:n]
                for di in range(kh):
                    for dj in range(kw):
                        dx[s:s + n, di:di + oh, dj:dj + ow, :] += dcols[:, :, :, di, dj, :]
        if want_param_grads:
            grads = {"w": dw.reshape(self.w.shape),
                     "b": dout.sum(axis=(0, 1, 2)).astype(x.dtype)}
        return dx, grads

    def params(self):
        return [("w", self.w), ("b", self.b)]


class MaxPool2D:
    """2x2 max pooling at stride 2; odd trailing row/column is dropped."""

    kind = "maxpool2d"

    def __init__(self, window=(2, 2)):
        if tuple(window) != (2, 2):
            raise ValueError("only 2x2 pooling windows are supported")
        self.window = (2, 2)

    def out_shape(self, in_shape):
        h, w, c = in_shape
        if h < 2 or w < 2:
            raise ValueError(f"maxpool2d input {h}x{w} smaller than 2x2 window")
        return (h // 2, w // 2, c)

    @staticmethod
    def _corners(x, oh, ow):
        """The four stride-2 views covering each window, row-major order."""
        return (x[:, 0:2 * oh:2, 0:2 * ow:2, :], x[:, 0:2 * oh:2, 1:2 * ow:2, :],
                x[:, 1:2 * oh:2, 0:2 * ow:2, :], x[:, 1:2 * oh:2, 1:2 * ow:2, :])

    def forward(self, x, training=False, rng=None, cache=None):
        oh, ow, _ = self.out_shape(x.shape[1:])
        c00, c01, c10, c11 = self._corners(x, oh, ow)
        lo = np.maximum(c00, c01)
        hi = np.maximum(c10, c11)
        if cache is not None:
            # winner index 0..3 in window row-major order; strict > keeps
            # the first maximum on ties
            i01 = (c01 > c00).view(np.uint8)
            i23 = (c11 > c10).view(np.uint8)
            idx = np.where(hi > lo, i23 + 2, i01)
            cache.append((x.shape, idx))
        out = np.maximum(lo, hi, out=lo)
        return out

    def backward(self, dout, cache_entry, want_param_grads=True,
                 want_input_grad=True):
        if not want_input_grad:
            return None, None
        in_shape, idx = cache_entry
        b, h, w, c = in_shape
        oh, ow = h // 2, w // 2
        dx = np.empty(in_shape, dtype=dout.dtype)
        if h > 2 * oh:
            dx[:, 2 * oh:, :, :] = 0
        if w > 2 * ow:
            dx[:, :, 2 * ow:, :] = 0
        routed = _scratch("pool_routed", dout.shape, dout.dtype)
        for k, view in enumerate(self._corners(dx, oh, ow)):
            np.multiply(dout, idx == k, out=routed)
            view[...] = routed
        return dx, None

    def params(self):
        return []


class Dropout:
    """Inverted dropout: active only in training, identity at inference."""

    kind = "dropout"

    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, training=False, rng=None, cache=None):
        if not training or self.rate == 0.0:
            if cache is not None:
                cache.append(None)
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        keep = rng.random(x.shape, dtype=np.float32) >= self.rate
        out = x * keep
        out *= 1.0 / (1.0 - self.rate)
        if cache is not None:
            cache.append(keep)
        return out

    def backward(self, dout, cache_entry, want_param_grads=True,
                 want_input_grad=True):
        if not want_input_grad:
            return None, None
        if cache_entry is None:
            return dout, None
        dx = dout * cache_entry
        dx *= 1.0 / (1.0 - self.rate)
        return dx, None

    def params(self):
        return []


class Flatten:
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False, rng=None, cache=None):
        if cache is not None:
            cache.append(x.shape)
        return x.reshape(x.shape[0], -1)

    def backward(self, dout, cache_entry, want_param_grads=True,
                 want_input_grad=True):
        if not want_input_grad:
            return None, None
        return dout.reshape(cache_entry), None

    def params(self):
        return []


class Dense:
    """Affine map with optional ReLU or softmax activation."""

    kind = "dense"

    def __init__(self, in_features, units, activation=NONE, *, rng=None, dtype=DTYPE):
        _check_activation(activation)
        self.in_features = int(in_features)
        self.units = int(units)
        self.activation = activation
        limit = np.sqrt(6.0 / in_features)
        if rng is None:
            self.w = np.zeros((in_features, units), dtype=dtype)
        else:
            self.w = rng.uniform(-limit, limit, size=(in_features, units)).astype(dtype)
        self.b = np.zeros(units, dtype=dtype)

    def out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.in_features:
            raise ValueError(
                f"dense expects flat input of {self.in_features} features, got {in_shape}")
        return (self.units,)

    def forward(self, x, training=False, rng=None, cache=None,
                apply_activation=True):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(
                f"dense expects (B, {self.in_features}) input, got {x.shape}")
        out = x @ self.w + self.b
        act_state = None
        if apply_activation and self.activation == RELU:
            np.maximum(out, 0, out=out)
            act_state = out > 0
        elif apply_activation and self.activation == SOFTMAX:
            out = softmax(out)
            act_state = out
        require_finite(out, "dense output")
        if cache is not None:
            cache.append((x, act_state))
        return out

    def backward(self, dout, cache_entry, want_param_grads=True,
                 want_input_grad=True, grad_wrt_preact=False):
        x, act_state = cache_entry
        if grad_wrt_preact or self.activation == NONE:
            dz = dout
        elif self.activation == RELU:
            dz = dout * act_state
        else:  # softmax Jacobian-vector product
            p = act_state
            dz = p * (dout - (dout * p).sum(axis=1, keepdims=True))
        grads = None
        if want_param_grads:
            grads = {"w": x.T @ dz, "b": dz.sum(axis=0)}
        dx = dz @ self.w.T if want_input_grad else None
        return dx, grads

    def params(self):
        return [("w", self.w), ("b", self.b)]
