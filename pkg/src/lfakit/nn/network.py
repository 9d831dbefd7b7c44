"""Sequential network assembly, forward/backward orchestration."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import DTYPE
from . import layers as L

CONV2D = "conv2d"
MAXPOOL2D = "maxpool2d"
DROPOUT = "dropout"
FLATTEN = "flatten"
DENSE = "dense"


@dataclass(frozen=True)
class LayerSpec:
    """Declarative layer description used to build and persist networks.

    `filters` doubles as the unit count for dense layers.
    """
    kind: str
    filters: int = 0
    kernel: tuple = (3, 3)
    activation: str = L.NONE
    dropout_rate: float = 0.0


def conv(filters, kernel=(3, 3), activation=L.RELU):
    return LayerSpec(CONV2D, filters=filters, kernel=tuple(kernel), activation=activation)


def pool():
    return LayerSpec(MAXPOOL2D)


def dropout(rate):
    return LayerSpec(DROPOUT, dropout_rate=rate)


def flatten():
    return LayerSpec(FLATTEN)


def dense(units, activation=L.NONE):
    return LayerSpec(DENSE, filters=units, activation=activation)


class Network:
    """An ordered stack of layers with explicit input shape.

    Forward passes are pure functions of (params, input, rng) — backward
    state lives in a per-call cache list, never on the layers — so
    concurrent inference over one instance is safe. Training updates
    parameters in place and must stay single-writer.
    """

    def __init__(self, specs, input_shape, seed=0, dtype=DTYPE):
        self.specs = list(specs)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.dtype = dtype
        self.layers = []
        self.layer_shapes = [self.input_shape]
        ss = np.random.SeedSequence(seed)
        children = ss.spawn(len(self.specs))
        shape = self.input_shape
        for spec, child in zip(self.specs, children):
            rng = np.random.Generator(np.random.PCG64(child))
            layer = self._build_layer(spec, shape, rng, dtype)
            shape = layer.out_shape(shape)
            self.layers.append(layer)
            self.layer_shapes.append(shape)
        self.output_shape = shape

    @staticmethod
    def _build_layer(spec, in_shape, rng, dtype):
        if spec.kind == CONV2D:
            if len(in_shape) != 3:
                raise ValueError(f"conv2d needs HWC input, got shape {in_shape}")
            return L.Conv2D(in_shape[2], spec.filters, spec.kernel,
                            spec.activation, rng=rng, dtype=dtype)
        if spec.kind == MAXPOOL2D:
            return L.MaxPool2D()
        if spec.kind == DROPOUT:
            return L.Dropout(spec.dropout_rate)
        if spec.kind == FLATTEN:
            return L.Flatten()
        if spec.kind == DENSE:
            if len(in_shape) != 1:
                raise ValueError(f"dense needs flat input, got shape {in_shape}")
            return L.Dense(in_shape[0], spec.filters, spec.activation,
                           rng=rng, dtype=dtype)
        raise ValueError(f"unknown layer kind {spec.kind!r}")

    # -- forward / backward -------------------------------------------------

    def forward(self, x, training=False, rng=None, cache=None, logits=False):
        """Run the stack. With logits=True the final activation is skipped."""
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ValueError(
                f"expected input shape (B, {self.input_shape}), got {x.shape}")
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            if logits and i == last and isinstance(layer, L.Dense):
                x = layer.forward(x, training, rng, cache, apply_activation=False)
            else:
                x = layer.forward(x, training, rng, cache)
        return x

    def backward(self, dout, cache, want_param_grads=True,
                 want_input_grad=False, grad_wrt_preact=False):
        """Chain gradients back through the stack.

        Returns (input_grad or None, grads dict keyed "<idx>.<param>").
        """
        grads = {} if want_param_grads else None
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            need_dx = want_input_grad or i > 0
            kwargs = {}
            if isinstance(layer, L.Dense) and i == len(self.layers) - 1:
                kwargs["grad_wrt_preact"] = grad_wrt_preact
            dout, layer_grads = layer.backward(
                dout, cache[i], want_param_grads=want_param_grads,
                want_input_grad=need_dx, **kwargs)
            if want_param_grads and layer_grads:
                for name, g in layer_grads.items():
                    grads[f"{i}.{name}"] = g
        return (dout if want_input_grad else None), grads

    def logit_input_gradient(self, x, class_index):
        """Gradient of one pre-softmax logit w.r.t. each input in the batch.

        Returns (logits, dinput) where dinput has the batch's shape.
        Dropout stays off: the gradient is of the inference-mode function.
        """
        cache = []
        logits = self.forward(x, training=False, cache=cache, logits=True)
        seed = np.zeros_like(logits)
        seed[:, int(class_index)] = 1.0
        dx, _ = self.backward(seed, cache, want_param_grads=False,
                              want_input_grad=True, grad_wrt_preact=True)
        return logits, dx

    # -- parameter access ----------------------------------------------------

    def parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params():
                out.append((f"{i}.{name}", arr))
        return out

    def param_dict(self):
        return dict(self.parameters())

    def num_params(self):
        return sum(arr.size for _, arr in self.parameters())

    def copy_params(self):
        return {name: arr.copy() for name, arr in self.parameters()}

    def set_params(self, values):
        for name, arr in self.parameters():
            src = values[name]
            if src.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}: {src.shape} vs {arr.shape}")
            arr[...] = src
