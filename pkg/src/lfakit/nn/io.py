"""LFAM model container: byte-exact save/load of network weights.

Layout (all integers little-endian):

    magic   4s   b"LFAM"
    version u16  currently 1
    model   u16  1 = classifier, 2 = detector
    indim   u8   rank of the input shape
    idims   u32 * indim
    layers  u32  layer count
    per layer:
        kind u16, activation u16, aux f32 (dropout rate), nparams u8
        per parameter: ndim u8, dims u32 * ndim, payload f32 * prod(dims)
"""
from __future__ import annotations

import os
import struct

import numpy as np

from . import layers as L
from .network import Network, LayerSpec, CONV2D, MAXPOOL2D, DROPOUT, FLATTEN, DENSE

MAGIC = b"LFAM"
VERSION = 1
MODEL_CLASSIFIER = 1
MODEL_DETECTOR = 2

_KIND_TAGS = {CONV2D: 1, MAXPOOL2D: 2, DROPOUT: 3, FLATTEN: 4, DENSE: 5}
_KIND_NAMES = {v: k for k, v in _KIND_TAGS.items()}
_ACT_TAGS = {L.NONE: 0, L.RELU: 1, L.SOFTMAX: 2}
_ACT_NAMES = {v: k for k, v in _ACT_TAGS.items()}


def to_bytes(net: Network, model_kind: int) -> bytes:
    parts = [MAGIC, struct.pack("<HHB", VERSION, model_kind, len(net.input_shape))]
    parts.append(struct.pack(f"<{len(net.input_shape)}I", *net.input_shape))
    parts.append(struct.pack("<I", len(net.layers)))
    for spec, layer in zip(net.specs, net.layers):
        parts.append(struct.pack(
            "<HHfB", _KIND_TAGS[spec.kind], _ACT_TAGS[spec.activation],
            spec.dropout_rate, len(layer.params())))
        for _, arr in layer.params():
            arr32 = np.ascontiguousarray(arr, dtype="<f4")
            parts.append(struct.pack("<B", arr.ndim))
            parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(arr32.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, fmt):
        vals = struct.unpack_from("<" + fmt, self.data, self.pos)
        self.pos += struct.calcsize("<" + fmt)
        return vals if len(vals) > 1 else vals[0]

    def take_floats(self, count):
        out = np.frombuffer(self.data, dtype="<f4", count=count, offset=self.pos)
        self.pos += 4 * count
        return out


def from_bytes(data: bytes):
    """Rebuild (network, model_kind) from an LFAM byte string."""
    if data[:4] != MAGIC:
        raise ValueError("not an LFAM model file (bad magic)")
    r = _Reader(data)
    r.pos = 4
    version, model_kind, indim = r.take("HHB")
    if version != VERSION:
        raise ValueError(f"unsupported LFAM version {version}")
    input_shape = tuple(np.atleast_1d(r.take(f"{indim}I")))
    n_layers = r.take("I")
    specs = []
    payloads = []
    for _ in range(n_layers):
        kind_tag, act_tag, aux, nparams = r.take("HHfB")
        if kind_tag not in _KIND_NAMES:
            raise ValueError(f"unknown layer kind tag {kind_tag}")
        arrays = []
        for _ in range(nparams):
            ndim = r.take("B")
            dims = tuple(np.atleast_1d(r.take(f"{ndim}I")))
            arrays.append(r.take_floats(int(np.prod(dims))).reshape(dims))
        kind = _KIND_NAMES[kind_tag]
        act = _ACT_NAMES[act_tag]
        if kind == CONV2D:
            kh, kw, _cin, filters = arrays[0].shape
            specs.append(LayerSpec(kind, filters=filters, kernel=(kh, kw), activation=act))
        elif kind == DENSE:
            specs.append(LayerSpec(kind, filters=arrays[0].shape[1], activation=act))
        elif kind == DROPOUT:
            specs.append(LayerSpec(kind, dropout_rate=float(np.float32(aux))))
        else:
            specs.append(LayerSpec(kind))
        payloads.append(arrays)
    net = Network(specs, input_shape, seed=0)
    values = {}
    for i, (layer, arrays) in enumerate(zip(net.layers, payloads)):
        for (name, _), arr in zip(layer.params(), arrays):
            values[f"{i}.{name}"] = arr.astype(np.float32)
    net.set_params(values)
    return net, model_kind


def save_model(path, net: Network, model_kind: int) -> None:
    """Atomic write (temp + rename) of the LFAM container."""
    data = to_bytes(net, model_kind)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def load_model(path):
    with open(path, "rb") as f:
        return from_bytes(f.read())
