"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

import numpy as np

from .losses import backprop

REL_FLOOR = 1e-8


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


def gradcheck_function(fn, params, coordinate_count=200, h=1e-3, seed=0):
    """Max relative error between fn's analytic gradient and central differences.

    `fn(params) -> (loss, grads)` where params and grads are dicts of
    arrays with matching shapes. Coordinates are sampled uniformly over
    all parameter entries with the given seed; each is perturbed by +/-h
    for a second-order central difference.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    names = sorted(params)
    sizes = np.array([params[n].size for n in names])
    total = int(sizes.sum())
    if total == 0:
        raise ValueError("no parameters to check")
    count = min(coordinate_count, total)
    flat_ids = rng.choice(total, size=count, replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    _, grads = fn(params)
    worst = 0.0
    for fid in flat_ids:
        k = int(np.searchsorted(offsets, fid, side="right") - 1)
        name = names[k]
        idx = np.unravel_index(int(fid - offsets[k]), params[name].shape)
        orig = params[name][idx]
        params[name][idx] = orig + h
        loss_plus, _ = fn(params)
        params[name][idx] = orig - h
        loss_minus, _ = fn(params)
        params[name][idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * h)
        worst = max(worst, relative_error(float(grads[name][idx]), numeric))
    return worst


def gradcheck_network(net, x, onehot, coordinate_count=200, h=1e-3, seed=0):
    """Check a network's backprop against finite differences of its loss.

    Dropout is disabled (inference-mode forward) so the loss surface is
    deterministic. Run on a float64 network: float32 round-off alone sits
    near the 1e-4 tolerance this check is meant to enforce.
    """
    params = net.param_dict()

    def fn(_):
        return backprop(net, x, onehot, training=False)

    return gradcheck_function(fn, params, coordinate_count, h, seed)
