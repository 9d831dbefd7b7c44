"""Categorical cross-entropy over softmax probabilities."""
from __future__ import annotations

import numpy as np

from .tensor import require_finite

PROB_FLOOR = 1e-12


def _check_onehot(onehot):
    if onehot.ndim != 2:
        raise ValueError(f"one-hot labels must be (B, K), got {onehot.shape}")
    ok = np.all((onehot == 0) | (onehot == 1)) and np.all(onehot.sum(axis=1) == 1)
    if not ok:
        raise ValueError("malformed one-hot row: each row needs exactly one 1")


def _sample_weights(onehot, class_weights):
    if class_weights is None:
        return None
    cw = np.asarray(class_weights, dtype=np.float64)
    if cw.shape != (onehot.shape[1],):
        raise ValueError(f"class_weights must have shape ({onehot.shape[1]},)")
    return onehot.astype(np.float64) @ cw


def cross_entropy(probs, onehot, class_weights=None):
    """Mean over the batch of -ln(probability of the true class).

    Probabilities are clamped to >= 1e-12 before the log. Optional
    per-class weights turn the mean into a weighted mean.
    """
    probs = np.asarray(probs)
    onehot = np.asarray(onehot)
    if probs.shape != onehot.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs labels {onehot.shape}")
    _check_onehot(onehot)
    row_sums = probs.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-3):
        raise ValueError("probability rows must sum to 1")
    p_true = (probs * onehot).sum(axis=1)
    losses = -np.log(np.maximum(p_true, PROB_FLOOR))
    w = _sample_weights(onehot, class_weights)
    loss = float(np.average(losses, weights=w))
    require_finite(np.asarray(loss), "cross-entropy loss")
    return loss


def cross_entropy_grad(probs, onehot, class_weights=None):
    """d loss / d probs for the loss above (zero inside the clamped region)."""
    probs = np.asarray(probs)
    onehot = np.asarray(onehot)
    b = probs.shape[0]
    p_true = (probs * onehot).sum(axis=1, keepdims=True)
    live = p_true > PROB_FLOOR
    w = _sample_weights(onehot, class_weights)
    if w is None:
        scale = np.full((b, 1), 1.0 / b)
    else:
        scale = (w / w.sum()).reshape(b, 1)
    d_p_true = np.where(live, -scale / np.maximum(p_true, PROB_FLOOR), 0.0)
    return (onehot * d_p_true).astype(probs.dtype)


def backprop(net, x, onehot, rng=None, training=True, class_weights=None):
    """Forward + loss + full backward pass.

    Returns (loss, grads) where grads maps parameter names to arrays of
    matching shape. Training mode draws dropout masks from `rng`;
    inference mode runs the deterministic network.
    """
    cache = []
    probs = net.forward(x, training=training, rng=rng, cache=cache)
    loss = cross_entropy(probs, onehot, class_weights)
    dprobs = cross_entropy_grad(probs, onehot, class_weights)
    _, grads = net.backward(dprobs, cache, want_param_grads=True)
    return loss, grads
