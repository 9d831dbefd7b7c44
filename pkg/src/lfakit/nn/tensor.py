"""Array conventions and sanity checks shared by the network engine.

All tensors are dense numpy arrays in row-major order. Image-like tensors
use NHWC layout (batch, height, width, channels). float32 is the working
precision; float64 is available for verification runs (gradient checks).
"""
from __future__ import annotations

import numpy as np

DTYPE = np.float32


def as_tensor(x, dtype=DTYPE) -> np.ndarray:
    """Coerce to a contiguous array of the working dtype."""
    return np.ascontiguousarray(x, dtype=dtype)


def require_finite(arr: np.ndarray, what: str) -> None:
    """Raise if `arr` contains NaN or Inf.

    Uses min/max reductions (NaN propagates through np.max) to avoid
    materializing a boolean mask of the full tensor.
    """
    if arr.size == 0:
        return
    lo = np.min(arr)
    hi = np.max(arr)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise FloatingPointError(f"non-finite values in {what}")


def one_hot(labels, num_classes: int, dtype=DTYPE) -> np.ndarray:
    """Integer class indices -> one-hot rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("label index out of range")
    out = np.zeros((labels.shape[0], num_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1
    return out
