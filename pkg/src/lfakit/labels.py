"""Result classes shared across the toolkit.

Classifier ordinals are fixed at Positive=0, Negative=1, Invalid=2 and
must stay stable across save/load; argmax ties break toward the lowest
ordinal. Confusion matrices are displayed in (Invalid, Negative,
Positive) order instead — see `lfakit.metrics.MATRIX_ORDER`.
"""
from __future__ import annotations

import enum


class ClassLabel(enum.IntEnum):
    POSITIVE = 0
    NEGATIVE = 1
    INVALID = 2

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown class label {name!r}") from None

    @property
    def display(self) -> str:
        return self.name.capitalize()


NUM_CLASSES = 3
