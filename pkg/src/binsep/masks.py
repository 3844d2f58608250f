"""Probabilistic time-frequency masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError


@dataclass
class SoftMask:
    """Per-source TF weights in [0, 1], same shape as the mixture spectrogram."""

    values: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionError("mask must be a 2-D matrix")

    @property
    def shape(self):
        return self.values.shape


def validate_mask_values(values: np.ndarray, slack: float = 0.0) -> None:
    """Check finiteness and the [0, 1] range (with optional slack)."""
    if not np.all(np.isfinite(values)):
        raise DataError("mask contains non-finite values")
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo < -slack or hi > 1.0 + slack:
        raise DataError(f"mask values outside [0, 1]: min {lo:.3g}, max {hi:.3g}")


def require_same_shape(masks) -> tuple:
    shapes = {m.shape for m in masks}
    if len(shapes) != 1:
        raise DimensionError(f"masks disagree in shape: {sorted(shapes)}")
    return next(iter(shapes))
