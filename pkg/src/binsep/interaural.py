"""Interaural features of a stereo mixture: level and phase differences.

The channel ratio X1/X2 carries a level difference (magnitude, in dB) and
a phase difference per TF point. Phase alone is ambiguous above the
spatial-aliasing frequency, so downstream clustering scans candidate
inter-channel delays and works with the residual phase left after each
candidate delay is removed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .stft import Spectrogram

MAG_FLOOR = 1e-10

TAU_MIN = -15.0
TAU_MAX = 15.0
TAU_STEP = 0.5


def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), 2.0 * np.pi)


def bin_omega(n_bins: int) -> np.ndarray:
    """Per-bin angular frequency in radians per sample: 2 pi k / L."""
    if n_bins < 2:
        return np.zeros(n_bins)
    return 2.0 * np.pi * np.arange(n_bins) / (2 * (n_bins - 1))


@dataclass(frozen=True)
class TauGrid:
    """Ordered candidate inter-channel delays, in samples."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or len(v) < 1 or np.any(np.diff(v) <= 0):
            raise DimensionError("tau grid must be a strictly increasing vector")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def default(cls) -> "TauGrid":
        # -15 .. +15 samples in half-sample steps: 61 candidates
        n = int(round((TAU_MAX - TAU_MIN) / TAU_STEP)) + 1
        return cls(np.linspace(TAU_MIN, TAU_MAX, n))


@dataclass
class InterauralFeatures:
    """Per-TF-point level difference (dB), phase difference, and raw ratio.

    `level` carries the summed channel magnitudes so consumers can tell
    genuinely silent bins (where the ratio is numerical noise) from active
    ones.
    """

    ild_db: np.ndarray
    ipd: np.ndarray
    ratio: np.ndarray
    level: np.ndarray = None

    @property
    def shape(self):
        return self.ild_db.shape


def interaural_features(spec_left: Spectrogram,
                        spec_right: Spectrogram) -> InterauralFeatures:
    """Compute the interaural spectrogram ratio = X1 / X2 and its cues.

    The denominator magnitude is floored at 1e-10 (phase preserved) so
    silent bins give large-but-finite level differences instead of inf.
    """
    if spec_left.values.shape != spec_right.values.shape:
        raise DimensionError(
            f"channel spectrograms disagree: {spec_left.values.shape} "
            f"vs {spec_right.values.shape}"
        )
    x2 = spec_right.values
    denom = x2 + MAG_FLOOR * np.exp(1j * np.angle(x2))
    ratio = spec_left.values / denom
    ild_db = 20.0 * np.log10(np.abs(ratio) + MAG_FLOOR)
    ipd = wrap_phase(np.angle(ratio))
    level = np.abs(spec_left.values) + np.abs(x2)
    return InterauralFeatures(ild_db=ild_db, ipd=ipd, ratio=ratio, level=level)


def phase_residual(features: InterauralFeatures, tau: float) -> np.ndarray:
    """Phase left over when a candidate delay of tau samples is removed.

    Entry (k, m) equals angle(ratio * exp(-1j * omega_k * tau)) where
    omega_k = 2 pi k / L; evaluated arithmetically as the wrapped
    difference ipd - omega_k * tau. Values lie in (-pi, pi].
    """
    omega = bin_omega(features.ipd.shape[0])
    return wrap_phase(features.ipd - omega[:, None] * float(tau))


def residual_cube(features: InterauralFeatures, grid: TauGrid,
                  dtype=np.float32) -> np.ndarray:
    """Stack phase_residual over the whole delay grid: (n_tau, K, M)."""
    omega = bin_omega(features.ipd.shape[0])
    shift = grid.values[:, None, None] * omega[None, :, None]
    return wrap_phase(features.ipd[None, :, :] - shift).astype(dtype)
