"""Forward/inverse short-time Fourier transform with Hamming framing.

Analysis uses 1024-sample frames hopped by 256 samples; the tail of the
signal is zero-padded so the final frame is complete, which keeps long
reverberant decays inside the analysis instead of dropping them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import PIPELINE_RATE
from .errors import DataError, DimensionError

WOLA_FLOOR = 1e-8


def hamming_window(length: int) -> np.ndarray:
    # w(t) = 0.54 - 0.46 cos(2 pi t / N) with N = length - 1 (symmetric form)
    t = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * t / (length - 1))


@dataclass(frozen=True)
class StftConfig:
    frame_length: int = 1024
    hop: int = 256
    window: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.frame_length < 2 or self.frame_length % 2:
            raise DataError("frame_length must be a positive even number")
        if self.hop < 1 or self.frame_length % self.hop:
            raise DataError("hop must divide frame_length")
        if self.window is None:
            object.__setattr__(self, "window", hamming_window(self.frame_length))
        elif len(self.window) != self.frame_length:
            raise DimensionError("window length must equal frame_length")

    @property
    def n_bins(self) -> int:
        return self.frame_length // 2 + 1


@dataclass
class Spectrogram:
    """One-sided complex TF matrix, n_bins x n_frames."""

    values: np.ndarray
    bin_hz: float

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def n_frames_for(n_samples: int, cfg: StftConfig) -> int:
    """Frame count after tail padding completes the last frame."""
    if n_samples < cfg.frame_length:
        raise DataError(
            f"signal of {n_samples} samples is shorter than one frame "
            f"({cfg.frame_length})"
        )
    return int(np.ceil((n_samples - cfg.frame_length) / cfg.hop)) + 1


def stft(x, cfg: StftConfig = StftConfig(),
         sample_rate: int = PIPELINE_RATE) -> Spectrogram:
    """Transform a real signal into its one-sided spectrogram.

    Each column is the FFT of one Hamming-windowed frame; bins 0..L/2 are
    retained (K = L/2 + 1 rows). Signals shorter than one frame are an
    error; incomplete final frames are zero-padded.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("stft expects a single channel")
    m = n_frames_for(len(x), cfg)
    padded_len = cfg.frame_length + (m - 1) * cfg.hop
    if padded_len > len(x):
        x = np.concatenate([x, np.zeros(padded_len - len(x))])
    frames = np.lib.stride_tricks.sliding_window_view(
        x, cfg.frame_length)[::cfg.hop]
    spec = np.fft.rfft(frames * cfg.window, axis=1).T
    return Spectrogram(np.ascontiguousarray(spec), sample_rate / cfg.frame_length)


def istft(spec: Spectrogram, cfg: StftConfig, out_len: int) -> np.ndarray:
    """Weighted overlap-add inverse, truncated or zero-padded to out_len.

    The synthesis window equals the analysis window; the overlap-added
    result is divided by the summed squared-window envelope (floored at
    1e-8 so the frame edges stay bounded).
    """
    if spec.n_bins != cfg.n_bins:
        raise DimensionError(
            f"spectrogram has {spec.n_bins} bins, config implies {cfg.n_bins}"
        )
    frames = np.fft.irfft(spec.values.T, n=cfg.frame_length, axis=1)
    total = cfg.frame_length + (spec.n_frames - 1) * cfg.hop
    y = np.zeros(total)
    wsum = np.zeros(total)
    w = cfg.window
    w2 = w * w
    for m in range(spec.n_frames):
        lo = m * cfg.hop
        y[lo:lo + cfg.frame_length] += frames[m] * w
        wsum[lo:lo + cfg.frame_length] += w2
    y /= np.maximum(wsum, WOLA_FLOOR)
    if out_len <= total:
        return y[:out_len]
    return np.concatenate([y, np.zeros(out_len - total)])
