"""Combine level- and phase-difference masks and resynthesize sources.

Three combination rules are supported: the plain element-wise product, a
sub-band concatenation that trusts phase below 1.5 kHz, the product in the
1.5-4 kHz midrange, and level above 4 kHz, and a weighted variant that
splits the phase band at 500 Hz and scales each of the four segments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .audio import AudioClip, PIPELINE_RATE
from .errors import DataError, DimensionError
from .masks import SoftMask, require_same_shape
from .stft import Spectrogram, StftConfig, istft

MASK_TYPES = ("product", "subband", "weighted_subband")

PERM_TIE_TOL = 1e-9


@dataclass(frozen=True)
class FusionConfig:
    mask_type: str = "subband"
    band_edges_hz: tuple = (1500.0, 4000.0)
    weighted_extra_edge_hz: float = 500.0
    betas: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.mask_type not in MASK_TYPES:
            raise DataError(f"unknown mask type {self.mask_type!r}")
        e1, e2 = self.band_edges_hz
        if not (0.0 < e1 < e2 < PIPELINE_RATE / 2):
            raise DataError("band edges must satisfy 0 < e1 < e2 < fs/2")
        if not (0.0 < self.weighted_extra_edge_hz < e1):
            raise DataError("extra edge must sit below the first band edge")
        if len(self.betas) != 4 or any(b <= 0 for b in self.betas):
            raise DataError("betas must be four positive weights")


@dataclass
class Permutation:
    """Estimate ordering: entry j is the estimate index paired with
    reference (or level-mask) j."""

    order: tuple
    low_confidence: bool = False

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise DataError(f"{self.order} is not a permutation")


def band_edge_bin(freq_hz: float, n_bins: int,
                  sample_rate: int = PIPELINE_RATE) -> int:
    """Nearest FFT bin to a frequency; edge bins join the band above."""
    frame_length = 2 * (n_bins - 1)
    return int(round(freq_hz * frame_length / sample_rate))


def fuse(ild_masks: list, ipd_masks: list, cfg: FusionConfig,
         sample_rate: int = PIPELINE_RATE) -> list:
    """Fuse pre-aligned per-source mask pairs into retrieval masks."""
    if len(ild_masks) != len(ipd_masks):
        raise DimensionError("per-source mask counts differ")
    shape = require_same_shape(list(ild_masks) + list(ipd_masks))
    k = shape[0]
    b1 = band_edge_bin(cfg.band_edges_hz[0], k, sample_rate)
    b2 = band_edge_bin(cfg.band_edges_hz[1], k, sample_rate)
    b0 = band_edge_bin(cfg.weighted_extra_edge_hz, k, sample_rate)
    out = []
    for ild, ipd in zip(ild_masks, ipd_masks):
        a, p = ild.values, ipd.values
        if cfg.mask_type == "product":
            fused = a * p
        elif cfg.mask_type == "subband":
            fused = np.concatenate(
                [p[:b1], a[b1:b2] * p[b1:b2], a[b2:]], axis=0)
        else:
            bl, b2_, b3, b4 = cfg.betas
            fused = np.concatenate([
                bl * p[:b0],
                b2_ * p[b0:b1],
                b3 * (a[b1:b2] * p[b1:b2]),
                b4 * a[b2:],
            ], axis=0)
            np.clip(fused, 0.0, 1.0, out=fused)
        out.append(SoftMask(np.clip(fused, 0.0, 1.0), ipd.source_id))
    return out


def apply_and_resynthesize(mask: SoftMask, spec_left: Spectrogram,
                           spec_right: Spectrogram, cfg: StftConfig,
                           out_len: int) -> AudioClip:
    """Mask both channel spectrograms, sum them, and invert to time."""
    if mask.shape != spec_left.values.shape:
        raise DimensionError(
            f"mask {mask.shape} vs spectrogram {spec_left.values.shape}")
    if spec_left.values.shape != spec_right.values.shape:
        raise DimensionError("channel spectrograms disagree")
    masked = mask.values * (spec_left.values + spec_right.values)
    y = istft(Spectrogram(masked, spec_left.bin_hz), cfg, out_len)
    return AudioClip(y, PIPELINE_RATE)


def _permutations_identity_first(n: int):
    yield tuple(range(n))
    for p in itertools.permutations(range(n)):
        if p != tuple(range(n)):
            yield p


def align_permutation_blind(ipd_masks: list, ild_masks: list) -> Permutation:
    """Reference-free alignment: pair each level mask with the phase mask
    maximizing the total element-wise inner product. Ties fall back to the
    identity ordering and are flagged."""
    require_same_shape(list(ipd_masks) + list(ild_masks))
    n = len(ipd_masks)
    if n != len(ild_masks):
        raise DimensionError("mask counts differ")
    scores = np.array([[float(np.sum(a.values * p.values))
                        for p in ipd_masks] for a in ild_masks])
    best, best_score = None, -np.inf
    n_best = 0
    for perm in _permutations_identity_first(n):
        s = sum(scores[j, perm[j]] for j in range(n))
        if s > best_score + PERM_TIE_TOL:
            best, best_score, n_best = perm, s, 1
        elif s > best_score - PERM_TIE_TOL:
            n_best += 1
    return Permutation(order=best, low_confidence=n_best > 1)


def align_permutation_oracle(ipd_masks: list, spec_left: Spectrogram,
                             spec_right: Spectrogram, references: list,
                             cfg: StftConfig) -> Permutation:
    """Order phase masks against known references.

    Each phase mask is applied and inverted, and the distortion-ratio
    evaluator's permutation search supplies the ordering; the masked
    signals themselves are discarded. Ambiguous (tied) searches fall back
    to identity and are flagged."""
    from .metrics import bss_eval_sdr  # local import avoids a cycle

    out_len = min(r.n_samples for r in references)
    estimates = [
        apply_and_resynthesize(m, spec_left, spec_right, cfg, out_len)
        for m in ipd_masks
    ]
    _, perm = bss_eval_sdr(estimates, references)
    return perm
