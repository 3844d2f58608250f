"""High-level separation pipeline shared by the command line and demos."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip
from .em import EmConfig, EmResult, run_em
from .errors import DataError
from .fusion import (FusionConfig, Permutation, align_permutation_blind,
                     align_permutation_oracle, apply_and_resynthesize, fuse)
from .ild import provider_masks
from .interaural import interaural_features
from .stft import StftConfig, stft


@dataclass
class SeparationOptions:
    mask_type: str = "subband"
    ild_provider: str = "em"
    use_garbage: bool = False
    use_ild: bool | None = None        # default: True iff provider is "em"
    iterations: int = 16
    betas: tuple = (1.0, 1.0, 1.0, 1.0)
    stft: StftConfig = field(default_factory=StftConfig)

    def em_config(self) -> EmConfig:
        use_ild = self.use_ild
        if use_ild is None:
            use_ild = self.ild_provider == "em"
        return EmConfig(iterations=self.iterations, use_ild=use_ild,
                        use_garbage=self.use_garbage, stft=self.stft)


@dataclass
class SeparationOutput:
    sources: list                  # mono AudioClip per source
    ipd_masks: list
    ild_masks: list
    fused_masks: list
    perm: Permutation
    em_result: EmResult


def separate_mixture(mixture: AudioClip, opts: SeparationOptions,
                     references: list | None = None,
                     em_result: EmResult | None = None) -> SeparationOutput:
    """Run the whole chain on a stereo mixture.

    Phase masks come from EM; level masks from the configured provider.
    With references the ordering is resolved by the evaluator's permutation
    search on the phase-masked signals, otherwise blindly by mask overlap.
    Pass a precomputed `em_result` to reuse one EM fit across mask types.
    """
    if mixture.channels != 2:
        raise DataError("mixture must be stereo")
    mixture.require_rate()
    spec_l = stft(mixture.channel(0), opts.stft, mixture.sample_rate)
    spec_r = stft(mixture.channel(1), opts.stft, mixture.sample_rate)

    if em_result is None:
        em_result = run_em(mixture, opts.em_config())
    ipd_masks = em_result.masks
    k, m = ipd_masks[0].shape
    features = interaural_features(spec_l, spec_r)
    ild_masks = provider_masks(opts.ild_provider, em_result, k, m,
                               features=features)
    if len(ild_masks) != len(ipd_masks):
        raise DataError(
            f"provider produced {len(ild_masks)} masks for "
            f"{len(ipd_masks)} sources")

    if references is not None:
        mono_refs = [as_mono(r) for r in references]
        perm = align_permutation_oracle(ipd_masks, spec_l, spec_r,
                                        mono_refs, opts.stft)
    else:
        perm = align_permutation_blind(ipd_masks, ild_masks)
    ordered_ipd = [ipd_masks[perm.order[j]] for j in range(len(ipd_masks))]
    if opts.ild_provider == "em":
        # same EM run produced both mask sets, so they permute together
        ild_masks = [ild_masks[perm.order[j]] for j in range(len(ild_masks))]

    fusion_cfg = FusionConfig(mask_type=opts.mask_type, betas=opts.betas)
    fused = fuse(ild_masks, ordered_ipd, fusion_cfg)
    out_len = mixture.n_samples
    sources = [apply_and_resynthesize(f, spec_l, spec_r, opts.stft, out_len)
               for f in fused]
    return SeparationOutput(sources=sources, ipd_masks=ordered_ipd,
                            ild_masks=ild_masks, fused_masks=fused,
                            perm=perm, em_result=em_result)


def as_mono(clip: AudioClip) -> AudioClip:
    """Stereo references collapse to mono by channel summation, matching
    how masked estimates are resynthesized."""
    if clip.channels == 1:
        return clip
    return AudioClip(clip.samples.sum(axis=1), clip.sample_rate)
