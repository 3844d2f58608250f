"""Binaural blind source separation from interaural cues.

EM clustering over interaural phase residuals, pluggable level-difference
mask providers (in-process EM or file-based), product/sub-band mask fusion,
a seeded room-mixture simulator, and SDR/STOI evaluation.
"""

__version__ = "0.1.0"

from .audio import AudioClip, PIPELINE_RATE, read_wav, resample_to_16k, write_wav
from .em import (EmConfig, EmResult, IpdModelParams, Posteriors, e_step,
                 log_likelihood, m_step, phat_initialize, run_em,
                 tau_centroids)
from .fusion import (FusionConfig, Permutation, align_permutation_blind,
                     align_permutation_oracle, apply_and_resynthesize, fuse)
from .ild import (export_training_pairs, ild_masks_from_em, ild_to_unit,
                  load_mask_file, unit_to_ild, write_mask_file)
from .interaural import (InterauralFeatures, TauGrid, interaural_features,
                         phase_residual, wrap_phase)
from .masks import SoftMask
from .metrics import SeparationReport, bss_eval_sdr, evaluate_separation, stoi
from .pipeline import SeparationOptions, SeparationOutput, separate_mixture
from .room import (ROOM_PRESETS, RoomSpec, SourceGeometry, load_rir_set,
                   make_mixture, synthetic_speech, synth_rir)
from .stft import Spectrogram, StftConfig, istft, stft

__all__ = [
    "AudioClip", "PIPELINE_RATE", "read_wav", "write_wav", "resample_to_16k",
    "StftConfig", "Spectrogram", "stft", "istft",
    "InterauralFeatures", "TauGrid", "interaural_features", "phase_residual",
    "wrap_phase",
    "EmConfig", "EmResult", "IpdModelParams", "Posteriors", "phat_initialize",
    "e_step", "m_step", "log_likelihood", "run_em", "tau_centroids",
    "SoftMask", "ild_masks_from_em", "load_mask_file", "write_mask_file",
    "export_training_pairs", "ild_to_unit", "unit_to_ild",
    "FusionConfig", "Permutation", "fuse", "align_permutation_blind",
    "align_permutation_oracle", "apply_and_resynthesize",
    "RoomSpec", "SourceGeometry", "ROOM_PRESETS", "synth_rir", "make_mixture",
    "load_rir_set", "synthetic_speech",
    "SeparationReport", "bss_eval_sdr", "stoi", "evaluate_separation",
    "SeparationOptions", "SeparationOutput", "separate_mixture",
]
