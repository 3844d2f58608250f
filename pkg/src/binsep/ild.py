"""Level-difference mask providers and the binary mask exchange format.

Masks cross the process boundary as "BSMK" files: a 16-byte header
(magic, version, plane count, K, M) followed by row-major little-endian
float32 planes. The same container carries level-difference feature
planes (mapped affinely into [0, 1]) and the hard labels used to train an
external mask producer, so a trained network and the in-process EM model
are interchangeable behind one provider interface.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from .audio import AudioClip
from .em import EmResult
from .errors import DataError, DimensionError, MaskFileError
from .interaural import interaural_features
from .masks import SoftMask, require_same_shape, validate_mask_values
from .stft import StftConfig, stft

log = logging.getLogger(__name__)

MASK_MAGIC = b"BSMK"
MASK_VERSION = 1
_HEADER = struct.Struct("<4sHHII")

# Grayscale mapping for level-difference planes: +/-20 dB onto [0, 1].
ILD_GRAY_HALF_RANGE_DB = 20.0

RANGE_SLACK = 1e-6


def ild_to_unit(ild_db: np.ndarray) -> np.ndarray:
    clipped = np.clip(ild_db, -ILD_GRAY_HALF_RANGE_DB, ILD_GRAY_HALF_RANGE_DB)
    return clipped / (2.0 * ILD_GRAY_HALF_RANGE_DB) + 0.5


def unit_to_ild(gray: np.ndarray) -> np.ndarray:
    return (np.asarray(gray) - 0.5) * (2.0 * ILD_GRAY_HALF_RANGE_DB)


def feature_plane(features) -> np.ndarray:
    """Grayscale level plane for export: the same conditioned observable
    the EM models (clamped, silent bins neutral), mapped onto [0, 1].
    Raw epsilon-floored ratios at digitally silent bins would otherwise
    export as extreme 0/1 values with arbitrary sign."""
    from .em import _clamped_ild
    return ild_to_unit(_clamped_ild(features))


def write_mask_file(masks: list, path) -> None:
    """Serialize planes to the exchange format (bit-exact round trip)."""
    if not masks:
        raise DataError("no masks to write")
    arrays = [np.asarray(m.values if isinstance(m, SoftMask) else m)
              for m in masks]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1 or arrays[0].ndim != 2:
        raise DimensionError(f"mask planes disagree in shape: {sorted(shapes)}")
    for a in arrays:
        validate_mask_values(a)
    k, m = arrays[0].shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MASK_MAGIC, MASK_VERSION, len(arrays), k, m))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_mask_file(path, expected_k: int | None = None,
                   expected_m: int | None = None) -> list:
    """Read exchange-format planes, checked against the live mixture dims.

    A file with more frames than expected is truncated (producers may pad);
    fewer frames, or any bin-count mismatch, is an error. Values straying
    outside [0, 1] by at most 1e-6 are clamped with a warning; worse is an
    error.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise MaskFileError(f"{path}: file smaller than header")
    magic, version, n_planes, k, m = _HEADER.unpack_from(blob)
    if magic != MASK_MAGIC:
        raise MaskFileError(f"{path}: bad magic {magic!r}")
    if version != MASK_VERSION:
        raise MaskFileError(f"{path}: unsupported version {version}")
    if n_planes < 1:
        raise MaskFileError(f"{path}: no planes")
    expected_bytes = n_planes * k * m * 4
    if len(blob) - _HEADER.size != expected_bytes:
        raise MaskFileError(
            f"{path}: payload is {len(blob) - _HEADER.size} bytes, "
            f"header implies {expected_bytes}"
        )
    if expected_k is not None and k != expected_k:
        raise MaskFileError(f"{path}: {k} bins, mixture has {expected_k}")
    if expected_m is not None and m < expected_m:
        raise MaskFileError(
            f"{path}: {m} frames, mixture needs {expected_m}"
        )
    planes = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    planes = planes.reshape(n_planes, k, m).astype(np.float64)
    lo, hi = float(planes.min()), float(planes.max())
    if lo < -RANGE_SLACK or hi > 1.0 + RANGE_SLACK:
        raise MaskFileError(
            f"{path}: values outside [0, 1]: min {lo:.3g}, max {hi:.3g}")
    if lo < 0.0 or hi > 1.0:
        log.warning("%s: clamping values within %.0e of [0, 1]",
                    path, RANGE_SLACK)
        planes = np.clip(planes, 0.0, 1.0)
    if expected_m is not None and m > expected_m:
        log.warning("%s: truncating %d padded frames", path, m - expected_m)
        planes = planes[:, :, :expected_m]
    return [SoftMask(planes[i], f"source_{i + 1}")
            for i in range(n_planes)]


def ild_masks_from_em(result: EmResult) -> list:
    """Level-difference masks from a joint EM run.

    The posterior masks of a run whose likelihood included the per-source
    level Gaussians double as the level-difference provider; a run fitted
    without that term has nothing to offer here and is rejected.
    """
    if not result.config.use_ild:
        raise DataError(
            "EM was run without the level-difference term; "
            "rerun with use_ild=True or use another provider"
        )
    return result.masks


def ild_only_masks(features, n_sources: int = 2,
                   iterations: int = 16) -> list:
    """Level-only baseline: a scalar Gaussian-mixture EM on the clamped
    level plane, one component per source, parameters tied across TF.

    Means seed at the observed quartiles (upper quartile first, the
    louder-left source). Points whose level carries no contrast come out
    near 1/n_sources, so these masks are informative exactly where the
    level cue is.
    """
    from .em import ILD_VAR_FLOOR_DB2, _clamped_ild

    x = _clamped_ild(features).ravel()
    qs = np.percentile(x, np.linspace(75.0, 25.0, n_sources))
    mu = qs.astype(np.float64)
    var = np.full(n_sources, max(float(np.var(x)), ILD_VAR_FLOOR_DB2))
    w = np.full(n_sources, 1.0 / n_sources)
    for _ in range(iterations):
        log_dens = (np.log(w)[:, None]
                    - 0.5 * (np.log(2.0 * np.pi * var))[:, None]
                    - (x[None, :] - mu[:, None]) ** 2 / (2.0 * var[:, None]))
        peak = log_dens.max(axis=0)
        resp = np.exp(log_dens - peak[None, :])
        resp /= resp.sum(axis=0, keepdims=True)
        mass = resp.sum(axis=1)
        w = mass / len(x)
        mu = (resp @ x) / mass
        var = np.maximum(
            np.einsum("qn,qn->q", resp, (x[None, :] - mu[:, None]) ** 2)
            / mass, ILD_VAR_FLOOR_DB2)
    shape = features.ild_db.shape
    return [SoftMask(resp[i].reshape(shape), f"source_{i + 1}")
            for i in range(n_sources)]


def ideal_binary_masks(references: list, cfg: StftConfig) -> list:
    """One-hot labels: each TF point goes to the reference with the larger
    magnitude (channel-summed for stereo references). Ties, including
    silent-everywhere points, go to the later source."""
    mags = []
    for ref in references:
        x = ref.samples.sum(axis=1) if ref.channels == 2 else ref.samples
        mags.append(np.abs(stft(x, cfg, ref.sample_rate).values))
    stacked = np.stack(mags[::-1])
    winner = len(references) - 1 - np.argmax(stacked, axis=0)
    return [SoftMask((winner == i).astype(np.float64), f"source_{i + 1}")
            for i in range(len(references))]


def export_training_pairs(mixture: AudioClip, sources: list, out_dir,
                          prefix: str, cfg: StftConfig = StftConfig()) -> tuple:
    """Write one training pair: the mixture's level-difference plane (as a
    [0, 1] grayscale image) and the ideal-binary-mask label planes.

    Returns (feature_path, label_path). Sources must be the per-source
    reference signals aligned with the mixture.
    """
    if mixture.channels != 2:
        raise DataError("mixture must be stereo")
    for s in sources:
        if s.n_samples != mixture.n_samples:
            raise DimensionError(
                f"reference length {s.n_samples} != mixture length "
                f"{mixture.n_samples}"
            )
    feats = interaural_features(
        stft(mixture.channel(0), cfg, mixture.sample_rate),
        stft(mixture.channel(1), cfg, mixture.sample_rate),
    )
    labels = ideal_binary_masks(sources, cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    feature_path = out_dir / f"{prefix}_ild.bsmk"
    label_path = out_dir / f"{prefix}_ibm.bsmk"
    write_mask_file([feature_plane(feats)], feature_path)
    write_mask_file(labels, label_path)
    return feature_path, label_path


def provider_masks(spec_string: str, em_result: EmResult | None,
                   expected_k: int, expected_m: int,
                   features=None) -> list:
    """Resolve a provider spec: "em" (joint-EM posteriors), "ild_em"
    (level-only mixture baseline), "file:<path>", or "none" (all-ones)."""
    if spec_string == "em":
        if em_result is None:
            raise DataError("provider 'em' needs an EM result")
        return ild_masks_from_em(em_result)
    if spec_string == "ild_em":
        if features is None:
            raise DataError("provider 'ild_em' needs interaural features")
        return ild_only_masks(features)
    if spec_string.startswith("file:"):
        return load_mask_file(spec_string[5:], expected_k, expected_m)
    if spec_string == "none":
        ones = np.ones((expected_k, expected_m))
        return [SoftMask(ones.copy(), f"source_{i + 1}") for i in range(2)]
    raise DataError(f"unknown mask provider {spec_string!r}")
