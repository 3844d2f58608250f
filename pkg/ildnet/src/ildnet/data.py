"""Training pairs: level-difference planes and one-hot label planes.

Pairs are matched by filename prefix: `<prefix>_ild.bsmk` (one grayscale
plane) with `<prefix>_ibm.bsmk` (one-hot label planes). Tiles whose dims
are not divisible by the network stride are cropped to the nearest valid
size, with a warning.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .exchange import ExchangeError, read_planes
from .model import TILE_MULTIPLE

log = logging.getLogger(__name__)


def find_pairs(data_dir) -> list:
    data_dir = Path(data_dir)
    pairs = []
    for feat in sorted(data_dir.glob("*_ild.bsmk")):
        label = feat.with_name(feat.name.replace("_ild.bsmk", "_ibm.bsmk"))
        if label.exists():
            pairs.append((feat, label))
    return pairs


_warned_crops: set = set()


def crop_to_multiple(plane: np.ndarray) -> np.ndarray:
    k, m = plane.shape[-2:]
    k2 = k - k % TILE_MULTIPLE
    m2 = m - m % TILE_MULTIPLE
    if (k2, m2) != (k, m) and (k, m) not in _warned_crops:
        _warned_crops.add((k, m))
        log.warning("cropping %dx%d tiles to %dx%d (stride multiple)",
                    k, m, k2, m2)
    return plane[..., :k2, :m2]


def load_pair(feat_path, label_path) -> tuple:
    """Returns (features (1, K', M') in [-1, 1], labels (K', M') int64)."""
    feat = read_planes(feat_path)
    labels = read_planes(label_path)
    if feat.shape[0] != 1:
        raise ExchangeError(f"{feat_path}: expected one feature plane")
    if labels.shape[0] < 2:
        raise ExchangeError(f"{label_path}: expected one plane per class")
    if feat.shape[1:] != labels.shape[1:]:
        raise ExchangeError("feature/label dims disagree")
    x = crop_to_multiple(feat)[0]
    y = crop_to_multiple(np.argmax(labels, axis=0))
    return (2.0 * x - 1.0)[None, :, :].astype(np.float32), y.astype(np.int64)


def load_dataset(data_dir, min_pairs: int = 1) -> tuple:
    """All pairs as arrays, cropped to the common minimum tile."""
    pairs = find_pairs(data_dir)
    if len(pairs) < min_pairs:
        raise ExchangeError(
            f"{data_dir}: found {len(pairs)} pairs, need >= {min_pairs}")
    feats, labels = [], []
    for fp, lp in pairs:
        x, y = load_pair(fp, lp)
        feats.append(x)
        labels.append(y)
    k = min(x.shape[1] for x in feats)
    m = min(x.shape[2] for x in feats)
    feats = np.stack([x[:, :k, :m] for x in feats])
    labels = np.stack([y[:k, :m] for y in labels])
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ExchangeError(
            f"degenerate labels: only class {classes.tolist()} present")
    return feats, labels
