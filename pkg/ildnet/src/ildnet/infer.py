"""Inference: grayscale level plane in, soft mask planes out.

Inputs of any size at least as large as the training tile are accepted;
smaller ones are zero-padded to the tile, and everything is padded to the
network stride and cropped back, so the output header always matches the
input dims.
"""

from __future__ import annotations

import numpy as np
import torch

from .exchange import ExchangeError, read_planes, write_planes
from .model import TILE_MULTIPLE, load_model


def _pad_to(x: np.ndarray, k_min: int, m_min: int) -> np.ndarray:
    k = max(k_min, x.shape[0])
    m = max(m_min, x.shape[1])
    k += (-k) % TILE_MULTIPLE
    m += (-m) % TILE_MULTIPLE
    return np.pad(x, ((0, k - x.shape[0]), (0, m - x.shape[1])))


def infer(model_path, in_path, out_path) -> tuple:
    """Run the network on one exchange file; returns (n_classes, K, M)."""
    model, tile_shape, (mean, std) = load_model(model_path)
    planes = read_planes(in_path)
    if planes.shape[0] != 1:
        raise ExchangeError(
            f"{in_path}: expected a single feature plane, got "
            f"{planes.shape[0]}")
    gray = planes[0]
    k, m = gray.shape
    standardized = (2.0 * gray - 1.0 - mean) / std
    padded = _pad_to(standardized, *tile_shape)
    x = torch.from_numpy(padded[None, None].astype(np.float32))
    with torch.no_grad():
        probs = torch.softmax(model(x), dim=1)[0].numpy()
    masks = probs[:, :k, :m]
    masks = np.clip(masks, 0.0, 1.0)
    write_planes(list(masks), out_path)
    return masks.shape
