"""Compact encoder-decoder segmentation network (encoder depth 2).

Input: one grayscale level-difference plane, dims divisible by 4.
Output: per-pixel 2-class logits; softmax gives the soft masks.
"""

from __future__ import annotations

import torch
from torch import nn

ENCODER_DEPTH = 2
TILE_MULTIPLE = 2 ** ENCODER_DEPTH


def _block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class MaskNet(nn.Module):
    def __init__(self, n_classes: int = 2, base: int = 16):
        super().__init__()
        self.enc1 = _block(1, base)
        self.enc2 = _block(base, 2 * base)
        self.pool = nn.MaxPool2d(2)
        self.bottom = _block(2 * base, 4 * base)
        self.up1 = nn.ConvTranspose2d(4 * base, 2 * base, 2, stride=2)
        self.dec1 = _block(4 * base, 2 * base)
        self.up2 = nn.ConvTranspose2d(2 * base, base, 2, stride=2)
        self.dec2 = _block(2 * base, base)
        self.head = nn.Conv2d(base, n_classes, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        s1 = self.enc1(x)
        s2 = self.enc2(self.pool(s1))
        b = self.bottom(self.pool(s2))
        d1 = self.dec1(torch.cat([self.up1(b), s2], dim=1))
        d2 = self.dec2(torch.cat([self.up2(d1), s1], dim=1))
        return self.head(d2)


def save_model(model: MaskNet, path, tile_shape,
               input_stats=(0.0, 1.0)) -> None:
    torch.save({"state_dict": model.state_dict(),
                "tile_shape": tuple(tile_shape),
                "input_stats": tuple(float(v) for v in input_stats),
                "format": 1}, path)


def load_model(path) -> tuple:
    """Returns (model, tile_shape, input_stats)."""
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = MaskNet()
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return (model, tuple(payload["tile_shape"]),
            tuple(payload.get("input_stats", (0.0, 1.0))))
