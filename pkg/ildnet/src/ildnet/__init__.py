"""Trainable level-difference mask producer for the binaural separator.

A compact encoder-decoder segmentation network (encoder depth 2) trained
on exported level-difference planes with ideal-binary-mask labels; emits
soft per-source masks through the BSMK exchange format.
"""

__version__ = "0.1.0"

from .exchange import ExchangeError, read_planes, validate_file, write_planes
from .infer import infer
from .model import MaskNet, TILE_MULTIPLE, load_model, save_model
from .train import train

__all__ = ["ExchangeError", "read_planes", "write_planes", "validate_file",
           "MaskNet", "TILE_MULTIPLE", "load_model", "save_model",
           "train", "infer"]
