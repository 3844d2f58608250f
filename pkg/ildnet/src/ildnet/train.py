"""Training loop: SGD with momentum 0.95, L2 1e-4, lr 0.01, batch 8."""

from __future__ import annotations

import logging

import numpy as np
import torch
from torch import nn

from .data import load_dataset
from .model import MaskNet, save_model

log = logging.getLogger(__name__)

MOMENTUM = 0.95
WEIGHT_DECAY = 1e-4
LEARNING_RATE = 0.01
BATCH_SIZE = 8
HOLDOUT_FRACTION = 0.1
MIN_PAIRS = 20


def split_indices(n: int, holdout: float = HOLDOUT_FRACTION):
    """Deterministic split: every k-th example validates."""
    stride = max(2, int(round(1.0 / holdout)))
    val = list(range(0, n, stride))
    train = [i for i in range(n) if i % stride != 0]
    return train, val


def pixel_accuracy(model: MaskNet, feats: torch.Tensor,
                   labels: torch.Tensor, batch: int = BATCH_SIZE) -> float:
    model.eval()
    correct = total = 0
    with torch.no_grad():
        for lo in range(0, len(feats), batch):
            pred = model(feats[lo:lo + batch]).argmax(dim=1)
            correct += int((pred == labels[lo:lo + batch]).sum())
            total += int(labels[lo:lo + batch].numel())
    return correct / max(total, 1)


def train(data_dir, epochs: int, seed: int, out_path,
          min_pairs: int = MIN_PAIRS) -> list:
    """Train on a directory of exported pairs; returns the validation
    pixel-accuracy curve (one entry per epoch) and saves a checkpoint.

    Inputs are standardized with training-set statistics (kept in the
    checkpoint for inference): real level planes swing a small fraction
    of the grayscale range, far too little for the fixed learning rate.
    """
    feats_np, labels_np = load_dataset(data_dir, min_pairs=min_pairs)
    mean = float(feats_np.mean())
    std = float(feats_np.std()) or 1.0
    feats_np = (feats_np - mean) / std
    torch.manual_seed(seed)
    feats = torch.from_numpy(feats_np.astype(np.float32))
    labels = torch.from_numpy(labels_np)
    train_idx, val_idx = split_indices(len(feats))
    x_train, y_train = feats[train_idx], labels[train_idx]
    x_val, y_val = feats[val_idx], labels[val_idx]

    model = MaskNet()
    optimizer = torch.optim.SGD(model.parameters(), lr=LEARNING_RATE,
                                momentum=MOMENTUM,
                                weight_decay=WEIGHT_DECAY)
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        model.train()
        order = order_rng.permutation(len(x_train))
        running = 0.0
        for lo in range(0, len(order), BATCH_SIZE):
            idx = torch.from_numpy(order[lo:lo + BATCH_SIZE].copy())
            optimizer.zero_grad()
            loss = loss_fn(model(x_train[idx]), y_train[idx])
            loss.backward()
            optimizer.step()
            running += float(loss.detach()) * len(idx)
        accuracy = pixel_accuracy(model, x_val, y_val)
        curve.append(accuracy)
        log.info("epoch %d: train loss %.4f, val pixel accuracy %.4f",
                 epoch + 1, running / len(x_train), accuracy)
    save_model(model, out_path, tile_shape=feats.shape[2:],
               input_stats=(mean, std))
    return curve
