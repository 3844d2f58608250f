import numpy as np
import pytest

from ildnet.exchange import write_planes


def separable_pair(rng, k=513, m=64, gap_db=20.0):
    """One trivially separable training pair: blocky class-1 occupancy,
    level plane at +-gap/2 dB plus noise, mapped to [0, 1] grayscale."""
    label = np.zeros((k, m))
    block_k = max(2, k // 8)
    block_m = max(2, m // 4)
    for _ in range(12):
        kk = int(rng.integers(0, k - block_k))
        mm = int(rng.integers(0, m - block_m))
        label[kk:kk + int(rng.integers(1, block_k + 1)),
              mm:mm + int(rng.integers(1, block_m + 1))] = 1.0
    ild_db = np.where(label > 0, gap_db / 2, -gap_db / 2)
    ild_db = ild_db + rng.normal(0.0, 2.0, (k, m))
    gray = np.clip(ild_db, -20.0, 20.0) / 40.0 + 0.5
    return gray, np.stack([label, 1.0 - label])


def write_dataset(out_dir, n_pairs, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    for i in range(n_pairs):
        gray, labels = separable_pair(rng, **kwargs)
        write_planes([gray], out_dir / f"p{i:04d}_ild.bsmk")
        write_planes(list(labels), out_dir / f"p{i:04d}_ibm.bsmk")


@pytest.fixture
def rng():
    return np.random.default_rng(7)
