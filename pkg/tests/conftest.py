import numpy as np
import pytest

from binsep.audio import AudioClip
from binsep.room import synthetic_speech


def delay_rir_pair(d_left: int, d_right: int, n: int = 64):
    """Stereo pure-delay impulse response: unit spikes at 16 + delay."""
    left = np.zeros(n)
    right = np.zeros(n)
    left[16 + d_left] = 1.0
    right[16 + d_right] = 1.0
    return AudioClip(left, 16000), AudioClip(right, 16000)


def talker(seed: int, duration: float = 1.05) -> AudioClip:
    return synthetic_speech(duration, np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
