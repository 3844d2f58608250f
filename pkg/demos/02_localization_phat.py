# # Delay estimation with phase-transform cross-correlation
#
# The EM model is seeded by whitened cross-correlation evaluated on a
# fractional delay grid (-15..15 samples in half-sample steps). Whitening
# sharpens the peaks so two sources at distinct angles show up as two
# spikes.

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import os

import binsep as bs
from binsep.em import gcc_phat_on_grid
from binsep.interaural import TauGrid
from binsep.stft import stft

os.makedirs("demos/output", exist_ok=True)

room = bs.ROOM_PRESETS["X"]
s1 = bs.synthetic_speech(1.05, np.random.default_rng(5))
s2 = bs.synthetic_speech(1.05, np.random.default_rng(6))

# target at 60 degrees, masker frontal
rirs = [bs.synth_rir(room, bs.SourceGeometry(60), seed=1),
        bs.synth_rir(room, bs.SourceGeometry(0), seed=2)]
mixture, _ = bs.make_mixture([s1, s2], rirs)

grid = TauGrid.default()
gcc = gcc_phat_on_grid(stft(mixture.channel(0)), stft(mixture.channel(1)),
                       grid)

from binsep.room import interaural_delay_samples
expected = interaural_delay_samples(bs.SourceGeometry(60))
print(f"geometric delay at 60 degrees: {expected:.2f} samples")
print(f"strongest grid point: {grid.values[np.argmax(gcc)]:.1f} samples")

params = bs.phat_initialize(mixture, bs.EmConfig())
print(f"seeded source delays: {params.phat_delays}")

plt.figure(figsize=(8, 3.5))
plt.plot(grid.values, gcc / gcc.max())
plt.axvline(expected, color="r", ls="--", label="target (geometric)")
plt.axvline(0.0, color="g", ls="--", label="masker")
plt.xlabel("delay (samples)")
plt.ylabel("normalized correlation")
plt.legend()
plt.tight_layout()
plt.savefig("demos/output/02_phat.png", dpi=110)
print("wrote demos/output/02_phat.png")
