"""Binaural mixture construction: synthetic impulse responses, measured
response loading, and convolution of normalized sources into mixtures.

The synthetic generator models the controlled variables of the measured
setups it stands in for: interaural delay and a frequency-flat head-shadow
level difference for the direct path, plus an exponentially decaying noise
tail parameterized by the reverberation time and the direct-to-reverberant
ratio. Source-to-array distance is fixed at 1.5 m and the capsules sit
175 mm apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .audio import AudioClip, PIPELINE_RATE, read_wav, resample_to_16k
from .errors import DataError, SampleRateError

SPEED_OF_SOUND = 343.0
MIC_SPACING_M = 0.175
# Head shadow at 90 degrees in the high band; measured head responses run
# 10-20 dB above a few kHz. Diffraction makes it frequency-dependent:
# negligible where the wavelength wraps around the head, full strength
# above the corner.
HEAD_SHADOW_DB = 15.0
SHADOW_CORNER_HZ = 1500.0
# Scattering around the head also perturbs high-frequency phase away from
# the pure-delay ideal; lateral sources get up to this much seeded phase
# jitter at high frequencies (zero for frontal sources by symmetry).
SCATTER_RAD = 0.6
SCATTER_CORNER_HZ = 2000.0
DEFAULT_DRR_DB = 6.0

_SINC_HALF_TAPS = 16
_DIRECT_OFFSET = 16           # leaves room for the interpolation kernel
_TAIL_START_GAP = 32          # 2 ms at 16 kHz between direct path and tail

# Reverberation structure: discrete coherent reflections carry most of the
# reverberant energy; a small diffuse (decorrelated) noise floor sits under
# them. Arrival density grows like t^2 (image-source statistics) and the
# per-reflection amplitude compensates by 1/t beyond _REFL_T_REF so the
# expected power envelope stays exponential.
N_REFLECTIONS = 120
DIFFUSE_ENERGY_FRACTION = 0.1
_REFL_T_REF = 0.01

AZIMUTHS_DEG = (0, 15, 30, 45, 60, 75, 90)


@dataclass(frozen=True)
class RoomSpec:
    name: str
    rt60_ms: float
    source_mic_distance_m: float = 1.5
    dims_m: tuple | None = None
    drr_db: float | None = None

    def __post_init__(self):
        if self.rt60_ms < 0 or self.source_mic_distance_m <= 0:
            raise DataError("rt60 must be >= 0 and distance positive")


# The five measured rooms these experiments emulate.
ROOM_PRESETS = {
    "X": RoomSpec("X", 0.0, 1.5, (17.04, 14.53, 6.5), None),
    "A": RoomSpec("A", 320.0, 1.5, (6.6, 5.7, 2.3), 6.09),
    "B": RoomSpec("B", 470.0, 1.5, (4.6, 4.6, 2.6), 5.31),
    "C": RoomSpec("C", 680.0, 1.5, (18.8, 23.5, 4.6), 8.82),
    "D": RoomSpec("D", 890.0, 1.5, (8.7, 8.0, 4.25), 6.12),
}


@dataclass(frozen=True)
class SourceGeometry:
    azimuth_deg: float
    mic_spacing_m: float = MIC_SPACING_M


def interaural_delay_samples(geom: SourceGeometry,
                             sample_rate: int = PIPELINE_RATE) -> float:
    """Plane-wave arrival-time difference, in samples (positive: left leads)."""
    theta = np.deg2rad(geom.azimuth_deg)
    return geom.mic_spacing_m / SPEED_OF_SOUND * np.sin(theta) * sample_rate


def _fractional_impulse(n: int, delay: float, gain: float) -> np.ndarray:
    """Windowed-sinc fractional-delay impulse (32 taps, Hann-shaped)."""
    out = np.zeros(n)
    center = int(round(delay))
    frac = delay - center
    k = np.arange(-_SINC_HALF_TAPS, _SINC_HALF_TAPS)
    taps = np.sinc(k - frac) * (0.5 + 0.5 * np.cos(np.pi * k / _SINC_HALF_TAPS))
    idx = center + k
    valid = (idx >= 0) & (idx < n)
    out[idx[valid]] = gain * taps[valid]
    return out


def _head_filter(pulse: np.ndarray, ild_db: float, scatter_rad: float,
                 rng, sample_rate: int) -> np.ndarray:
    """Shape a short pulse by the head response for one channel: a
    half-shadow shelf (ild_db/2 at high frequencies) plus seeded
    high-frequency scattering phase. Same length out."""
    if ild_db == 0.0 and scatter_rad == 0.0:
        return pulse
    n_fft = 4 * _SINC_HALF_TAPS
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    shelf = freqs ** 2 / (freqs ** 2 + SHADOW_CORNER_HZ ** 2)
    response = (10.0 ** (ild_db * shelf / 40.0)).astype(complex)
    if scatter_rad != 0.0:
        rough = rng.standard_normal(len(freqs))
        kernel = np.hanning(9)
        smooth = np.convolve(rough, kernel / kernel.sum(), mode="same")
        strength = freqs ** 2 / (freqs ** 2 + SCATTER_CORNER_HZ ** 2)
        response *= np.exp(1j * scatter_rad * strength * smooth)
    spectrum = np.fft.rfft(pulse, n_fft) * response
    return np.fft.irfft(spectrum, n_fft)[:len(pulse)]


def _direct_pair(n: int, geom: SourceGeometry, sample_rate: int, rng,
                 extra_delay: float = 0.0, gain: float = 1.0):
    """Binaural impulse pair for one arrival direction.

    The interaural level difference follows a diffraction-style shelf
    (zero at low frequencies, 6*sin(azimuth) dB above the corner) and
    lateral arrivals carry scattering phase jitter at high frequencies.
    """
    itd = interaural_delay_samples(geom, sample_rate)
    lateral = np.sin(np.deg2rad(geom.azimuth_deg))
    ild_db = HEAD_SHADOW_DB * lateral
    scatter = SCATTER_RAD * abs(lateral)

    def place(delay: float, side: float) -> np.ndarray:
        out = np.zeros(n)
        center = int(round(delay))
        frac = delay - center
        k = np.arange(-_SINC_HALF_TAPS, _SINC_HALF_TAPS)
        taps = np.sinc(k - frac) * (0.5 + 0.5 * np.cos(
            np.pi * k / _SINC_HALF_TAPS))
        taps = _head_filter(taps, side * ild_db, scatter, rng,
                            sample_rate) * gain
        idx = center + np.arange(-_SINC_HALF_TAPS,
                                 len(taps) - _SINC_HALF_TAPS)
        valid = (idx >= 0) & (idx < n)
        out[idx[valid]] = taps[valid]
        return out

    left = place(_DIRECT_OFFSET + extra_delay, +1.0)
    right = place(_DIRECT_OFFSET + extra_delay + itd, -1.0)
    return left, right


def synth_rir(spec: RoomSpec, geom: SourceGeometry, seed: int,
              sample_rate: int = PIPELINE_RATE) -> tuple:
    """Generate a seeded stereo impulse-response pair.

    Direct path: fractional-delay impulses with the geometric interaural
    delay and a 6*sin(azimuth) dB flat level difference (left channel leads
    and is louder for positive azimuths). Reverberation: discrete early
    reflections arriving from random directions under the room's decay
    envelope, plus a diffuse tail of independent Gaussian noise per channel
    whose energy falls 60 dB at rt60. The reverberant part is scaled to the
    requested direct-to-reverberant ratio.
    """
    itd = interaural_delay_samples(geom, sample_rate)
    rt60_s = spec.rt60_ms / 1000.0
    tail_len = int(np.ceil(1.3 * rt60_s * sample_rate))
    tail_start = _DIRECT_OFFSET + int(np.ceil(abs(itd))) + _TAIL_START_GAP
    n = _DIRECT_OFFSET + int(np.ceil(abs(itd))) + 2 * _SINC_HALF_TAPS + 1
    if tail_len > 0:
        n = tail_start + tail_len

    seq = np.random.SeedSequence(seed)
    rng, rng_l, rng_r = [np.random.default_rng(s) for s in seq.spawn(3)]
    left, right = _direct_pair(n, geom, sample_rate, rng)

    if tail_len > 0:
        tau_d = rt60_s / (3.0 * np.log(10.0))   # energy drops 60 dB at rt60

        # Reflections: coherent binaural copies from random directions.
        refl_l = np.zeros(n)
        refl_r = np.zeros(n)
        t_min, t_max = 0.0025, max(1.1 * rt60_s, 0.004)
        for _ in range(N_REFLECTIONS):
            t_refl = t_min + (t_max - t_min) * rng.uniform() ** (1.0 / 3.0)
            refl_geom = SourceGeometry(rng.uniform(-90.0, 90.0),
                                       geom.mic_spacing_m)
            amp = (np.exp(-t_refl / tau_d) * rng.uniform(0.4, 1.0)
                   * rng.choice((-1.0, 1.0))
                   * (_REFL_T_REF / max(t_refl, _REFL_T_REF)))
            d = t_refl * sample_rate
            if _DIRECT_OFFSET + d + abs(itd) + 2 * _SINC_HALF_TAPS >= n:
                continue
            rl, rr = _direct_pair(n, refl_geom, sample_rate, rng,
                                  extra_delay=d, gain=amp)
            refl_l += rl
            refl_r += rr

        # Diffuse floor: independent noise per channel, same envelope.
        t = np.arange(tail_len) / sample_rate
        env = np.exp(-(t + tail_start / sample_rate) / tau_d)
        diff_l = np.zeros(n)
        diff_r = np.zeros(n)
        diff_l[tail_start:] = rng_l.standard_normal(tail_len) * env
        diff_r[tail_start:] = rng_r.standard_normal(tail_len) * env

        e_refl = float(np.sum(refl_l ** 2) + np.sum(refl_r ** 2))
        e_diff = float(np.sum(diff_l ** 2) + np.sum(diff_r ** 2))
        if e_refl > 0:
            diff_share = DIFFUSE_ENERGY_FRACTION
            diff_scale = np.sqrt(diff_share / (1.0 - diff_share)
                                 * e_refl / e_diff)
            diff_l *= diff_scale
            diff_r *= diff_scale
        rev_l = refl_l + diff_l
        rev_r = refl_r + diff_r
        e_rev = float(np.sum(rev_l ** 2) + np.sum(rev_r ** 2))
        e_direct = float(np.sum(left ** 2) + np.sum(right ** 2))
        drr_db = spec.drr_db if spec.drr_db is not None else DEFAULT_DRR_DB
        scale = np.sqrt(e_direct / (e_rev * 10.0 ** (drr_db / 10.0)))
        left += scale * rev_l
        right += scale * rev_r

    return AudioClip(left, sample_rate), AudioClip(right, sample_rate)


def make_mixture(sources: list, rirs: list) -> tuple:
    """Convolve peak-normalized sources with their stereo responses.

    Returns (mixture, images): the stereo sum and the per-source stereo
    spatial images, all at the full convolution length (reverberant tails
    are kept, not clipped).
    """
    if len(sources) != len(rirs):
        raise DataError("need one stereo response pair per source")
    images = []
    total = 0
    for src, (rir_l, rir_r) in zip(sources, rirs):
        if src.channels != 1:
            raise DataError("sources must be mono")
        if src.n_samples == 0:
            raise DataError("empty source")
        rates = {src.sample_rate, rir_l.sample_rate, rir_r.sample_rate}
        if rates != {PIPELINE_RATE}:
            raise SampleRateError(f"all inputs must be 16 kHz, got {rates}")
        peak = float(np.max(np.abs(src.samples)))
        if peak == 0.0:
            raise DataError("silent source cannot be normalized")
        x = src.samples / peak
        img = np.stack([fftconvolve(x, rir_l.samples),
                        fftconvolve(x, rir_r.samples)], axis=1)
        images.append(img)
        total = max(total, img.shape[0])
    padded = [np.pad(img, ((0, total - img.shape[0]), (0, 0)))
              for img in images]
    mixture = AudioClip(np.sum(padded, axis=0), PIPELINE_RATE)
    image_clips = [AudioClip(p, PIPELINE_RATE) for p in padded]
    return mixture, image_clips


def load_rir_set(rir_dir, room: str, azimuth_deg: int) -> tuple:
    """Load `<room>/<azimuth>_L.wav` and `_R.wav`, resampling 48 kHz files."""
    base = Path(rir_dir) / str(room)
    clips = []
    for side in ("L", "R"):
        path = base / f"{int(azimuth_deg)}_{side}.wav"
        if not path.exists():
            raise FileNotFoundError(f"missing impulse response: {path}")
        clips.append(resample_to_16k(read_wav(path)))
    return clips[0], clips[1]


def _resonator(x: np.ndarray, center_hz: float, bandwidth_hz: float,
               sample_rate: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth_hz / sample_rate)
    theta = 2.0 * np.pi * center_hz / sample_rate
    return lfilter([1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r], x)


def synthetic_speech(duration_s: float, rng: np.random.Generator,
                     sample_rate: int = PIPELINE_RATE) -> AudioClip:
    """Seeded speech-like test source.

    Alternating voiced segments (harmonic complexes with a drifting
    fundamental, shaped by two random formant resonators), fricative-like
    band-passed noise bursts, and short pauses. The result is sparse in
    time-frequency the way speech is, which is what makes mask-based
    separation of two independent talkers possible at all.
    """
    n = int(round(duration_s * sample_rate))
    out = np.zeros(n)
    pos = 0
    while pos < n:
        if rng.uniform() < 0.2:                          # pause
            pos += int(rng.uniform(0.03, 0.09) * sample_rate)
            continue
        dur = int(rng.uniform(0.08, 0.22) * sample_rate)
        dur = min(dur, n - pos)
        if dur < 64:
            break
        if rng.uniform() < 0.7:                          # voiced
            f0 = rng.uniform(100.0, 280.0)
            f0_end = f0 * rng.uniform(0.8, 1.25)
            freq = np.linspace(f0, f0_end, dur)
            phase = 2.0 * np.pi * np.cumsum(freq) / sample_rate
            x = (phase / np.pi) % 2.0 - 1.0              # sawtooth, 1/k harmonics
            for _ in range(2):
                x = _resonator(x, rng.uniform(300.0, 3200.0),
                               rng.uniform(80.0, 300.0), sample_rate)
        else:                                            # fricative burst
            x = _resonator(rng.standard_normal(dur),
                           rng.uniform(2000.0, 6500.0),
                           rng.uniform(500.0, 1500.0), sample_rate)
        ramp = min(dur // 4, int(0.01 * sample_rate))
        env = np.ones(dur)
        if ramp > 0:
            fade = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
            env[:ramp] = fade
            env[-ramp:] = fade[::-1]
        peak = np.max(np.abs(x))
        if peak > 0:
            out[pos:pos + dur] += x / peak * env * rng.uniform(0.5, 1.0)
        pos += dur + int(rng.uniform(0.01, 0.05) * sample_rate)
    peak = np.max(np.abs(out))
    if peak == 0.0:                                      # tiny durations only
        out[: max(1, n)] = 1e-3
        peak = np.max(np.abs(out))
    return AudioClip(0.9 * out / peak, sample_rate)
