"""Straight-line reference implementation of the intelligibility measure.

Deliberately written with explicit Python loops, independent of the
vectorized library implementation, so the two can cross-check each other.
Operates on 10 kHz signals (the measure's native rate).
"""

import math

import numpy as np

FRAME = 256
HOP = 128
NFFT = 512
N_BANDS = 15
MIN_FREQ = 150.0
SEG = 30
BETA_DB = -15.0
DYN_RANGE_DB = 40.0
EPS = np.finfo(np.float64).eps


def _window():
    n = FRAME
    return np.array([0.5 - 0.5 * math.cos(2 * math.pi * (t + 1) / (n + 1))
                     for t in range(n)])


def _frames(x):
    out = []
    w = _window()
    pos = 0
    while pos + FRAME <= len(x):
        out.append(np.array(x[pos:pos + FRAME]) * w)
        pos += HOP
    return out


def _remove_silent(ref, est):
    ref_frames = _frames(ref)
    est_frames = _frames(est)
    energies = [20.0 * math.log10(math.sqrt(sum(f * f for f in fr)) + EPS)
                for fr in ref_frames]
    peak = max(energies)
    keep = [i for i, e in enumerate(energies) if e > peak - DYN_RANGE_DB]
    n_out = FRAME + (len(keep) - 1) * HOP if keep else 0
    ref_out = np.zeros(n_out)
    est_out = np.zeros(n_out)
    for j, i in enumerate(keep):
        lo = j * HOP
        for t in range(FRAME):
            ref_out[lo + t] += ref_frames[i][t]
            est_out[lo + t] += est_frames[i][t]
    return ref_out, est_out


def _octave_bands(fs):
    freqs = [fs * k / NFFT for k in range(NFFT // 2 + 1)]
    rows = []
    for b in range(N_BANDS):
        f_low = MIN_FREQ * 2.0 ** ((2 * b - 1) / 6.0)
        f_high = MIN_FREQ * 2.0 ** ((2 * b + 1) / 6.0)
        lo = min(range(len(freqs)), key=lambda i: (freqs[i] - f_low) ** 2)
        hi = min(range(len(freqs)), key=lambda i: (freqs[i] - f_high) ** 2)
        row = np.zeros(len(freqs))
        row[lo:hi] = 1.0
        rows.append(row)
    return rows


def _band_envelopes(x, fs):
    bands = _octave_bands(fs)
    frames = _frames(x)
    env = np.zeros((N_BANDS, len(frames)))
    for m, fr in enumerate(frames):
        spec = np.fft.rfft(fr, NFFT)
        power = np.abs(spec) ** 2
        for b, row in enumerate(bands):
            env[b, m] = math.sqrt(sum(row * power))
    return env


def stoi_reference(est_10k, ref_10k, fs=10000):
    n = min(len(est_10k), len(ref_10k))
    ref, est = _remove_silent(ref_10k[:n], est_10k[:n])
    x = _band_envelopes(ref, fs)
    y = _band_envelopes(est, fs)
    n_frames = x.shape[1]
    if n_frames < SEG:
        raise ValueError("too short after silence removal")
    clip_gain = 1.0 + 10.0 ** (-BETA_DB / 20.0)
    total = 0.0
    count = 0
    for m in range(SEG, n_frames + 1):
        for b in range(N_BANDS):
            xs = x[b, m - SEG:m]
            ys = y[b, m - SEG:m]
            alpha = (math.sqrt(sum(xs * xs))
                     / (math.sqrt(sum(ys * ys)) + EPS))
            yp = np.array([min(alpha * v, clip_gain * u)
                           for u, v in zip(xs, ys)])
            xc = xs - sum(xs) / SEG
            yc = yp - sum(yp) / SEG
            denom = (math.sqrt(sum(xc * xc)) * math.sqrt(sum(yc * yc))
                     + EPS)
            total += sum(xc * yc) / denom
            count += 1
    return min(max(total / count, 0.0), 1.0)
