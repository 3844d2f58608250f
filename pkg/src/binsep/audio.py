"""PCM WAV input/output and the 16 kHz sampling contract.

The pipeline operates exclusively at 16 kHz. Files recorded at 48 kHz are
accepted and decimated; anything else is rejected at the door rather than
resampled approximately.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import AudioFormatError, DataError, SampleRateError

log = logging.getLogger(__name__)

PIPELINE_RATE = 16000
SUPPORTED_RATES = (16000, 48000)

_PCM16_SCALE = 32768.0


@dataclass
class AudioClip:
    """A normalized audio signal: mono (n,) or stereo (n, 2) float array."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim not in (1, 2):
            raise DataError("samples must be 1-D (mono) or 2-D (n, channels)")
        if self.samples.ndim == 2 and self.samples.shape[1] not in (1, 2):
            raise DataError(f"unsupported channel count {self.samples.shape[1]}")
        if self.samples.ndim == 2 and self.samples.shape[1] == 1:
            self.samples = self.samples[:, 0]

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def channel(self, index: int) -> np.ndarray:
        """Return one channel as a 1-D array (mono clips only have channel 0)."""
        if self.channels == 1:
            if index != 0:
                raise DataError("mono clip has a single channel")
            return self.samples
        return self.samples[:, index]

    def require_rate(self, rate: int = PIPELINE_RATE) -> "AudioClip":
        if self.sample_rate != rate:
            raise SampleRateError(
                f"expected {rate} Hz, got {self.sample_rate} Hz"
            )
        return self


def _parse_chunks(blob: bytes):
    """Yield (chunk id, payload) pairs from a RIFF/WAVE blob."""
    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise AudioFormatError("not a RIFF/WAVE file")
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack("<I", blob[pos + 4:pos + 8])
        body = blob[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise AudioFormatError(f"truncated {cid!r} chunk")
        yield cid, body
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def read_wav(path) -> AudioClip:
    """Read a 16-bit PCM or 32-bit float WAV file, normalized to [-1, 1].

    16-bit samples are scaled by 1/32768, so a full-scale positive sample
    maps to 32767/32768. Raises AudioFormatError for malformed headers,
    unsupported encodings, or zero-length audio.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    fmt = None
    data = None
    for cid, body in _parse_chunks(blob):
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise AudioFormatError("fmt chunk too small")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data" and data is None:
            data = body
    if fmt is None or data is None:
        raise AudioFormatError("missing fmt or data chunk")
    audio_format, n_channels, rate, _, block_align, bits = fmt
    if n_channels not in (1, 2):
        raise AudioFormatError(f"unsupported channel count {n_channels}")
    if audio_format == 1 and bits == 16:
        dtype, scale = np.dtype("<i2"), _PCM16_SCALE
    elif audio_format == 3 and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise AudioFormatError(
            f"unsupported encoding: format tag {audio_format}, {bits} bits"
        )
    expected_align = n_channels * (bits // 8)
    if block_align != expected_align:
        raise AudioFormatError("block alignment inconsistent with format")
    if len(data) == 0:
        raise AudioFormatError("zero-length audio")
    if len(data) % expected_align != 0:
        raise AudioFormatError("data payload does not divide evenly by frame size")
    flat = np.frombuffer(data, dtype=dtype).astype(np.float64) / scale
    if n_channels == 2:
        flat = flat.reshape(-1, 2)
    return AudioClip(flat, int(rate))


def write_wav(clip: AudioClip, path, float32: bool = False) -> int:
    """Write a clip as 16-bit PCM (default) or 32-bit float WAV.

    Amplitudes outside [-1, 1] are clipped; the number of clipped samples
    is logged and returned. Non-finite samples are rejected.
    """
    x = clip.samples
    if x.size == 0:
        raise DataError("refusing to write an empty clip")
    if not np.all(np.isfinite(x)):
        raise DataError("clip contains non-finite samples")
    n_clipped = int(np.count_nonzero((x < -1.0) | (x > 1.0)))
    if n_clipped:
        log.warning("write_wav: clipped %d samples outside [-1, 1]", n_clipped)
    x = np.clip(x, -1.0, 1.0)
    if float32:
        payload = x.astype("<f4").tobytes()
        audio_format, bits = 3, 32
    else:
        q = np.rint(x * _PCM16_SCALE)
        np.clip(q, -32768, 32767, out=q)
        payload = q.astype("<i2").tobytes()
        audio_format, bits = 1, 16
    n_channels = clip.channels
    block_align = n_channels * (bits // 8)
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, audio_format, n_channels, clip.sample_rate,
        clip.sample_rate * block_align, block_align, bits,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    return n_clipped


def _decimation_filter() -> np.ndarray:
    # Kaiser low-pass for 48 -> 16 kHz: passband to 6.8 kHz, stopband from
    # 8 kHz, >= 65 dB attenuation.
    numtaps, beta = sps.kaiserord(65.0, (8000.0 - 6800.0) / 24000.0)
    numtaps |= 1  # odd length keeps the group delay at an integer
    return sps.firwin(numtaps, 7400.0, window=("kaiser", beta), fs=48000.0)


_DECIM_FIR = _decimation_filter()


def resample_to_16k(clip: AudioClip) -> AudioClip:
    """Bring a clip to 16 kHz. Only 16 kHz (identity) and 48 kHz inputs
    are supported; 48 kHz is low-passed and decimated by 3."""
    if clip.sample_rate == PIPELINE_RATE:
        return clip
    if clip.sample_rate != 48000:
        raise SampleRateError(
            f"unsupported input rate {clip.sample_rate} Hz (need 16 or 48 kHz)"
        )
    x = clip.samples
    y = sps.resample_poly(x, 1, 3, axis=0, window=_DECIM_FIR)
    return AudioClip(y, PIPELINE_RATE)
