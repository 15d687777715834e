"""WAV reading/writing, band-limited resampling, and frame extraction.

All analysis uses 20 ms frames with a 10 ms hop; both constants live here
so every consumer computes the same frame geometry.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import firwin

from .errors import (
    CorruptHeaderError,
    SignalTooShortError,
    UnsupportedEncodingError,
    UpsamplingRequestedError,
)

FRAME_LENGTH_MS = 20.0
FRAME_HOP_MS = 10.0

SUPPORTED_RATES = (8000, 16000)

_PCM_SCALE = 32768.0


@dataclass(frozen=True)
class Waveform:
    """Mono audio samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


def read_wav(path) -> Waveform:
    """Read a RIFF/WAVE file (16-bit PCM, mono) into a normalized Waveform.

    Samples are divided by 32768 so the range is [-1, 1). The original
    sample rate is preserved.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeaderError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise CorruptHeaderError(f"truncated fmt chunk: {path}")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise CorruptHeaderError(f"truncated data chunk: {path}")
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None or payload is None:
        raise CorruptHeaderError(f"missing fmt or data chunk: {path}")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise UnsupportedEncodingError(
            f"only PCM is supported, got format tag {audio_format}: {path}"
        )
    if channels != 1:
        raise UnsupportedEncodingError(f"only mono is supported, got {channels} channels: {path}")
    if bits != 16:
        raise UnsupportedEncodingError(f"only 16-bit PCM is supported, got {bits}-bit: {path}")

    samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / _PCM_SCALE
    return Waveform(samples=samples, sample_rate=sample_rate)


def write_wav(waveform: Waveform, path) -> None:
    """Write a Waveform as 16-bit PCM mono, clipping to [-1, 1)."""
    pcm = np.clip(waveform.samples, -1.0, 32767.0 / _PCM_SCALE)
    pcm = np.round(pcm * _PCM_SCALE).astype("<i2")
    payload = pcm.tobytes()
    rate = waveform.sample_rate
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def resample(waveform: Waveform, target_rate: int) -> Waveform:
    """Band-limited downsampling to target_rate.

    Low-pass at 0.95 x target Nyquist (windowed-sinc FIR, reflect-padded so
    the interior is transient-free), then interpolate onto the target grid.
    Output length is round(n * target / source).
    """
    if target_rate not in SUPPORTED_RATES:
        raise ValueError(f"target rate must be one of {SUPPORTED_RATES}, got {target_rate}")
    source_rate = waveform.sample_rate
    if target_rate > source_rate:
        raise UpsamplingRequestedError(
            f"cannot resample {source_rate} Hz up to {target_rate} Hz"
        )
    if target_rate == source_rate:
        return Waveform(waveform.samples.copy(), source_rate)

    x = waveform.samples
    n = len(x)
    numtaps = 127
    cutoff = 0.95 * (target_rate / 2.0)
    taps = firwin(numtaps, cutoff, fs=source_rate)

    pad = numtaps
    if n < 2:
        raise SignalTooShortError("cannot resample a signal of fewer than 2 samples")
    left = x[1:min(pad, n - 1) + 1][::-1]
    right = x[max(0, n - 1 - pad):n - 1][::-1]
    padded = np.concatenate([left, x, right])
    filtered = np.convolve(padded, taps, mode="same")[len(left):len(left) + n]

    n_out = int(round(n * target_rate / source_rate))
    positions = np.arange(n_out) * (source_rate / target_rate)
    out = np.interp(positions, np.arange(n), filtered)
    return Waveform(out, target_rate)


def frame_length_samples(sample_rate: int) -> int:
    return int(round(FRAME_LENGTH_MS / 1000.0 * sample_rate))


def frame_hop_samples(sample_rate: int) -> int:
    return int(round(FRAME_HOP_MS / 1000.0 * sample_rate))


def n_frames_for(n_samples: int, sample_rate: int) -> int:
    """Frame count for the 20 ms / 10 ms geometry: floor((N - L) / H) + 1."""
    length = frame_length_samples(sample_rate)
    hop = frame_hop_samples(sample_rate)
    if n_samples < length:
        return 0
    return (n_samples - length) // hop + 1


def frame_signal(waveform: Waveform, window: bool = True) -> np.ndarray:
    """Slice a waveform into Hamming-windowed 20 ms frames hopped by 10 ms.

    Returns an (n_frames, frame_length) matrix. Raises SignalTooShortError
    if the signal is shorter than one frame.
    """
    x = np.asarray(waveform.samples, dtype=np.float64)
    length = frame_length_samples(waveform.sample_rate)
    hop = frame_hop_samples(waveform.sample_rate)
    if len(x) < length:
        raise SignalTooShortError(
            f"signal of {len(x)} samples is shorter than one {length}-sample frame"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, length)[::hop].copy()
    if window:
        frames *= np.hamming(length)
    return frames


def frame_center_times(n_frames: int) -> np.ndarray:
    """Center time (seconds) of each frame: i * hop + frame_length / 2."""
    return np.arange(n_frames) * (FRAME_HOP_MS / 1000.0) + (FRAME_LENGTH_MS / 2000.0)
