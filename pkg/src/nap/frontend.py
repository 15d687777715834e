"""PLP and MFCC feature frontends.

Two fixed configurations are used by the scoring pipeline:

- 13 PLP coefficients at 8 kHz for the voiced nasalization model: Bark-scale
  critical bands, equal-loudness weighting, cube-root loudness compression,
  order-12 linear prediction, LP-derived cepstra.
- 39-dim MFCCs at 16 kHz for the unvoiced articulation model: 26-filter mel
  bank, DCT-II cepstra with log-energy C0, deltas and delta-deltas over a
  +-2 frame window, utterance-level cepstral mean/variance normalization.

All frontend constants live in FrontendConfig so runs are reproducible.
"""

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .audio import Waveform, frame_signal
from .errors import CorruptFileError, LevinsonSingularError, WrongSampleRateError

LOG_FLOOR = 1e-10

_NAPF_MAGIC = b"NAPF"


class Frontend(enum.IntEnum):
    PLP13 = 1
    MFCC39 = 2


FRONTEND_DIMS = {Frontend.PLP13: 13, Frontend.MFCC39: 39}
FRONTEND_RATES = {Frontend.PLP13: 8000, Frontend.MFCC39: 16000}


@dataclass(frozen=True)
class FrontendConfig:
    """Fixed frontend constants (standard ASR choices where unspecified)."""

    preemphasis: float = 0.97
    n_mel_filters: int = 26
    n_mfcc_static: int = 13
    delta_width: int = 2
    n_bark_bands: int = 17
    plp_order: int = 12
    n_plp_coeffs: int = 13
    loudness_exponent: float = 0.33


DEFAULT_CONFIG = FrontendConfig()


@dataclass(frozen=True)
class FrameMatrix:
    """Per-frame feature rows plus the geometry needed to place them in time."""

    data: np.ndarray
    frontend: Frontend
    frame_length_ms: float = 20.0
    frame_hop_ms: float = 10.0

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_coeffs(self) -> int:
        return self.data.shape[1]

    def frame_centers(self) -> np.ndarray:
        """Frame-center times in seconds: i * hop + frame_length / 2."""
        hop = self.frame_hop_ms / 1000.0
        half = self.frame_length_ms / 2000.0
        return np.arange(self.n_frames) * hop + half


def _next_pow2(n: int) -> int:
    nfft = 1
    while nfft < n:
        nfft *= 2
    return nfft


def _power_spectrum(frames: np.ndarray, nfft: int) -> np.ndarray:
    return np.abs(np.fft.rfft(frames, nfft, axis=1)) ** 2 / nfft


# mel / MFCC


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, nfft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank matrix of shape (n_filters, nfft//2 + 1)."""
    nyquist = sample_rate / 2.0
    edges_hz = mel_to_hz(np.linspace(0.0, hz_to_mel(nyquist), n_filters + 2))
    bin_freqs = np.arange(nfft // 2 + 1) * (sample_rate / nfft)
    bank = np.zeros((n_filters, nfft // 2 + 1))
    for j in range(n_filters):
        lo, center, hi = edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        bank[j] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def delta(features: np.ndarray, width: int = 2) -> np.ndarray:
    """Regression deltas over a +-width frame window with edge replication."""
    denom = 2.0 * sum(n * n for n in range(1, width + 1))
    padded = np.pad(features, ((width, width), (0, 0)), mode="edge")
    t = features.shape[0]
    out = np.zeros_like(features)
    for n in range(1, width + 1):
        out += n * (padded[width + n:width + n + t] - padded[width - n:width - n + t])
    return out / denom


def cmvn(features: np.ndarray) -> np.ndarray:
    """Utterance-level cepstral mean/variance normalization per coefficient.

    Zero-variance columns (possible only for degenerate signals) are left
    centered but unscaled so the output stays finite.
    """
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std < 1e-10, 1.0, std)
    return (features - mean) / std


def compute_mfcc39(waveform: Waveform, config: FrontendConfig = DEFAULT_CONFIG) -> FrameMatrix:
    """39-dim MFCCs (13 static with log-energy C0, deltas, delta-deltas) + CMVN.

    Requires a 16 kHz waveform.
    """
    rate = FRONTEND_RATES[Frontend.MFCC39]
    if waveform.sample_rate != rate:
        raise WrongSampleRateError(
            f"MFCC39 requires {rate} Hz, got {waveform.sample_rate} Hz"
        )
    x = waveform.samples
    emphasized = np.concatenate([x[:1], x[1:] - config.preemphasis * x[:-1]])
    frames = frame_signal(Waveform(emphasized, rate))
    nfft = _next_pow2(frames.shape[1])
    power = _power_spectrum(frames, nfft)

    energy = np.maximum(power.sum(axis=1), LOG_FLOOR)
    bank = mel_filterbank(config.n_mel_filters, nfft, rate)
    fb_energy = np.maximum(power @ bank.T, LOG_FLOOR)
    cepstra = dct(np.log(fb_energy), type=2, axis=1, norm="ortho")[:, :config.n_mfcc_static]
    cepstra[:, 0] = np.log(energy)

    d1 = delta(cepstra, config.delta_width)
    d2 = delta(d1, config.delta_width)
    full = np.hstack([cepstra, d1, d2])
    return FrameMatrix(data=cmvn(full), frontend=Frontend.MFCC39)


# Bark / PLP


def hz_to_bark(f):
    return 6.0 * np.arcsinh(np.asarray(f, dtype=np.float64) / 600.0)


def bark_to_hz(z):
    return 600.0 * np.sinh(np.asarray(z, dtype=np.float64) / 6.0)


def bark_filterbank(n_bands: int, nfft: int, sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    """Critical-band filterbank with the classic piecewise-exponential masking
    curve; returns (weights of shape (n_bands, nfft//2+1), band center Hz)."""
    bin_bark = hz_to_bark(np.arange(nfft // 2 + 1) * (sample_rate / nfft))
    centers_bark = np.linspace(0.0, hz_to_bark(sample_rate / 2.0), n_bands)
    bank = np.zeros((n_bands, nfft // 2 + 1))
    for j, center in enumerate(centers_bark):
        z = bin_bark - center
        weight = np.zeros_like(z)
        lower = (z >= -1.3) & (z <= -0.5)
        flat = (z > -0.5) & (z < 0.5)
        upper = (z >= 0.5) & (z <= 2.5)
        weight[lower] = 10.0 ** (2.5 * (z[lower] + 0.5))
        weight[flat] = 1.0
        weight[upper] = 10.0 ** (-1.0 * (z[upper] - 0.5))
        bank[j] = weight
    return bank, bark_to_hz(centers_bark)


def equal_loudness(freq_hz: np.ndarray) -> np.ndarray:
    """40-dB equal-loudness weighting evaluated at band center frequencies."""
    fsq = np.asarray(freq_hz, dtype=np.float64) ** 2
    return (fsq / (fsq + 1.6e5)) ** 2 * (fsq + 1.44e6) / (fsq + 9.61e6)


def auditory_spectrum(frames: np.ndarray, sample_rate: int,
                      config: FrontendConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Per-frame Bark-band loudness: critical-band energies, equal-loudness
    weighting, cube-root compression, unreliable edge bands duplicated."""
    nfft = _next_pow2(frames.shape[1])
    power = _power_spectrum(frames, nfft)
    bank, centers_hz = bark_filterbank(config.n_bark_bands, nfft, sample_rate)
    band_energy = np.maximum(power @ bank.T, LOG_FLOOR)
    loudness = (band_energy * equal_loudness(centers_hz)) ** config.loudness_exponent
    loudness[:, 0] = loudness[:, 1]
    loudness[:, -1] = loudness[:, -2]
    return loudness


def autocorr_from_spectrum(spectrum: np.ndarray, n_lags: int) -> np.ndarray:
    """Autocorrelation lags 0..n_lags-1 via inverse DFT of the evenly
    extended band spectrum (rows are frames)."""
    extended = np.hstack([spectrum, spectrum[:, -2:0:-1]])
    r = np.fft.ifft(extended, axis=1).real
    return r[:, :n_lags]


def levinson_durbin(r: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Levinson-Durbin recursion on autocorrelation rows.

    Returns (a, e): LP polynomials a with a[:, 0] = 1 and final prediction
    errors e. Raises LevinsonSingularError on non-positive error energy.
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    n = r.shape[0]
    a = np.zeros((n, order + 1))
    a[:, 0] = 1.0
    e = r[:, 0].copy()
    if np.any(e <= 0):
        raise LevinsonSingularError("zero autocorrelation energy (degenerate frame)")
    for i in range(1, order + 1):
        acc = r[:, i].copy()
        if i > 1:
            acc += np.sum(a[:, 1:i] * r[:, i - 1:0:-1], axis=1)
        k = -acc / e
        prev = a[:, 1:i].copy()
        a[:, 1:i] = prev + k[:, None] * prev[:, ::-1]
        a[:, i] = k
        e = e * (1.0 - k * k)
        if np.any(e <= 0):
            raise LevinsonSingularError("prediction error collapsed during recursion")
    return a, e


def lpc_to_cepstra(a: np.ndarray, e: np.ndarray, n_coeffs: int) -> np.ndarray:
    """Cepstra of the all-pole model 1/A(z): c0 = log(e), then the standard
    recursion c_m = -a_m - sum_{k<m} (k/m) c_k a_{m-k}."""
    n, _ = a.shape
    c = np.zeros((n, n_coeffs))
    c[:, 0] = np.log(e)
    for m in range(1, n_coeffs):
        acc = a[:, m].copy()
        for k in range(1, m):
            acc += (k / m) * c[:, k] * a[:, m - k]
        c[:, m] = -acc
    return c


def plp_lp_coefficients(waveform: Waveform,
                        config: FrontendConfig = DEFAULT_CONFIG) -> tuple[np.ndarray, np.ndarray]:
    """LP polynomials and prediction errors of the PLP analysis, exposed for
    spectral-envelope diagnostics."""
    rate = FRONTEND_RATES[Frontend.PLP13]
    if waveform.sample_rate != rate:
        raise WrongSampleRateError(f"PLP13 requires {rate} Hz, got {waveform.sample_rate} Hz")
    frames = frame_signal(waveform)
    loudness = auditory_spectrum(frames, rate, config)
    r = autocorr_from_spectrum(loudness, config.plp_order + 1)
    return levinson_durbin(r, config.plp_order)


def compute_plp13(waveform: Waveform, config: FrontendConfig = DEFAULT_CONFIG) -> FrameMatrix:
    """13 perceptual linear prediction coefficients per frame.

    Requires an 8 kHz waveform. No RASTA filtering, no liftering.
    """
    a, e = plp_lp_coefficients(waveform, config)
    cepstra = lpc_to_cepstra(a, e, config.n_plp_coeffs)
    return FrameMatrix(data=cepstra, frontend=Frontend.PLP13)


def compute_frontend(waveform: Waveform, frontend: Frontend,
                     config: FrontendConfig = DEFAULT_CONFIG) -> FrameMatrix:
    if frontend == Frontend.PLP13:
        return compute_plp13(waveform, config)
    if frontend == Frontend.MFCC39:
        return compute_mfcc39(waveform, config)
    raise ValueError(f"unknown frontend {frontend}")


# binary feature dump


def save_frames(matrix: FrameMatrix, path) -> None:
    """Write a FrameMatrix: 16-byte header (magic, rows, cols, frontend id)
    then row-major little-endian float64."""
    rows, cols = matrix.data.shape
    header = _NAPF_MAGIC + struct.pack("<III", rows, cols, int(matrix.frontend))
    body = np.ascontiguousarray(matrix.data, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_frames(path) -> FrameMatrix:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != _NAPF_MAGIC:
        raise CorruptFileError(f"not a feature dump: {path}")
    rows, cols, frontend_id = struct.unpack_from("<III", data, 4)
    expected = 16 + rows * cols * 8
    if len(data) != expected:
        raise CorruptFileError(
            f"feature dump truncated: expected {expected} bytes, got {len(data)}: {path}"
        )
    try:
        frontend = Frontend(frontend_id)
    except ValueError as exc:
        raise CorruptFileError(f"unknown frontend id {frontend_id}: {path}") from exc
    matrix = np.frombuffer(data, dtype="<f8", offset=16).reshape(rows, cols).copy()
    return FrameMatrix(data=matrix, frontend=frontend)
