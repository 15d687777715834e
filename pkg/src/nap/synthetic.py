"""Synthetic WAV + TextGrid corpus generator with a hypernasality knob.

Each phone is rendered from a phone-conditional spectral recipe: voiced
phones as an impulse train through formant resonators, unvoiced consonants
as band-passed noise. A per-speaker severity knob in [0, 1] moves voiced
spectra toward a nasal-murmur profile and unvoiced spectra toward a
competing consonant's band, mimicking how hypernasality presents in the
real corpora. Severity 0 plus nasal coarticulation on vowel halves gives a
plausible healthy training corpus; graded severities give a rated test
corpus (rating = 1 + 6 * severity).
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import firwin, lfilter

from .audio import Waveform, write_wav
from .corpus import (
    CorpusManifest,
    Disease,
    ManifestEntry,
    RatingsTable,
    write_manifest,
    write_ratings,
)
from .phones import NASALS, VOWELS
from .textgrid import AlignedUtterance, PhoneSegment, Word, write_textgrid

SAMPLE_RATE = 16000

# Two-formant recipes (Hz); unvoiced entries are noise bands.
VOICED_FORMANTS = {
    "AA": (700.0, 1220.0),
    "IY": (310.0, 2300.0),
    "B": (360.0, 1050.0),
    "D": (420.0, 1700.0),
    "M": (280.0, 900.0),
    "N": (320.0, 1080.0),
}
UNVOICED_BANDS = {
    "T": (3000.0, 5000.0),
    "F": (1200.0, 2600.0),
}
# Imprecision drifts each unvoiced phone toward this competitor's band.
CONFUSION_TARGET = {"T": "F", "F": "T"}

NASAL_TARGET_FORMANTS = (270.0, 950.0)
MURMUR_FREQ = 250.0
COARTICULATION = 0.45

LEXICON = {
    "bomb": ("B", "AA", "M"),
    "dean": ("D", "IY", "N"),
    "bead": ("B", "IY", "D"),
    "dot": ("D", "AA", "T"),
    "toff": ("T", "AA", "F"),
    "feet": ("F", "IY", "T"),
    "moat": ("M", "AA", "T"),
    "knead": ("N", "IY", "D"),
}

VOWEL_SECONDS = 0.18
CONSONANT_SECONDS = 0.12
WORD_GAP_SECONDS = 0.08
EDGE_SILENCE_SECONDS = 0.05

VOICED_RMS = 0.15
UNVOICED_RMS = 0.08
SILENCE_NOISE = 2e-4


@dataclass(frozen=True)
class SpeakerVoice:
    """Per-speaker rendering jitter so models must generalize a little."""

    formant_scale: float
    f0: float

    @classmethod
    def sample(cls, rng):
        return cls(
            formant_scale=1.0 + 0.03 * rng.standard_normal(),
            f0=115.0 * (1.0 + 0.05 * rng.standard_normal()),
        )


def _resonate(x, freq, bandwidth, rate):
    r = np.exp(-np.pi * bandwidth / rate)
    theta = 2.0 * np.pi * freq / rate
    return lfilter([1.0], [1.0, -2.0 * r * np.cos(theta), r * r], x)


def _normalize(x, target_rms):
    rms = np.sqrt(np.mean(x ** 2))
    if rms <= 0:
        return x
    return x * (target_rms / rms)


def _voiced_samples(n, formants, murmur_gain, voice, rate, rng):
    period = max(2, int(round(rate / voice.f0)))
    excitation = np.zeros(n)
    excitation[::period] = 1.0
    excitation += 0.01 * rng.standard_normal(n)
    y = excitation
    for freq in formants:
        y = _resonate(y, freq * voice.formant_scale, 90.0, rate)
    if murmur_gain > 0:
        murmur = _resonate(excitation, MURMUR_FREQ, 80.0, rate)
        murmur = _normalize(murmur, 1.0)
        y = _normalize(y, 1.0) + murmur_gain * murmur
    return _normalize(y, VOICED_RMS)


def _unvoiced_samples(n, band, rate, rng):
    noise = rng.standard_normal(n + 200)
    lo, hi = band
    taps = firwin(101, [lo, hi], pass_zero=False, fs=rate)
    filtered = lfilter(taps, [1.0], noise)[200:]
    return _normalize(filtered, UNVOICED_RMS)


def _lerp(a, b, t):
    return tuple((1.0 - t) * x + t * y for x, y in zip(a, b))


def render_phone(label, n_samples, severity, voice, rng,
                 coart_before=False, coart_after=False, rate=SAMPLE_RATE):
    """Render one phone. Severity moves voiced spectra toward the nasal
    profile and unvoiced bands toward the confusion target; nasal-adjacent
    vowel halves carry coarticulatory nasalization even at severity 0."""
    if label in UNVOICED_BANDS:
        own = UNVOICED_BANDS[label]
        other = UNVOICED_BANDS[CONFUSION_TARGET[label]]
        band = _lerp(own, other, 0.7 * severity)
        return _unvoiced_samples(n_samples, band, rate, rng)

    if label in NASALS:
        return _voiced_samples(n_samples, VOICED_FORMANTS[label], 0.9, voice, rate, rng)

    formants = VOICED_FORMANTS[label]
    if label in VOWELS and (coart_before or coart_after):
        half = n_samples // 2
        parts = []
        for side, count in ((coart_before, half), (coart_after, n_samples - half)):
            nasality = min(1.0, severity + (COARTICULATION if side else 0.0))
            shifted = _lerp(formants, NASAL_TARGET_FORMANTS, nasality)
            parts.append(_voiced_samples(count, shifted, 0.9 * nasality, voice, rate, rng))
        return np.concatenate(parts)

    shifted = _lerp(formants, NASAL_TARGET_FORMANTS, severity)
    return _voiced_samples(n_samples, shifted, 0.9 * severity, voice, rate, rng)


def render_utterance(word_names, severity, voice, rng, rate=SAMPLE_RATE):
    """Render words with silences; returns (Waveform, AlignedUtterance)."""
    chunks = []
    phone_rows = []
    word_rows = []
    cursor = 0

    def add_silence(seconds):
        nonlocal cursor
        n = int(round(seconds * rate))
        chunks.append(SILENCE_NOISE * rng.standard_normal(n))
        cursor += n

    add_silence(EDGE_SILENCE_SECONDS)
    for w, word in enumerate(word_names):
        labels = LEXICON[word]
        word_start = cursor
        for i, label in enumerate(labels):
            seconds = VOWEL_SECONDS if label in VOWELS else CONSONANT_SECONDS
            n = int(round(seconds * rate))
            before = i > 0 and labels[i - 1] in NASALS
            after = i + 1 < len(labels) and labels[i + 1] in NASALS
            chunks.append(render_phone(label, n, severity, voice, rng,
                                       coart_before=before, coart_after=after, rate=rate))
            phone_rows.append((label, cursor / rate, (cursor + n) / rate, w))
            cursor += n
        word_rows.append(Word(text=word, t_start=word_start / rate, t_end=cursor / rate))
        add_silence(WORD_GAP_SECONDS)

    samples = np.concatenate(chunks)
    duration = len(samples) / rate
    phones = tuple(
        PhoneSegment(label=label, t_start=start, t_end=end, word_index=w)
        for label, start, end, w in phone_rows
    )
    utterance = AlignedUtterance(phones=phones, words=tuple(word_rows),
                                 audio_duration=duration)
    return Waveform(np.clip(samples, -0.99, 0.99), rate), utterance


_RATED_DISEASES = (Disease.PD, Disease.A, Disease.ALS, Disease.HD)


def generate_corpus(root, n_speakers=10, utterances_per_speaker=5,
                    severities=None, seed=0, words_per_utterance=5,
                    speaker_prefix="spk"):
    """Build a corpus under `root`: wav/, tg/, manifest.csv, ratings.csv.

    severities: one knob value per speaker (default all zero = healthy).
    Every speaker's first utterance reads the full lexicon so all phones
    are covered. Returns (manifest_path, ratings_path).
    """
    root = Path(root)
    (root / "wav").mkdir(parents=True, exist_ok=True)
    (root / "tg").mkdir(parents=True, exist_ok=True)
    if severities is None:
        severities = np.zeros(n_speakers)
    severities = np.asarray(severities, dtype=np.float64)
    if severities.shape[0] != n_speakers:
        raise ValueError("need one severity per speaker")
    healthy = bool(np.all(severities == 0.0))

    words = sorted(LEXICON)
    entries = []
    hyper = {}
    artic = {}
    for s in range(n_speakers):
        speaker_id = f"{speaker_prefix}{s:03d}"
        rng = np.random.default_rng(seed + 7919 * s)
        voice = SpeakerVoice.sample(rng)
        severity = float(severities[s])
        disease = Disease.HEALTHY if healthy else _RATED_DISEASES[s % len(_RATED_DISEASES)]
        for u in range(utterances_per_speaker):
            if u == 0:
                utterance_words = list(words)
            else:
                utterance_words = list(rng.choice(words, size=words_per_utterance))
            waveform, alignment = render_utterance(utterance_words, severity, voice, rng)
            utterance_id = f"{speaker_id}_u{u:02d}"
            wav_path = root / "wav" / f"{utterance_id}.wav"
            tg_path = root / "tg" / f"{utterance_id}.TextGrid"
            write_wav(waveform, wav_path)
            write_textgrid(alignment, tg_path)
            entries.append(ManifestEntry(
                speaker_id=speaker_id, disease=disease, utterance_id=utterance_id,
                wav_path=wav_path, textgrid_path=tg_path,
            ))
        hyper[speaker_id] = 1.0 + 6.0 * severity
        artic[speaker_id] = 7.0 - 6.0 * severity

    manifest_path = root / "manifest.csv"
    ratings_path = root / "ratings.csv"
    write_manifest(CorpusManifest(entries=tuple(entries)), manifest_path)
    write_ratings(RatingsTable(hypernasality=hyper, articulatory_precision=artic),
                  ratings_path)
    return manifest_path, ratings_path
