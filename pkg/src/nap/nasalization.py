"""Nasalization scoring: NAS-vs-ORL likelihood ratios for voiced phones.

Two 16-mixture diagonal GMMs are trained on pooled PLP frames of healthy
speech, one for nasal material (nasal consonants plus nasal-adjacent vowel
halves) and one for oral voiced material. A test phone's score is the
per-frame-averaged log-likelihood ratio of its frames under the two models:
positive means the phone sounds nasalized.
"""

import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_float_matrix, check_fitted
from .audio import Waveform, read_wav, resample
from .errors import EmptySegmentError, InsufficientDataError
from .frontend import Frontend, FrontendConfig, DEFAULT_CONFIG, compute_plp13
from .gmm import MIN_FRAMES_PER_COMPONENT, DiagonalGmm, load_gmm, save_gmm
from .phones import NASALIZATION_EXPORT_PHONES
from .scores import PhoneScore
from .textgrid import (
    AlignedUtterance,
    NasalClass,
    assign_nasal_classes,
    frames_for_segment,
    parse_textgrid,
)

logger = logging.getLogger(__name__)

NAS_MODEL_FILE = "nas.napg"
ORL_MODEL_FILE = "orl.napg"


class NasalizationScorer(BaseEstimator):
    """Two-class generative scorer over PLP frames.

    fit(X, y) takes frame rows X and binary labels y (1 = nasal class,
    0 = oral class) and trains one GMM per class.
    """

    def __init__(self, n_components=16, max_iters=100, tol=1e-6, seed=0,
                 variance_floor=1e-6):
        self.n_components = n_components
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed
        self.variance_floor = variance_floor

    def _gmm(self):
        return DiagonalGmm(
            n_components=self.n_components,
            max_iters=self.max_iters,
            tol=self.tol,
            seed=self.seed,
            variance_floor=self.variance_floor,
        )

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = np.asarray(y).ravel().astype(bool)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on the number of frames")
        minimum = MIN_FRAMES_PER_COMPONENT * self.n_components
        for class_name, mask in (("NAS", y), ("ORL", ~y)):
            if mask.sum() < minimum:
                raise InsufficientDataError(
                    f"{class_name} pool has {int(mask.sum())} frames, needs {minimum}"
                )
        self.gmm_nas_ = self._gmm().fit(X[y])
        self.gmm_orl_ = self._gmm().fit(X[~y])
        self.n_features_in_ = X.shape[1]
        return self

    def score_frames(self, X) -> np.ndarray:
        """Per-frame log-likelihood ratio log f(x|NAS) - log f(x|ORL)."""
        check_fitted(self, "gmm_nas_")
        X = as_float_matrix(X)
        return self.gmm_nas_.score_samples(X) - self.gmm_orl_.score_samples(X)

    def score_segment(self, X) -> float:
        """Frame-averaged log-likelihood ratio of one phone's frames."""
        llr = self.score_frames(X)
        return float(llr.sum() / llr.shape[0])

    def score_utterance(self, utterance: AlignedUtterance, waveform: Waveform,
                        utterance_id: str = "",
                        config: FrontendConfig = DEFAULT_CONFIG) -> list:
        """Score every export-list phone of an aligned utterance.

        The waveform is resampled to 8 kHz if needed. Phones covering no
        frame centers are skipped with a warning.
        """
        if waveform.sample_rate != 8000:
            waveform = resample(waveform, 8000)
        matrix = compute_plp13(waveform, config)
        scores = []
        skipped = 0
        for phone in utterance.phones:
            if phone.label not in NASALIZATION_EXPORT_PHONES:
                continue
            try:
                frames = frames_for_segment(phone, matrix)
            except EmptySegmentError:
                skipped += 1
                continue
            scores.append(PhoneScore(
                utterance_id=utterance_id,
                phone=phone.label,
                score=self.score_segment(frames),
                n_frames=frames.shape[0],
            ))
        if skipped:
            logger.warning("%s: skipped %d phones with no frame centers",
                           utterance_id or "utterance", skipped)
        return scores


def pool_nasalization_frames(aligned_pairs, config: FrontendConfig = DEFAULT_CONFIG):
    """Pool PLP frames of NAS- and ORL-class segments across utterances.

    aligned_pairs yields (AlignedUtterance, Waveform) tuples; utterances are
    nasal-classed here if they are not already.
    """
    nas_blocks = []
    orl_blocks = []
    for utterance, waveform in aligned_pairs:
        if all(p.nasal_class == NasalClass.EXCLUDED for p in utterance.phones):
            utterance = assign_nasal_classes(utterance)
        if waveform.sample_rate != 8000:
            waveform = resample(waveform, 8000)
        matrix = compute_plp13(waveform, config)
        for phone in utterance.phones:
            if phone.nasal_class not in (NasalClass.NAS, NasalClass.ORL):
                continue
            try:
                frames = frames_for_segment(phone, matrix)
            except EmptySegmentError:
                continue
            (nas_blocks if phone.nasal_class == NasalClass.NAS else orl_blocks).append(frames)

    dim = config.n_plp_coeffs
    X_nas = np.vstack(nas_blocks) if nas_blocks else np.empty((0, dim))
    X_orl = np.vstack(orl_blocks) if orl_blocks else np.empty((0, dim))
    return X_nas, X_orl


def train_nasalization(aligned_pairs, config: FrontendConfig = DEFAULT_CONFIG,
                       **params) -> NasalizationScorer:
    """Train NAS and ORL models from (AlignedUtterance, Waveform) pairs."""
    X_nas, X_orl = pool_nasalization_frames(aligned_pairs, config)
    scorer = NasalizationScorer(**params)
    minimum = MIN_FRAMES_PER_COMPONENT * scorer.n_components
    for name, pool in (("NAS", X_nas), ("ORL", X_orl)):
        if pool.shape[0] < minimum:
            raise InsufficientDataError(
                f"{name} pool has {pool.shape[0]} frames, needs {minimum}"
            )
    X = np.vstack([X_nas, X_orl])
    y = np.concatenate([np.ones(len(X_nas), dtype=bool), np.zeros(len(X_orl), dtype=bool)])
    return scorer.fit(X, y)


def load_corpus_pairs(manifest, words_tier="words", phones_tier="phones"):
    """Yield (classed AlignedUtterance, Waveform) for every manifest entry."""
    for entry in manifest.entries:
        utterance = assign_nasal_classes(
            parse_textgrid(entry.textgrid_path, words_tier, phones_tier)
        )
        yield utterance, read_wav(entry.wav_path)


def save_nasalization(scorer: NasalizationScorer, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_gmm(scorer.gmm_nas_, directory / NAS_MODEL_FILE)
    save_gmm(scorer.gmm_orl_, directory / ORL_MODEL_FILE)


def load_nasalization(directory) -> NasalizationScorer:
    directory = Path(directory)
    scorer = NasalizationScorer()
    scorer.gmm_nas_ = load_gmm(directory / NAS_MODEL_FILE)
    scorer.gmm_orl_ = load_gmm(directory / ORL_MODEL_FILE)
    scorer.n_features_in_ = scorer.gmm_nas_.n_features_in_
    return scorer
