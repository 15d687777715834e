"""Articulatory precision scoring via per-phone acoustic likelihoods.

One diagonal GMM is trained per phone on pooled MFCC frames of healthy
speech. A test phone's score compares the summed log-likelihood under its
labeled phone model to the best achievable over the whole inventory,
normalized by frame count; 0 means the labeled phone wins outright, and
scores are never positive.
"""

import json
import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_float_matrix, check_fitted
from .audio import Waveform
from .errors import EmptySegmentError, InsufficientDataError, UnknownPhoneError
from .frontend import FrontendConfig, DEFAULT_CONFIG, compute_mfcc39
from .gmm import MIN_FRAMES_PER_COMPONENT, DiagonalGmm, load_gmm, save_gmm
from .phones import UNVOICED_CONSONANTS
from .scores import PhoneScore
from .textgrid import AlignedUtterance, frames_for_segment

logger = logging.getLogger(__name__)

INVENTORY_FILE = "inventory.json"


class ArticulationScorer(BaseEstimator):
    """Per-phone generative models over MFCC frames.

    fit(X, y) takes frame rows X and string phone labels y; phones with too
    few frames for the mixture size are dropped from the inventory with a
    warning.
    """

    def __init__(self, n_components=16, max_iters=100, tol=1e-6, seed=0,
                 variance_floor=1e-6):
        self.n_components = n_components
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed
        self.variance_floor = variance_floor

    def fit(self, X, y):
        X = as_float_matrix(X)
        labels = np.asarray(y, dtype=object).ravel()
        if labels.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on the number of frames")
        minimum = MIN_FRAMES_PER_COMPONENT * self.n_components
        self.phone_gmms_ = {}
        dropped = []
        for label in sorted(set(labels)):
            pool = X[labels == label]
            if pool.shape[0] < minimum:
                dropped.append(label)
                logger.warning("phone %s has %d frames (< %d); dropped from inventory",
                               label, pool.shape[0], minimum)
                continue
            self.phone_gmms_[label] = DiagonalGmm(
                n_components=self.n_components,
                max_iters=self.max_iters,
                tol=self.tol,
                seed=self.seed,
                variance_floor=self.variance_floor,
            ).fit(pool)
        if not self.phone_gmms_:
            raise InsufficientDataError("no phone had enough frames to train")
        self.inventory_ = tuple(sorted(self.phone_gmms_))
        self.dropped_ = tuple(dropped)
        self.n_features_in_ = X.shape[1]
        return self

    def segment_log_likelihoods(self, X) -> dict:
        """Summed log-likelihood of the segment frames under every phone model."""
        check_fitted(self, "phone_gmms_")
        X = as_float_matrix(X)
        return {label: float(model.score_samples(X).sum())
                for label, model in self.phone_gmms_.items()}

    def score_segment(self, X, label: str) -> float:
        """Goodness of pronunciation of a segment labeled `label`:
        (log-likelihood of the label minus the inventory maximum) per frame."""
        if label not in self.phone_gmms_:
            raise UnknownPhoneError(f"phone {label!r} not in inventory")
        totals = self.segment_log_likelihoods(X)
        best = max(totals.values())
        return (totals[label] - best) / np.asarray(X).shape[0]

    def score_utterance(self, utterance: AlignedUtterance, waveform: Waveform,
                        utterance_id: str = "",
                        config: FrontendConfig = DEFAULT_CONFIG,
                        phone_filter=None) -> list:
        """Score phones of an aligned 16 kHz utterance.

        By default only unvoiced consonants are scored (the exported feature
        set); pass phone_filter to widen or narrow that for diagnostics.
        Unknown and empty phones are skipped with warnings.
        """
        matrix = compute_mfcc39(waveform, config)
        wanted = UNVOICED_CONSONANTS if phone_filter is None else phone_filter
        scores = []
        skipped_empty = 0
        skipped_unknown = 0
        for phone in utterance.phones:
            if phone.label not in wanted:
                continue
            if phone.label not in self.phone_gmms_:
                skipped_unknown += 1
                continue
            try:
                frames = frames_for_segment(phone, matrix)
            except EmptySegmentError:
                skipped_empty += 1
                continue
            scores.append(PhoneScore(
                utterance_id=utterance_id,
                phone=phone.label,
                score=self.score_segment(frames, phone.label),
                n_frames=frames.shape[0],
            ))
        if skipped_empty or skipped_unknown:
            logger.warning("%s: skipped %d empty and %d unknown phones",
                           utterance_id or "utterance", skipped_empty, skipped_unknown)
        return scores


def pool_phone_frames(aligned_pairs, config: FrontendConfig = DEFAULT_CONFIG):
    """Pool per-phone MFCC frames across (AlignedUtterance, Waveform) pairs."""
    pools = {}
    for utterance, waveform in aligned_pairs:
        matrix = compute_mfcc39(waveform, config)
        for phone in utterance.phones:
            try:
                frames = frames_for_segment(phone, matrix)
            except EmptySegmentError:
                continue
            pools.setdefault(phone.label, []).append(frames)
    return {label: np.vstack(blocks) for label, blocks in sorted(pools.items())}


def train_articulation(aligned_pairs, config: FrontendConfig = DEFAULT_CONFIG,
                       **params) -> ArticulationScorer:
    """Train one GMM per phone from (AlignedUtterance, Waveform) pairs."""
    pools = pool_phone_frames(aligned_pairs, config)
    if not pools:
        raise InsufficientDataError("no phone frames found in the corpus")
    X = np.vstack(list(pools.values()))
    y = np.concatenate([
        np.full(block.shape[0], label, dtype=object)
        for label, block in pools.items()
    ])
    return ArticulationScorer(**params).fit(X, y)


def save_articulation(scorer: ArticulationScorer, directory) -> None:
    """Write per-phone model files plus a JSON inventory manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for label, model in scorer.phone_gmms_.items():
        filename = f"{label}.napg"
        save_gmm(model, directory / filename)
        files[label] = filename
    manifest = {
        "phones": sorted(files),
        "files": files,
        "dropped": list(scorer.dropped_),
        "n_components": scorer.n_components,
    }
    with open(directory / INVENTORY_FILE, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_articulation(directory) -> ArticulationScorer:
    directory = Path(directory)
    with open(directory / INVENTORY_FILE, encoding="utf-8") as handle:
        manifest = json.load(handle)
    scorer = ArticulationScorer(n_components=manifest.get("n_components", 16))
    scorer.phone_gmms_ = {
        label: load_gmm(directory / filename)
        for label, filename in manifest["files"].items()
    }
    scorer.inventory_ = tuple(sorted(scorer.phone_gmms_))
    scorer.dropped_ = tuple(manifest.get("dropped", []))
    first = next(iter(scorer.phone_gmms_.values()))
    scorer.n_features_in_ = first.n_features_in_
    return scorer
