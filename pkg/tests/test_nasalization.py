import numpy as np
import pytest

from conftest import build_utterance
from nap.audio import Waveform
from nap.errors import InsufficientDataError
from nap.nasalization import (
    NasalizationScorer,
    load_nasalization,
    save_nasalization,
    train_nasalization,
)
from nap.synthetic import render_utterance, SpeakerVoice
from nap.textgrid import assign_nasal_classes


def separated_scorer(gap=3.0, seed=0, dim=13):
    """Scorer trained on N(+gap, I) nasal vs N(-gap, I) oral frames."""
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.normal(gap, 1.0, (2000, dim)),
        rng.normal(-gap, 1.0, (2000, dim)),
    ])
    y = np.concatenate([np.ones(2000, dtype=bool), np.zeros(2000, dtype=bool)])
    return NasalizationScorer(n_components=4, seed=seed).fit(X, y), rng


def synthetic_utterance(seed=0):
    rng = np.random.default_rng(seed)
    voice = SpeakerVoice.sample(rng)
    waveform, alignment = render_utterance(["bead", "dot"], 0.0, voice, rng)
    return alignment, waveform


def test_identical_models_score_exactly_zero():
    scorer, rng = separated_scorer()
    scorer.gmm_orl_ = scorer.gmm_nas_  # same object on both sides
    X = rng.normal(0, 1, (50, 13))
    assert np.all(scorer.score_frames(X) == 0.0)
    assert scorer.score_segment(X) == 0.0

    alignment, waveform = synthetic_utterance()
    scores = scorer.score_utterance(alignment, waveform, "u0")
    assert scores
    assert all(s.score == 0.0 for s in scores)


def test_swap_antisymmetry_exact():
    scorer, rng = separated_scorer()
    swapped = NasalizationScorer(n_components=4)
    swapped.gmm_nas_ = scorer.gmm_orl_
    swapped.gmm_orl_ = scorer.gmm_nas_
    swapped.n_features_in_ = 13
    X = rng.normal(0, 2, (40, 13))
    assert scorer.score_segment(X) == -swapped.score_segment(X)

    alignment, waveform = synthetic_utterance()
    forward = scorer.score_utterance(alignment, waveform, "u0")
    backward = swapped.score_utterance(alignment, waveform, "u0")
    assert [s.score for s in forward] == [-s.score for s in backward]


def test_llr_sign_classifies_separated_classes():
    scorer, rng = separated_scorer()
    nas_test = rng.normal(3.0, 1.0, (2000, 13))
    orl_test = rng.normal(-3.0, 1.0, (2000, 13))
    llr_nas = scorer.score_frames(nas_test)
    llr_orl = scorer.score_frames(orl_test)
    accuracy = 0.5 * ((llr_nas > 0).mean() + (llr_orl < 0).mean())
    assert accuracy >= 0.99


def test_frame_duplication_invariance():
    scorer, rng = separated_scorer()
    X = rng.normal(1.0, 1.0, (9, 13))
    assert scorer.score_segment(np.vstack([X, X])) == pytest.approx(
        scorer.score_segment(X), abs=1e-12)


def test_segment_score_matches_per_frame_loop_oracle():
    scorer, rng = separated_scorer()
    X = rng.normal(0.5, 1.0, (9, 13))
    oracle = 0.0
    for row in X:
        oracle += scorer.gmm_nas_.log_density(row) - scorer.gmm_orl_.log_density(row)
    oracle /= len(X)
    assert scorer.score_segment(X) == pytest.approx(oracle, rel=1e-9)


def test_mean_score_increases_with_nasal_fraction():
    scorer, rng = separated_scorer()
    means = []
    for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
        n_nas = int(4000 * alpha)
        frames = np.vstack([
            rng.normal(3.0, 1.0, (n_nas, 13)),
            rng.normal(-3.0, 1.0, (4000 - n_nas, 13)),
        ])
        means.append(scorer.score_frames(frames).mean())
    assert np.all(np.diff(means) > 0)


def test_train_requires_nasal_frames():
    # corpus with zero nasal phones: the NAS pool is empty
    alignment, waveform = synthetic_utterance()
    classed = assign_nasal_classes(alignment)
    with pytest.raises(InsufficientDataError, match="NAS"):
        train_nasalization([(classed, waveform)], n_components=4)


def test_train_deterministic(mini_corpus):
    from nap.corpus import load_manifest
    from nap.nasalization import load_corpus_pairs

    manifest = load_manifest(mini_corpus[0])
    pairs = list(load_corpus_pairs(manifest))
    a = train_nasalization(pairs, n_components=4, seed=9)
    b = train_nasalization(pairs, n_components=4, seed=9)
    assert np.array_equal(a.gmm_nas_.means_, b.gmm_nas_.means_)
    assert np.array_equal(a.gmm_orl_.means_, b.gmm_orl_.means_)


def test_scores_only_export_phones(trained_models):
    nasal, _ = trained_models
    alignment, waveform = synthetic_utterance(seed=5)
    scores = nasal.score_utterance(alignment, waveform, "u0")
    voiced_export = {"AA", "IY", "B", "D"}
    assert {s.phone for s in scores} <= voiced_export
    assert all(s.n_frames >= 1 and np.isfinite(s.score) for s in scores)
    # nasals and unvoiced never scored
    assert not any(s.phone in ("M", "N", "T", "F") for s in scores)


def test_save_load_round_trip(tmp_path, trained_models):
    nasal, _ = trained_models
    save_nasalization(nasal, tmp_path)
    again = load_nasalization(tmp_path)
    assert np.array_equal(again.gmm_nas_.means_, nasal.gmm_nas_.means_)
    assert np.array_equal(again.gmm_orl_.variances_, nasal.gmm_orl_.variances_)


def test_insufficient_pool_guard():
    rng = np.random.default_rng(0)
    X = rng.normal(0, 1, (100, 13))
    y = np.zeros(100, dtype=bool)
    y[:10] = True  # only 10 NAS frames for a 4-component model
    with pytest.raises(InsufficientDataError):
        NasalizationScorer(n_components=4).fit(X, y)
