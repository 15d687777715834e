import numpy as np
import pytest

from nap.synthetic import generate_corpus
from nap.textgrid import AlignedUtterance, PhoneSegment, Word


def build_utterance(phone_rows, words=None, duration=None):
    """phone_rows: (label, t_start, t_end, word_index) tuples."""
    phones = tuple(PhoneSegment(label=l, t_start=s, t_end=e, word_index=w)
                   for l, s, e, w in phone_rows)
    if words is None:
        words = (Word(text="w0", t_start=phone_rows[0][1], t_end=phone_rows[-1][2]),)
    if duration is None:
        duration = max(p.t_end for p in phones)
    return AlignedUtterance(phones=phones, words=tuple(words), audio_duration=duration)


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """Small healthy synthetic corpus shared by training-path tests."""
    root = tmp_path_factory.mktemp("mini_corpus")
    manifest_path, ratings_path = generate_corpus(
        root, n_speakers=3, utterances_per_speaker=3, seed=11
    )
    return manifest_path, ratings_path


@pytest.fixture(scope="session")
def trained_models(tmp_path_factory, mini_corpus):
    """Nasalization + articulation scorers trained on the mini corpus."""
    from nap.corpus import load_manifest
    from nap.nasalization import load_corpus_pairs, train_nasalization
    from nap.articulation import train_articulation

    manifest_path, _ = mini_corpus
    manifest = load_manifest(manifest_path)
    pairs = list(load_corpus_pairs(manifest))
    nasal = train_nasalization(pairs, n_components=4, seed=2)
    artic = train_articulation(pairs, n_components=4, seed=2)
    return nasal, artic


def random_gmm(rng, n_components, dim):
    """A fitted-by-hand DiagonalGmm with random parameters."""
    from nap.gmm import DiagonalGmm

    model = DiagonalGmm(n_components=n_components)
    weights = rng.uniform(0.2, 1.0, n_components)
    model.weights_ = weights / weights.sum()
    model.means_ = rng.normal(0.0, 2.0, (n_components, dim))
    model.variances_ = rng.uniform(0.3, 2.5, (n_components, dim))
    model.n_features_in_ = dim
    model.log_likelihood_trace_ = np.empty(0)
    model.n_reseeds_ = 0
    return model
