import math

import numpy as np
import pytest

from conftest import random_gmm
from nap.errors import (
    CorruptFileError,
    DimensionMismatchError,
    InsufficientDataError,
    VersionMismatchError,
)
from nap.gmm import DiagonalGmm, load_gmm, save_gmm


def naive_log_density(model, x):
    """Brute-force mixture density without log-sum-exp."""
    total = 0.0
    for w, mu, var in zip(model.weights_, model.means_, model.variances_):
        quad = np.sum((x - mu) ** 2 / var)
        norm = np.prod(1.0 / np.sqrt(2.0 * math.pi * var))
        total += w * norm * math.exp(-0.5 * quad)
    return math.log(total)


def test_log_density_analytic_standard_normal():
    model = DiagonalGmm(n_components=1)
    model.weights_ = np.array([1.0])
    model.means_ = np.zeros((1, 2))
    model.variances_ = np.ones((1, 2))
    model.n_features_in_ = 2
    assert model.log_density(np.zeros(2)) == pytest.approx(-math.log(2 * math.pi), abs=1e-12)


def test_two_identical_components_collapse_to_one():
    rng = np.random.default_rng(0)
    one = random_gmm(rng, 1, 3)
    two = DiagonalGmm(n_components=2)
    two.weights_ = np.array([0.5, 0.5])
    two.means_ = np.vstack([one.means_, one.means_])
    two.variances_ = np.vstack([one.variances_, one.variances_])
    two.n_features_in_ = 3
    for _ in range(20):
        x = rng.normal(0, 2, 3)
        assert two.log_density(x) == pytest.approx(one.log_density(x), abs=1e-12)


def test_log_density_matches_naive_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        model = random_gmm(rng, 16, 4)
        x = model.means_[rng.integers(16)] + rng.normal(0, 1, 4)
        mine = model.log_density(x)
        oracle = naive_log_density(model, x)
        assert mine == pytest.approx(oracle, rel=1e-9)


def test_component_permutation_invariance():
    rng = np.random.default_rng(2)
    model = random_gmm(rng, 8, 3)
    permuted = random_gmm(rng, 8, 3)
    order = rng.permutation(8)
    permuted.weights_ = model.weights_[order]
    permuted.means_ = model.means_[order]
    permuted.variances_ = model.variances_[order]
    x = rng.normal(0, 2, 3)
    assert permuted.log_density(x) == pytest.approx(model.log_density(x), rel=1e-12)


def test_score_samples_matches_loop():
    rng = np.random.default_rng(3)
    model = random_gmm(rng, 16, 5)
    X = rng.normal(0, 2, (100, 5))
    vector = model.score_samples(X)
    loop = np.array([model.log_density(row) for row in X])
    assert np.allclose(vector, loop, rtol=1e-9)
    assert vector.sum() == pytest.approx(loop.sum(), rel=1e-9)


def test_score_samples_single_row_and_duplicates():
    rng = np.random.default_rng(4)
    model = random_gmm(rng, 4, 3)
    x = rng.normal(0, 1, 3)
    one = model.score_samples(x.reshape(1, -1))
    assert one.shape == (1,)
    assert one[0] == model.log_density(x)
    dup = model.score_samples(np.vstack([x, x]))
    assert dup[0] == dup[1]


def test_dimension_mismatch():
    rng = np.random.default_rng(5)
    model = random_gmm(rng, 4, 3)
    with pytest.raises(DimensionMismatchError):
        model.score_samples(np.zeros((2, 5)))


def test_fit_single_gaussian_matches_sample_statistics():
    # closed-form MLE oracle: with one component, EM must land on the
    # sample mean/variance in one step
    rng = np.random.default_rng(6)
    true_mean = np.array([2.0, -1.0])
    X = rng.normal(true_mean, 1.5, size=(2000, 2))
    model = DiagonalGmm(n_components=1, seed=0).fit(X)
    assert np.allclose(model.means_[0], X.mean(axis=0), atol=1e-9)
    assert np.allclose(model.variances_[0], X.var(axis=0), atol=1e-9)
    assert np.allclose(model.means_[0], true_mean, atol=3 * 1.5 / np.sqrt(2000))


def test_fit_two_separated_clusters():
    rng = np.random.default_rng(7)
    X = np.vstack([
        rng.normal(-10.0, 1.0, (1500, 2)),
        rng.normal(10.0, 1.0, (1500, 2)),
    ])
    model = DiagonalGmm(n_components=2, seed=1).fit(X)
    assert np.allclose(np.sort(model.weights_), [0.5, 0.5], atol=0.05)
    centers = np.sort(model.means_[:, 0])
    assert abs(centers[0] + 10.0) < 0.5
    assert abs(centers[1] - 10.0) < 0.5


def test_fit_deterministic_given_seed():
    rng = np.random.default_rng(8)
    X = rng.normal(0, 1, (500, 3))
    a = DiagonalGmm(n_components=4, seed=42).fit(X)
    b = DiagonalGmm(n_components=4, seed=42).fit(X)
    assert np.array_equal(a.weights_, b.weights_)
    assert np.array_equal(a.means_, b.means_)
    assert np.array_equal(a.variances_, b.variances_)


def test_fit_insufficient_data():
    with pytest.raises(InsufficientDataError):
        DiagonalGmm(n_components=16).fit(np.zeros((100, 2)) + np.arange(2))


def test_weights_sum_to_one_and_variance_floor():
    rng = np.random.default_rng(9)
    X = rng.normal(0, 1, (2000, 3))
    X[:, 2] *= 1e-6  # drive one dimension toward the floor
    model = DiagonalGmm(n_components=4, seed=0, variance_floor=1e-6).fit(X)
    assert model.weights_.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(model.variances_ >= 1e-6)


def test_em_trace_monotone():
    rng = np.random.default_rng(10)
    X = np.vstack([rng.normal(i, 0.5, (300, 2)) for i in range(4)])
    model = DiagonalGmm(n_components=4, seed=3, tol=1e-10, max_iters=200).fit(X)
    trace = model.log_likelihood_trace_
    assert len(trace) >= 2
    assert np.all(np.diff(trace) >= -1e-10)


def test_full_covariance_not_implemented():
    with pytest.raises(NotImplementedError):
        DiagonalGmm(covariance_type="full").fit(np.zeros((200, 2)) + np.arange(2))


def test_config_validation():
    X = np.random.default_rng(0).normal(0, 1, (50, 2))
    with pytest.raises(ValueError):
        DiagonalGmm(n_components=0).fit(X)
    with pytest.raises(ValueError):
        DiagonalGmm(n_components=1, tol=0.0).fit(X)


def test_degenerate_component_reseeded(caplog):
    # a component initialized absurdly far away collects ~zero
    # responsibility and must be re-seeded from the widest component
    rng = np.random.default_rng(15)
    X = rng.normal(0, 1, (500, 2))
    bad_init = np.array([[0.0, 0.0], [1e8, 1e8]])
    with caplog.at_level("WARNING"):
        model = DiagonalGmm(n_components=2, seed=0, means_init=bad_init,
                            max_iters=50).fit(X)
    assert model.n_reseeds_ >= 1
    assert any("re-seeding" in record.message for record in caplog.records)
    assert np.all(model.weights_ > 1e-8)
    assert np.all(np.isfinite(model.means_))


def test_monte_carlo_density_integral():
    # uniform sampling over a 3-sigma bounding box: the density mass
    # estimate must land in [0.95, 1.0]
    rng = np.random.default_rng(11)
    X = np.vstack([rng.normal(-2, 1.0, (400, 2)), rng.normal(2, 0.7, (400, 2))])
    model = DiagonalGmm(n_components=2, seed=0).fit(X)
    sd = np.sqrt(model.variances_)
    lo = (model.means_ - 3 * sd).min(axis=0)
    hi = (model.means_ + 3 * sd).max(axis=0)
    points = rng.uniform(lo, hi, size=(1_000_000, 2))
    estimate = np.exp(model.score_samples(points)).mean() * np.prod(hi - lo)
    assert 0.95 <= estimate <= 1.0


def test_save_load_round_trip_exact(tmp_path):
    rng = np.random.default_rng(12)
    X = rng.normal(0, 1, (400, 3))
    model = DiagonalGmm(n_components=2, seed=0).fit(X)
    path = tmp_path / "model.napg"
    save_gmm(model, path)
    again = load_gmm(path)
    assert np.array_equal(again.weights_, model.weights_)
    assert np.array_equal(again.means_, model.means_)
    assert np.array_equal(again.variances_, model.variances_)
    assert again.n_features_in_ == 3


def test_load_truncated_file(tmp_path):
    rng = np.random.default_rng(13)
    model = random_gmm(rng, 2, 2)
    path = tmp_path / "model.napg"
    save_gmm(model, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(CorruptFileError):
        load_gmm(path)


def test_load_future_version(tmp_path):
    rng = np.random.default_rng(14)
    model = random_gmm(rng, 2, 2)
    path = tmp_path / "model.napg"
    save_gmm(model, path)
    blob = bytearray(path.read_bytes())
    blob[4] = 99  # version field
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionMismatchError):
        load_gmm(path)


def test_load_bad_magic(tmp_path):
    path = tmp_path / "model.napg"
    path.write_bytes(b"ZZZZ" + b"\0" * 64)
    with pytest.raises(CorruptFileError):
        load_gmm(path)
