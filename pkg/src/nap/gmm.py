"""Diagonal-covariance Gaussian mixture modeling.

EM training with k-means++ initialization, stable log-sum-exp density
evaluation, and a little-endian binary model format. The estimator follows
the sklearn fit/score_samples convention so it composes with pipelines and
cloning.
"""

import logging
import struct
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from ._validation import as_float_matrix, check_dim, check_fitted
from .errors import (
    CorruptFileError,
    DimensionMismatchError,
    InsufficientDataError,
    VersionMismatchError,
)

logger = logging.getLogger(__name__)

_NAPG_MAGIC = b"NAPG"
_NAPG_VERSION = 1

MIN_FRAMES_PER_COMPONENT = 10
DEGENERATE_WEIGHT = 1e-8


def _kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: iteratively sample centers with probability
    proportional to squared distance from the nearest chosen center."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest_sq = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            centers[j] = X[rng.integers(n)]
            continue
        probabilities = closest_sq / total
        centers[j] = X[rng.choice(n, p=probabilities)]
        distance_sq = np.sum((X - centers[j]) ** 2, axis=1)
        closest_sq = np.minimum(closest_sq, distance_sq)
    return centers


class DiagonalGmm(BaseEstimator):
    """Gaussian mixture with diagonal covariances trained by EM.

    Parameters
    ----------
    n_components : mixture size (default 16).
    max_iters : EM iteration cap.
    tol : relative log-likelihood improvement below which EM stops.
    seed : RNG seed for k-means++ initialization (training is deterministic
        given data and seed).
    variance_floor : lower bound applied to every variance each M-step.
    covariance_type : only "diag" is implemented; "full" is reserved.
    means_init : optional (n_components, dim) array overriding k-means++.
    """

    def __init__(self, n_components=16, max_iters=100, tol=1e-6, seed=0,
                 variance_floor=1e-6, covariance_type="diag", means_init=None):
        self.n_components = n_components
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed
        self.variance_floor = variance_floor
        self.covariance_type = covariance_type
        self.means_init = means_init

    # log N(x; mu_k, diag sigma2_k) + log w_k for all frames/components
    def _weighted_log_prob(self, X, weights, means, variances):
        inv_var = 1.0 / variances
        log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * variances), axis=1)
        quad = (
            X ** 2 @ inv_var.T
            - 2.0 * (X @ (means * inv_var).T)
            + np.sum(means ** 2 * inv_var, axis=1)
        )
        return np.log(weights) + log_norm - 0.5 * quad

    def fit(self, X, y=None):
        """Run EM on frame rows X of shape (n_frames, dim)."""
        if self.covariance_type != "diag":
            raise NotImplementedError("only diagonal covariances are implemented")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        X = as_float_matrix(X)
        n, dim = X.shape
        k = self.n_components
        if n < MIN_FRAMES_PER_COMPONENT * k:
            raise InsufficientDataError(
                f"need at least {MIN_FRAMES_PER_COMPONENT * k} frames "
                f"for {k} components, got {n}"
            )

        rng = np.random.default_rng(self.seed)
        if self.means_init is not None:
            means = np.array(self.means_init, dtype=np.float64)
            if means.shape != (k, dim):
                raise ValueError(f"means_init must have shape ({k}, {dim})")
        else:
            means = _kmeans_plusplus(X, k, rng)
        variances = np.tile(np.maximum(X.var(axis=0), self.variance_floor), (k, 1))
        weights = np.full(k, 1.0 / k)

        trace = []
        reseeds = 0
        for iteration in range(self.max_iters):
            log_prob = self._weighted_log_prob(X, weights, means, variances)
            per_frame = logsumexp(log_prob, axis=1)
            mean_ll = float(per_frame.mean())
            trace.append(mean_ll)
            if len(trace) >= 2:
                previous = trace[-2]
                improvement = mean_ll - previous
                if improvement < -1e-10:
                    logger.debug("log-likelihood dipped by %.3e at iteration %d",
                                 -improvement, iteration)
                if abs(improvement) < self.tol * max(abs(previous), 1e-12):
                    break

            responsibilities = np.exp(log_prob - per_frame[:, None])
            counts = responsibilities.sum(axis=0)
            weights = counts / n

            degenerate = np.where(weights < DEGENERATE_WEIGHT)[0]
            if degenerate.size:
                donor = int(np.argmax(variances.sum(axis=1)))
                for j in degenerate:
                    reseeds += 1
                    logger.warning(
                        "component %d collapsed; re-seeding from component %d", j, donor
                    )
                    means[j] = means[donor] + np.sqrt(variances[donor])
                    variances[j] = variances[donor]
                    shared = weights[donor] / 2.0
                    weights[j] = shared
                    weights[donor] = shared
                weights = weights / weights.sum()
                continue

            means = (responsibilities.T @ X) / counts[:, None]
            second_moment = (responsibilities.T @ (X ** 2)) / counts[:, None]
            variances = np.maximum(second_moment - means ** 2, self.variance_floor)

        self.weights_ = weights
        self.means_ = means
        self.variances_ = variances
        self.n_features_in_ = dim
        self.log_likelihood_trace_ = np.asarray(trace)
        self.n_reseeds_ = reseeds
        return self

    def score_samples(self, X) -> np.ndarray:
        """Per-row log mixture density via log-sum-exp."""
        check_fitted(self, "weights_")
        X = as_float_matrix(X)
        check_dim(X, self.n_features_in_)
        log_prob = self._weighted_log_prob(X, self.weights_, self.means_, self.variances_)
        return logsumexp(log_prob, axis=1)

    def log_density(self, x) -> float:
        """Log density of one observation vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatchError(f"expected a vector, got ndim={x.ndim}")
        return float(self.score_samples(x.reshape(1, -1))[0])

    def total_log_likelihood(self, X) -> float:
        return float(self.score_samples(X).sum())


def save_gmm(model: DiagonalGmm, path) -> None:
    """Serialize a fitted model: magic, u32 version, u32 n_components,
    u32 dim, then weights/means/variances as little-endian float64."""
    check_fitted(model, "weights_")
    k = int(model.weights_.shape[0])
    dim = int(model.n_features_in_)
    header = _NAPG_MAGIC + struct.pack("<III", _NAPG_VERSION, k, dim)
    body = b"".join(
        np.ascontiguousarray(arr, dtype="<f8").tobytes()
        for arr in (model.weights_, model.means_, model.variances_)
    )
    Path(path).write_bytes(header + body)


def load_gmm(path) -> DiagonalGmm:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != _NAPG_MAGIC:
        raise CorruptFileError(f"not a model file: {path}")
    version, k, dim = struct.unpack_from("<III", data, 4)
    if version != _NAPG_VERSION:
        raise VersionMismatchError(
            f"model format version {version} unsupported (expected {_NAPG_VERSION}): {path}"
        )
    expected = 16 + 8 * (k + 2 * k * dim)
    if len(data) != expected:
        raise CorruptFileError(
            f"model file truncated: expected {expected} bytes, got {len(data)}: {path}"
        )
    offset = 16
    weights = np.frombuffer(data, dtype="<f8", count=k, offset=offset).copy()
    offset += 8 * k
    means = np.frombuffer(data, dtype="<f8", count=k * dim, offset=offset).reshape(k, dim).copy()
    offset += 8 * k * dim
    variances = np.frombuffer(data, dtype="<f8", count=k * dim, offset=offset).reshape(k, dim).copy()

    model = DiagonalGmm(n_components=k)
    model.weights_ = weights
    model.means_ = means
    model.variances_ = variances
    model.n_features_in_ = dim
    model.log_likelihood_trace_ = np.empty(0)
    model.n_reseeds_ = 0
    return model
