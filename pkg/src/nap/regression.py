"""Ridge regression to clinician ratings, cross-validation, and selection.

The rater standardizes features with training-fold statistics, leaves the
intercept unpenalized, solves the normal equations directly, and clips
predictions to the 1..7 rating scale. LOSO and LODO harnesses keep all
standardization and imputation statistics strictly inside the training
fold. Speakers are processed in sorted order so reports do not depend on
input ordering.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import as_float_matrix, check_fitted
from .errors import EmptyDiseaseGroupError, SingularSystemError
from .features import impute_columns

RATING_RANGE = (1.0, 7.0)

# inner-CV candidate penalties for --sweep-lambda
DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-3, 2, 11))


class RidgeRater(BaseEstimator, RegressorMixin):
    """Ridge regression with training-fold standardization and rating clipping.

    Parameters
    ----------
    alpha : ridge penalty on standardized features (default 1.0).
    standardize : scale columns to zero mean, unit variance using training
        statistics; constant columns get scale 1 and therefore weight 0.
    fit_intercept : model an unpenalized intercept (the training mean of y).
    clip : (low, high) prediction clamp, or None to disable.
    """

    def __init__(self, alpha=1.0, standardize=True, fit_intercept=True,
                 clip=RATING_RANGE):
        self.alpha = alpha
        self.standardize = standardize
        self.fit_intercept = fit_intercept
        self.clip = clip

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree on the number of rows")
        if X.shape[0] < 2:
            raise ValueError("need at least 2 training rows")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

        n, d = X.shape
        if self.standardize:
            self.feature_means_ = X.mean(axis=0)
            scales = X.std(axis=0)
            self.feature_scales_ = np.where(scales < 1e-12, 1.0, scales)
        else:
            self.feature_means_ = np.zeros(d)
            self.feature_scales_ = np.ones(d)
        Z = (X - self.feature_means_) / self.feature_scales_

        if self.fit_intercept:
            self.intercept_ = float(y.mean())
            target = y - self.intercept_
        else:
            self.intercept_ = 0.0
            target = y

        gram = Z.T @ Z + self.alpha * np.eye(d)
        try:
            self.weights_ = np.linalg.solve(gram, Z.T @ target)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "normal equations are singular; increase alpha or drop collinear features"
            ) from exc
        return self

    def predict(self, X) -> np.ndarray:
        check_fitted(self, "weights_")
        X = as_float_matrix(X)
        Z = (X - self.feature_means_) / self.feature_scales_
        raw = self.intercept_ + Z @ self.weights_
        if self.clip is not None:
            raw = np.clip(raw, self.clip[0], self.clip[1])
        return raw


@dataclass(frozen=True)
class Metrics:
    mae: float
    pcc: float
    pcc_defined: bool


def metrics(actual, predicted) -> Metrics:
    """Mean absolute error and Pearson correlation.

    A constant side makes the correlation undefined; it is reported as 0
    with pcc_defined=False so downstream reports stay machine-readable.
    """
    actual = np.asarray(actual, dtype=np.float64).ravel()
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    if actual.shape != predicted.shape or actual.size == 0:
        raise ValueError("actual and predicted must be equal-length, non-empty")
    mae = float(np.mean(np.abs(actual - predicted)))
    sd_a = actual.std()
    sd_p = predicted.std()
    if sd_a < 1e-15 or sd_p < 1e-15:
        return Metrics(mae=mae, pcc=0.0, pcc_defined=False)
    centered_a = actual - actual.mean()
    centered_p = predicted - predicted.mean()
    pcc = float((centered_a @ centered_p) / (actual.size * sd_a * sd_p))
    return Metrics(mae=mae, pcc=pcc, pcc_defined=True)


@dataclass(frozen=True)
class EvalReport:
    scheme: str
    held_out: str
    speaker_ids: tuple
    actual: tuple
    predicted: tuple
    mae: float
    pcc: float
    pcc_defined: bool
    alpha: float
    feature_names: tuple
    fold_lambdas: tuple = ()

    def to_dict(self) -> dict:
        record = {
            "scheme": self.scheme,
            "held_out": self.held_out,
            "lambda": self.alpha,
            "features": list(self.feature_names),
            "mae": self.mae,
            "pcc": self.pcc,
            "pcc_defined": self.pcc_defined,
            "per_speaker": [
                {"speaker_id": s, "actual": a, "predicted": p}
                for s, a, p in zip(self.speaker_ids, self.actual, self.predicted)
            ],
        }
        if self.fold_lambdas:
            record["fold_lambdas"] = list(self.fold_lambdas)
        return record


def _ordered_matrix(vectors, ratings, feature_names):
    """Sort speakers by id, keep missing cells as NaN, attach targets."""
    rated = [v for v in vectors if v.speaker_id in ratings.hypernasality]
    rated.sort(key=lambda v: v.speaker_id)
    if len(rated) < 3:
        raise ValueError("need at least 3 rated speakers for cross-validation")
    ids = [v.speaker_id for v in rated]
    X = np.full((len(ids), len(feature_names)), np.nan)
    for i, vector in enumerate(rated):
        for j, feature in enumerate(feature_names):
            value = vector.get(feature)
            if value is not None:
                X[i, j] = value
    y = np.array([ratings.hypernasality[s] for s in ids])
    return X, y, ids


def _fit_fold(X, y, train_mask, test_mask, feature_names, alpha):
    """Fit on the training rows only; impute test rows with training means."""
    X_train = impute_columns(X[train_mask], feature_names)
    X_test = impute_columns(X[test_mask], feature_names, reference=X[train_mask])
    model = RidgeRater(alpha=alpha).fit(X_train, y[train_mask])
    return model.predict(X_test)


def _inner_sweep(X, y, train_mask, feature_names, grid):
    """Pick the penalty minimizing inner-LOSO MSE over the training rows
    only; ties resolve to the first grid entry."""
    rows = np.where(train_mask)[0]
    best_lambda, best_mse = None, np.inf
    for alpha in grid:
        errors = []
        for held in rows:
            inner_train = train_mask.copy()
            inner_train[held] = False
            inner_test = np.zeros_like(train_mask)
            inner_test[held] = True
            prediction = _fit_fold(X, y, inner_train, inner_test,
                                   feature_names, alpha)[0]
            errors.append((y[held] - prediction) ** 2)
        mse = float(np.mean(errors))
        if mse < best_mse:
            best_lambda, best_mse = alpha, mse
    return best_lambda


def loso_evaluate(vectors, ratings, feature_names, alpha=1.0,
                  sweep=None) -> EvalReport:
    """Leave-one-speaker-out cross-validation.

    When `sweep` is an iterable of candidate penalties, each fold selects
    its penalty by inner LOSO over the training speakers (alpha ignored).
    """
    X, y, ids = _ordered_matrix(vectors, ratings, feature_names)
    n = len(ids)
    predictions = np.empty(n)
    fold_lambdas = []
    for i in range(n):
        train_mask = np.ones(n, dtype=bool)
        train_mask[i] = False
        test_mask = ~train_mask
        fold_alpha = alpha
        if sweep is not None:
            fold_alpha = _inner_sweep(X, y, train_mask, feature_names, sweep)
            fold_lambdas.append(fold_alpha)
        predictions[i] = _fit_fold(X, y, train_mask, test_mask, feature_names,
                                   fold_alpha)[0]
    result = metrics(y, predictions)
    return EvalReport(
        scheme="loso", held_out="", speaker_ids=tuple(ids),
        actual=tuple(float(v) for v in y),
        predicted=tuple(float(v) for v in predictions),
        mae=result.mae, pcc=result.pcc, pcc_defined=result.pcc_defined,
        alpha=alpha, feature_names=tuple(feature_names),
        fold_lambdas=tuple(fold_lambdas),
    )


def lodo_evaluate(vectors, ratings, manifest, held_out_disease,
                  feature_names, alpha=1.0, sweep=None) -> EvalReport:
    """Leave-one-disease-out: train on all other diseases' speakers."""
    disease_of = manifest.disease_of()
    held_out_disease = held_out_disease.value if hasattr(held_out_disease, "value") \
        else str(held_out_disease)
    X, y, ids = _ordered_matrix(vectors, ratings, feature_names)
    labels = []
    for speaker in ids:
        disease = disease_of.get(speaker)
        labels.append(disease.value if disease is not None else None)
    labels = np.array(labels, dtype=object)
    test_mask = labels == held_out_disease
    if not test_mask.any():
        raise EmptyDiseaseGroupError(
            f"no rated speakers with disease {held_out_disease!r}"
        )
    train_mask = ~test_mask
    if train_mask.sum() < 3:
        raise EmptyDiseaseGroupError(
            f"fewer than 3 training speakers outside {held_out_disease!r}"
        )
    fold_lambdas = []
    if sweep is not None:
        alpha = _inner_sweep(X, y, train_mask, feature_names, sweep)
        fold_lambdas.append(alpha)
    predictions = _fit_fold(X, y, train_mask, test_mask, feature_names, alpha)
    held_ids = [s for s, held in zip(ids, test_mask) if held]
    result = metrics(y[test_mask], predictions)
    return EvalReport(
        scheme="lodo", held_out=held_out_disease, speaker_ids=tuple(held_ids),
        actual=tuple(float(v) for v in y[test_mask]),
        predicted=tuple(float(v) for v in predictions),
        mae=result.mae, pcc=result.pcc, pcc_defined=result.pcc_defined,
        alpha=alpha, feature_names=tuple(feature_names),
        fold_lambdas=tuple(fold_lambdas),
    )


@dataclass(frozen=True)
class SelectionStep:
    step: int
    feature: str
    mse: float
    pcc: float


def _loso_mse(vectors, ratings, feature_names, alpha):
    report = loso_evaluate(vectors, ratings, feature_names, alpha)
    actual = np.asarray(report.actual)
    predicted = np.asarray(report.predicted)
    return float(np.mean((actual - predicted) ** 2)), report.pcc


def forward_select(vectors, ratings, candidate_features, alpha=1.0,
                   max_features=None) -> list:
    """Greedy forward selection minimizing LOSO mean squared error.

    At each step the candidate (lowest index on ties) whose inclusion most
    reduces the LOSO MSE is added; selection stops when no candidate gives
    a strict decrease. Returns the list of SelectionStep records.
    """
    if len(candidate_features) < 2:
        raise ValueError("need at least 2 candidate features")
    remaining = list(candidate_features)
    selected = []
    trace = []
    best_mse = np.inf
    limit = max_features or len(candidate_features)
    while remaining and len(selected) < limit:
        scored = []
        for feature in remaining:
            mse, pcc = _loso_mse(vectors, ratings, selected + [feature], alpha)
            scored.append((mse, feature, pcc))
        step_mse, step_feature, step_pcc = min(scored, key=lambda item: item[0])
        if not step_mse < best_mse:
            break
        best_mse = step_mse
        selected.append(step_feature)
        remaining.remove(step_feature)
        trace.append(SelectionStep(step=len(selected), feature=step_feature,
                                   mse=step_mse, pcc=step_pcc))
    return trace


# report serialization


def write_report_json(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_report_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["speaker_id", "actual", "predicted"])
        for speaker, actual, predicted in zip(report.speaker_ids, report.actual,
                                              report.predicted):
            writer.writerow([speaker, repr(actual), repr(predicted)])


def write_selection_csv(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "feature", "cumulative_pcc", "cumulative_mse"])
        for record in trace:
            writer.writerow([record.step, record.feature,
                             repr(record.pcc), repr(record.mse)])
