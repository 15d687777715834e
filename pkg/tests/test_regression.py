import numpy as np
import pytest

from nap.corpus import CorpusManifest, Disease, ManifestEntry, RatingsTable
from nap.errors import EmptyDiseaseGroupError, SingularSystemError
from nap.features import SpeakerFeatureVector
from nap.regression import (
    EvalReport,
    RidgeRater,
    forward_select,
    lodo_evaluate,
    loso_evaluate,
    metrics,
)


def vectors_from_matrix(X, feature_names, prefix="spk"):
    out = []
    for i, row in enumerate(np.atleast_2d(X)):
        vec = SpeakerFeatureVector(speaker_id=f"{prefix}{i:03d}")
        for name, value in zip(feature_names, row):
            if np.isnan(value):
                continue
            if name.startswith("AP("):
                vec.articulation[name[3:-1]] = float(value)
            else:
                vec.nasalization[name[2:-1]] = float(value)
        out.append(vec)
    return out


def ratings_for(values, prefix="spk"):
    return RatingsTable(
        hypernasality={f"{prefix}{i:03d}": float(v) for i, v in enumerate(values)},
        articulatory_precision={},
    )


def manifest_for(diseases, prefix="spk"):
    entries = tuple(
        ManifestEntry(speaker_id=f"{prefix}{i:03d}", disease=Disease(d),
                      utterance_id=f"u{i}", wav_path=f"{i}.wav",
                      textgrid_path=f"{i}.TextGrid")
        for i, d in enumerate(diseases)
    )
    return CorpusManifest(entries=entries)


# RidgeRater


def test_exact_line_fit_at_zero_alpha():
    model = RidgeRater(alpha=0.0, clip=None).fit([[1.0], [2.0]], [1.0, 2.0])
    predictions = model.predict([[1.0], [2.0], [3.0]])
    assert np.allclose(predictions, [1.0, 2.0, 3.0], atol=1e-12)
    # raw-scale slope 1, intercept 0
    slope = predictions[1] - predictions[0]
    intercept = predictions[0] - slope * 1.0
    assert slope == pytest.approx(1.0, abs=1e-12)
    assert intercept == pytest.approx(0.0, abs=1e-12)


def test_closed_form_hand_case():
    # without standardization/intercept: w = (X'X + 2)^-1 X'y = 5/7
    model = RidgeRater(alpha=2.0, standardize=False, fit_intercept=False,
                       clip=None).fit([[1.0], [2.0]], [1.0, 2.0])
    assert model.weights_[0] == pytest.approx(5.0 / 7.0, abs=1e-12)


def ridge_objective(Z, target, alpha):
    def objective(w):
        residual = Z @ w - target
        return residual @ residual + alpha * (w @ w)
    return objective


def test_gradient_zero_at_solution():
    rng = np.random.default_rng(0)
    X = rng.normal(0, 1, (20, 6))
    y = rng.normal(3, 1, 20)
    model = RidgeRater(alpha=0.5, clip=None).fit(X, y)
    Z = (X - model.feature_means_) / model.feature_scales_
    objective = ridge_objective(Z, y - model.intercept_, 0.5)
    h = 1e-5
    gradient = np.empty(6)
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        gradient[j] = (objective(model.weights_ + e) - objective(model.weights_ - e)) / (2 * h)
    assert np.linalg.norm(gradient) < 1e-8


def test_predict_at_training_means_gives_mean_target():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 10, (15, 3))
    y = rng.uniform(1, 7, 15)
    for alpha in (0.0, 1.0, 100.0):
        model = RidgeRater(alpha=alpha).fit(X, y)
        prediction = model.predict(X.mean(axis=0).reshape(1, -1))[0]
        assert prediction == pytest.approx(y.mean(), abs=1e-10)


def test_zero_weight_model_predicts_intercept():
    model = RidgeRater(alpha=1.0, clip=None).fit([[1.0], [1.0], [1.0]], [2.0, 3.0, 4.0])
    # constant column: scale 1, weight 0
    assert model.weights_[0] == pytest.approx(0.0)
    assert np.allclose(model.predict([[5.0], [99.0]]), 3.0)


def test_predictions_clipped_to_rating_scale():
    model = RidgeRater(alpha=1e-12).fit([[1.0], [2.0], [3.0]], [3.0, 5.0, 7.0])
    high = model.predict([[4.0]])[0]  # raw 9 -> clipped 7
    low = model.predict([[-1.0]])[0]
    assert high == 7.0
    assert low == 1.0


def test_singular_system_at_zero_alpha():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    with pytest.raises(SingularSystemError):
        RidgeRater(alpha=0.0).fit(X, [1.0, 2.0, 3.0])


def test_solution_continuity_in_alpha():
    rng = np.random.default_rng(2)
    X = rng.normal(0, 1, (30, 5))
    y = rng.normal(4, 1, 30)
    a = RidgeRater(alpha=1.0).fit(X, y)
    b = RidgeRater(alpha=1.0 + 1e-9).fit(X, y)
    assert np.linalg.norm(a.weights_ - b.weights_) < 1e-6


def test_huge_alpha_shrinks_to_mean():
    rng = np.random.default_rng(3)
    X = rng.normal(0, 1, (25, 4))
    y = rng.uniform(2, 6, 25)
    model = RidgeRater(alpha=1e6).fit(X, y)
    predictions = model.predict(X)
    assert np.max(np.abs(predictions - y.mean())) < 1e-3


# metrics


def test_metrics_identity():
    result = metrics([1, 2, 3], [1, 2, 3])
    assert result.mae == 0.0
    assert result.pcc == pytest.approx(1.0)


def test_metrics_antisymmetric():
    result = metrics([1, 2, 3], [3, 2, 1])
    assert result.pcc == pytest.approx(-1.0)
    assert result.mae == pytest.approx(4.0 / 3.0)


def test_metrics_arithmetic():
    assert metrics([1, 2], [2, 4]).mae == pytest.approx(1.5)


def test_metrics_zero_variance_flagged():
    result = metrics([2, 2, 2], [1, 2, 3])
    assert result.pcc == 0.0
    assert not result.pcc_defined


def test_pcc_affine_invariance_mae_not():
    rng = np.random.default_rng(4)
    actual = rng.uniform(1, 7, 30)
    predicted = actual + rng.normal(0, 0.5, 30)
    base = metrics(actual, predicted)
    scaled = metrics(actual, 2.0 * predicted + 1.0)
    assert scaled.pcc == pytest.approx(base.pcc, abs=1e-12)
    assert scaled.mae != pytest.approx(base.mae)


# LOSO / LODO


def linear_setup(n=12, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    X = np.column_stack([x, rng.normal(0, 1, n)])
    y = np.clip(1.0 + 5.0 * x + noise * rng.normal(0, 1, n), 1.0, 7.0)
    names = ["N(AA)", "N(IY)"]
    return vectors_from_matrix(X, names), ratings_for(y), names


def test_loso_realizable_target():
    vectors, ratings, names = linear_setup()
    report = loso_evaluate(vectors, ratings, names, alpha=1e-8)
    assert report.pcc >= 0.999
    assert report.mae <= 1e-3
    assert len(report.speaker_ids) == 12


def test_loso_constant_ratings_flagged():
    vectors, _, names = linear_setup()
    ratings = ratings_for([3.0] * 12)
    report = loso_evaluate(vectors, ratings, names, alpha=1.0)
    assert not report.pcc_defined
    assert report.pcc == 0.0
    assert report.mae == pytest.approx(
        np.mean(np.abs(np.array(report.predicted) - 3.0)))


def loso_oracle(X, y, ids, alpha):
    """Independent double-loop re-implementation for fold-for-fold checks."""
    predictions = {}
    n = len(ids)
    for i in range(n):
        train_rows = [r for r in range(n) if r != i]
        X_train = X[train_rows]
        y_train = y[train_rows]
        mean = X_train.mean(axis=0)
        scale = X_train.std(axis=0)
        scale = np.where(scale < 1e-12, 1.0, scale)
        Z = (X_train - mean) / scale
        w = np.linalg.solve(Z.T @ Z + alpha * np.eye(X.shape[1]),
                            Z.T @ (y_train - y_train.mean()))
        raw = y_train.mean() + ((X[i] - mean) / scale) @ w
        predictions[ids[i]] = float(np.clip(raw, 1.0, 7.0))
    return predictions


def test_loso_matches_double_loop_oracle_exactly():
    rng = np.random.default_rng(5)
    names = ["N(AA)", "N(IY)", "AP(T)"]
    X = rng.normal(0, 1, (10, 3))
    y = np.clip(3.0 + 1.5 * X[:, 0] + rng.normal(0, 0.3, 10), 1.0, 7.0)
    vectors = vectors_from_matrix(X, names)
    ratings = ratings_for(y)
    report = loso_evaluate(vectors, ratings, names, alpha=0.7)
    oracle = loso_oracle(X, y, [v.speaker_id for v in vectors], 0.7)
    for speaker, predicted in zip(report.speaker_ids, report.predicted):
        assert predicted == oracle[speaker]


def test_loso_invariant_to_speaker_order():
    vectors, ratings, names = linear_setup(noise=0.3, seed=6)
    report_a = loso_evaluate(vectors, ratings, names, alpha=1.0)
    report_b = loso_evaluate(list(reversed(vectors)), ratings, names, alpha=1.0)
    assert report_a == report_b


def test_loso_no_leakage_from_held_out_row():
    # the held-out row must not influence its own fold's training
    # statistics: the fold model fitted without the victim, applied to the
    # perturbed victim row, must reproduce the harness prediction exactly
    vectors, ratings, names = linear_setup(noise=0.2, seed=7)
    victim_index = 4
    victim_id = vectors[victim_index].speaker_id
    perturbed = [SpeakerFeatureVector(v.speaker_id, dict(v.nasalization),
                                      dict(v.articulation), dict(v.coverage))
                 for v in vectors]
    perturbed[victim_index].nasalization["AA"] += 100.0
    report = loso_evaluate(perturbed, ratings, names, alpha=1.0)

    rows = {v.speaker_id: [v.nasalization["AA"], v.nasalization["IY"]]
            for v in vectors}
    X_train = np.array([rows[s] for s in sorted(rows) if s != victim_id])
    y_train = np.array([ratings.hypernasality[s] for s in sorted(rows) if s != victim_id])
    fold_model = RidgeRater(alpha=1.0).fit(X_train, y_train)
    victim_row = np.array(rows[victim_id])
    victim_row[0] += 100.0
    expected = fold_model.predict(victim_row.reshape(1, -1))[0]
    index = report.speaker_ids.index(victim_id)
    assert report.predicted[index] == expected


def test_loso_imputation_stays_in_fold():
    vectors, ratings, names = linear_setup(noise=0.2, seed=8)
    # blank one cell; prediction for OTHER speakers must not change when the
    # held-out speaker's remaining features change
    vectors[2].nasalization.pop("IY")
    report = loso_evaluate(vectors, ratings, names, alpha=1.0)
    assert np.all(np.isfinite(report.predicted))


def test_lodo_realizable_and_guards():
    rng = np.random.default_rng(9)
    names = ["N(AA)"]
    x = rng.uniform(0, 1, 16)
    y = np.clip(1.0 + 5.0 * x, 1.0, 7.0)
    vectors = vectors_from_matrix(x.reshape(-1, 1), names)
    ratings = ratings_for(y)
    manifest = manifest_for(["PD", "ALS", "HD", "A"] * 4)
    report = lodo_evaluate(vectors, ratings, manifest, "PD", names, alpha=1e-8)
    assert report.scheme == "lodo"
    assert report.held_out == "PD"
    assert report.mae <= 1e-3
    assert len(report.speaker_ids) == 4
    with pytest.raises(EmptyDiseaseGroupError):
        lodo_evaluate(vectors, ratings, manifest, "CLP", names)


def test_loso_lambda_sweep_picks_small_penalty_on_clean_linear_data():
    vectors, ratings, names = linear_setup()
    report = loso_evaluate(vectors, ratings, names,
                           sweep=(1e-8, 1e6))
    # exact linear target: every fold's inner CV must prefer the tiny penalty
    assert report.fold_lambdas == (1e-8,) * 12
    assert report.mae <= 1e-3


def test_lodo_lambda_sweep_records_choice():
    rng = np.random.default_rng(13)
    names = ["N(AA)"]
    x = rng.uniform(0, 1, 12)
    y = np.clip(1.0 + 5.0 * x, 1.0, 7.0)
    vectors = vectors_from_matrix(x.reshape(-1, 1), names)
    ratings = ratings_for(y)
    manifest = manifest_for(["PD", "ALS", "HD"] * 4)
    report = lodo_evaluate(vectors, ratings, manifest, "PD", names,
                           sweep=(1e-8, 1e6))
    assert report.fold_lambdas == (1e-8,)
    assert report.mae <= 1e-3


def test_lodo_matches_loso_when_diseases_identical():
    # two diseases drawn from one distribution: LODO PCC should sit near
    # the pooled LOSO PCC
    rng = np.random.default_rng(10)
    n = 40
    x = rng.uniform(0, 1, n)
    y = np.clip(1.5 + 4.5 * x + rng.normal(0, 0.35, n), 1.0, 7.0)
    names = ["N(AA)"]
    vectors = vectors_from_matrix(x.reshape(-1, 1), names)
    ratings = ratings_for(y)
    manifest = manifest_for(["PD", "ALS"] * (n // 2))
    loso = loso_evaluate(vectors, ratings, names, alpha=1.0)
    lodo = lodo_evaluate(vectors, ratings, manifest, "PD", names, alpha=1.0)
    assert abs(loso.pcc - lodo.pcc) < 0.1


# forward selection


def test_forward_select_finds_informative_feature():
    rng = np.random.default_rng(11)
    n = 14
    informative = rng.uniform(0, 1, n)
    X = np.column_stack([
        informative,
        rng.normal(0, 1, n),
        rng.normal(0, 1, n),
        rng.normal(0, 1, n),
    ])
    y = np.clip(1.0 + 6.0 * informative, 1.0, 7.0)
    names = ["N(AA)", "N(IY)", "N(B)", "N(D)"]
    vectors = vectors_from_matrix(X, names)
    ratings = ratings_for(y)
    trace = forward_select(vectors, ratings, names, alpha=1e-8)
    assert trace[0].feature == "N(AA)"
    assert len(trace) <= 2
    mses = [step.mse for step in trace]
    assert all(b < a for a, b in zip(mses, mses[1:]))


def test_forward_select_duplicate_column_tie_breaks_low_index():
    # identical columns give bitwise-equal fold MSEs at step 1; the tie
    # must resolve to the lower column index. (With alpha > 0 the second
    # copy can still be admitted later: weight-splitting across duplicates
    # halves the ridge penalty, a genuine strict MSE decrease.)
    rng = np.random.default_rng(12)
    n = 12
    x = rng.uniform(0, 1, n)
    X = np.column_stack([x, x])
    y = np.clip(1.0 + 5.0 * x, 1.0, 7.0)
    names = ["N(AA)", "N(IY)"]
    vectors = vectors_from_matrix(X, names)
    trace = forward_select(vectors, ratings_for(y), names, alpha=1e-6)
    assert trace[0].feature == "N(AA)"
    mses = [step.mse for step in trace]
    assert all(b < a for a, b in zip(mses, mses[1:]))


def test_eval_report_serialization(tmp_path):
    vectors, ratings, names = linear_setup()
    report = loso_evaluate(vectors, ratings, names, alpha=1.0)
    from nap.regression import write_report_csv, write_report_json
    write_report_json(report, tmp_path / "report.json")
    write_report_csv(report, tmp_path / "report.csv")
    import json
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["scheme"] == "loso"
    assert len(data["per_speaker"]) == len(report.speaker_ids)
    lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert lines[0] == "speaker_id,actual,predicted"
    assert len(lines) == 1 + len(report.speaker_ids)
