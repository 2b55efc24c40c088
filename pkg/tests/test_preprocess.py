import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import knn_impute_bruteforce
from satselect.data import FeatureMatrix, LabeledDataset
from satselect.evaluation import synthetic_dataset
from satselect.exceptions import ValidationError
from satselect.preprocess import (PreprocessReport, apply_standardizer, drop_constant_features,
                                  drop_trivial_instances, fit_standardizer, fit_transform_fold,
                                  knn_impute, preprocess)


def _fm(columns):
    X = np.array(columns, dtype=float).T
    return FeatureMatrix([f"i{k}" for k in range(len(X))],
                         [f"f{j}" for j in range(X.shape[1])], X)


def test_drop_constant_features():
    f = _fm([[5, 5, 5], [1, 1, 2], [np.nan, np.nan, np.nan], [np.nan, 3, 3]])
    kept, dropped = drop_constant_features(f)
    assert kept.feature_names == ("f1",)
    assert dropped == ["f0", "f2", "f3"]
    with pytest.raises(ValidationError):
        drop_constant_features(_fm([[1, 1, 1]]))


def _ds(runtimes):
    rt = np.array(runtimes, dtype=float)
    n = len(rt)
    return LabeledDataset([f"i{k}" for k in range(n)], ["f"], np.arange(n, dtype=float)[:, None],
                          rt.argmin(axis=1), rt, [f"s{j}" for j in range(rt.shape[1])])


def test_drop_trivial_instances():
    d = _ds([[0.005, 0.004, 0.006], [0.005, 500, 0.006], [3, 4, 5]])
    kept, dropped = drop_trivial_instances(d)
    assert kept.instance_ids == ("i1", "i2")
    assert [i for i, _ in dropped] == ["i0"]
    with pytest.raises(ValidationError):
        drop_trivial_instances(_ds([[0.001, 0.001]]))


def test_standardize_two_values_uses_sample_std():
    f = _fm([[2, 4]])
    s = fit_standardizer(f)
    z = apply_standardizer(s, f).values[:, 0]
    # mean 3, sample std sqrt(2)
    np.testing.assert_allclose(z, [-1 / math.sqrt(2), 1 / math.sqrt(2)], rtol=0, atol=1e-15)


def test_standardize_properties():
    rng = np.random.default_rng(3)
    X = rng.normal(5, 3, size=(50, 4))
    X[rng.random(X.shape) < 0.2] = np.nan
    Z = apply_standardizer(fit_standardizer(X), X)
    assert np.array_equal(np.isnan(Z), np.isnan(X))
    np.testing.assert_allclose(np.nanmean(Z, axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(np.nanstd(Z, axis=0, ddof=1), 1, atol=1e-9)
    Z2 = apply_standardizer(fit_standardizer(Z), Z)
    np.testing.assert_allclose(Z2, Z, atol=1e-9)


def test_standardize_errors():
    with pytest.raises(ValidationError):
        fit_standardizer(np.array([[1.0], [1.0]]))
    with pytest.raises(ValidationError):
        fit_standardizer(np.array([[1.0], [np.nan]]))


def test_knn_worked_example():
    X = np.array([[0.0, np.nan], [0.1, 2.0], [5.0, -1.0]])
    out, count = knn_impute(X, k=1)
    assert out[0, 1] == 2.0
    assert count == 1


def test_knn_identity_without_missing():
    X = np.arange(6, dtype=float).reshape(3, 2)
    out, count = knn_impute(X, k=3)
    assert count == 0
    np.testing.assert_array_equal(out, X)


def test_knn_column_mean_fallback():
    # the only row observing f1 shares no observed feature with the others
    X = np.array([[np.nan, 4.0], [1.0, np.nan], [-1.0, np.nan]])
    out, count = knn_impute(X, k=3)
    assert count == 3
    # f1 observed only in row 0 -> mean 4; f0 observed in rows 1,2 -> mean 0
    assert out[1, 1] == 4.0 and out[2, 1] == 4.0
    assert out[0, 0] == 0.0
    out, _ = knn_impute(np.array([[np.nan, 1.0], [np.nan, 2.0]]))
    assert out[:, 0].tolist() == [0.0, 0.0]


def test_knn_rejects_bad_k():
    with pytest.raises(ValidationError):
        knn_impute(np.zeros((2, 2)), k=0)


cells = st.one_of(st.none(), st.integers(-4, 4).map(lambda v: v / 2))


@given(st.integers(2, 7).flatmap(
    lambda n: st.lists(st.lists(cells, min_size=3, max_size=3), min_size=n, max_size=n)),
    st.integers(1, 4))
@settings(max_examples=200, deadline=None)
def test_knn_matches_bruteforce(rows, k):
    X = np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float)
    out, count = knn_impute(X, k=k)
    expected = knn_impute_bruteforce(rows, k)
    np.testing.assert_allclose(out, np.array(expected, dtype=float), rtol=0, atol=1e-12)
    assert not np.isnan(out).any()
    assert count == int(np.isnan(X).sum())
    # imputed values are means of observed values, hence within their range
    for j in range(X.shape[1]):
        obs = X[~np.isnan(X[:, j]), j]
        if len(obs):
            assert obs.min() - 1e-12 <= out[:, j].min() and out[:, j].max() <= obs.max() + 1e-12


def test_knn_reference_rows():
    ref = np.array([[0.0, 1.0], [10.0, 5.0]])
    out, _ = knn_impute(np.array([[9.0, np.nan]]), k=1, reference=ref)
    assert out[0, 1] == 5.0


def correlated_matrix(seed, n=300, k=12, rank=3, noise=0.3):
    """Low-rank matrix plus noise: every column is predictable from the others."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, rank)) @ rng.standard_normal((rank, k)) \
        + noise * rng.standard_normal((n, k))


def imputation_rmse(Z, rate, seed, k=3):
    """(kNN RMSE, column-mean RMSE) over a uniformly masked fraction of cells."""
    rng = np.random.default_rng(seed + 1000)
    mask = np.zeros(Z.size, dtype=bool)
    mask[rng.choice(Z.size, int(round(rate * Z.size)), replace=False)] = True
    mask = mask.reshape(Z.shape)
    masked = np.where(mask, np.nan, Z)
    out, _ = knn_impute(masked, k=k)
    col_mean = np.broadcast_to(np.nanmean(masked, axis=0), Z.shape)
    rmse = lambda v: float(np.sqrt(np.mean((v[mask] - Z[mask]) ** 2)))
    return rmse(out), rmse(col_mean)


def test_knn_beats_mean_imputation():
    # one-hot cluster data is a poor probe here: a masked cluster column leaves
    # the row looking like background, so the matrix must be correlated
    wins = 0
    for seed in range(10):
        X = correlated_matrix(seed)
        knn, mean = imputation_rmse(fit_standardizer(X).apply(X), 0.13, seed)
        wins += knn < mean
    assert wins >= 8


def test_pipeline_report_and_idempotence():
    d = synthetic_dataset(120, 6, 3, separation=4.0, missing_rate=0.13, seed=5)
    X = d.X.copy()
    X[:, 2] = 7.0                               # constant column
    rt = d.runtimes.copy()
    rt[0] = [0.002, 0.003, 0.001]               # trivial instance
    d = LabeledDataset(d.instance_ids, d.feature_names, X, rt.argmin(axis=1), rt, d.solver_names)
    out, report = preprocess(d, k=3)
    assert report.dropped_features == ["f02"]
    assert [i for i, _ in report.dropped_instances] == ["syn00000"]
    assert not np.isnan(out.X).any()
    assert report.imputed_fraction == pytest.approx(report.imputed_cells / out.X.size)
    again, report2 = preprocess(out, k=3)
    np.testing.assert_allclose(again.X, out.X, rtol=0, atol=1e-9)
    assert report2.imputed_cells == 0 and report2.dropped_features == []
    payload = json.loads(report.to_json())
    assert set(payload) == {"dropped_features", "dropped_instances", "imputed_cells",
                            "imputed_fraction"}
    assert payload["dropped_instances"][0]["id"] == "syn00000"


def test_synthetic_missing_rate_reported():
    d = synthetic_dataset(600, 20, 3, separation=6.0, missing_rate=0.13, seed=1)
    _, report = preprocess(d)
    assert report.imputed_fraction == pytest.approx(0.13, abs=0.01)


def test_fold_transform_uses_training_statistics():
    X_train = np.array([[0.0, 1.0], [2.0, 1.0], [4.0, 1.0]])
    X_test = np.array([[2.0, 9.0], [np.nan, 9.0]])
    Z_train, Z_test = fit_transform_fold(X_train, X_test, k=1)
    assert Z_train.shape == (3, 1)               # constant column dropped
    np.testing.assert_allclose(Z_train[:, 0], [-1, 0, 1])
    assert Z_test[0, 0] == 0.0
    assert not np.isnan(Z_test).any()
