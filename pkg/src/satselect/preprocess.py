"""Cleaning of the feature matrix before learning.

The fixed pipeline is::

    drop constant features -> drop trivial instances -> standardize -> k-NN impute

followed by a re-standardization of the completed matrix, which makes the
pipeline idempotent (running it on its own output is a no-op). Every step
uses the sample standard deviation (``ddof=1``).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .data import FeatureMatrix, LabeledDataset
from .exceptions import ValidationError

log = logging.getLogger(__name__)

TRIVIAL_THRESHOLD_S = 0.01


@dataclass
class PreprocessReport:
    dropped_features: List[str] = field(default_factory=list)
    dropped_instances: List[Tuple[str, str]] = field(default_factory=list)
    imputed_cells: int = 0
    total_cells: int = 0

    @property
    def imputed_fraction(self) -> float:
        return self.imputed_cells / self.total_cells if self.total_cells else 0.0

    def to_dict(self) -> dict:
        return {
            "dropped_features": list(self.dropped_features),
            "dropped_instances": [{"id": i, "reason": r} for i, r in self.dropped_instances],
            "imputed_cells": int(self.imputed_cells),
            "imputed_fraction": self.imputed_fraction,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.mean):
            raise ValidationError(
                f"standardizer fitted on {len(self.mean)} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std


def _values(f: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    return f.values if isinstance(f, FeatureMatrix) else np.asarray(f, dtype=float)


def constant_feature_mask(X: np.ndarray) -> np.ndarray:
    """True for columns with no observed value or a single distinct observed value."""
    observed = ~np.isnan(X)
    has_any = observed.any(axis=0)
    lo = np.where(observed, X, np.inf).min(axis=0)
    hi = np.where(observed, X, -np.inf).max(axis=0)
    return ~has_any | (lo == hi)


def drop_constant_features(f: FeatureMatrix) -> Tuple[FeatureMatrix, List[str]]:
    """Remove features whose observed values have zero spread (or none observed)."""
    drop = constant_feature_mask(f.values)
    if drop.all():
        raise ValidationError("every feature is constant or missing")
    keep = np.flatnonzero(~drop)
    dropped = [f.feature_names[j] for j in np.flatnonzero(drop)]
    return f.select_features(keep), dropped


def _row_std(runtimes: np.ndarray) -> np.ndarray:
    if runtimes.shape[1] < 2:
        return np.zeros(len(runtimes))
    return runtimes.std(axis=1, ddof=1)


def drop_trivial_instances(d: LabeledDataset, threshold_s: float = TRIVIAL_THRESHOLD_S
                           ) -> Tuple[LabeledDataset, List[Tuple[str, str]]]:
    """Drop instances whose runtime mean AND standard deviation are below ``threshold_s``."""
    mean = d.runtimes.mean(axis=1)
    trivial = (mean < threshold_s) & (_row_std(d.runtimes) < threshold_s)
    if trivial.all():
        raise ValidationError("every instance is trivial")
    dropped = [(d.instance_ids[i], f"mean runtime {mean[i]:.6g} s below {threshold_s:g} s")
               for i in np.flatnonzero(trivial)]
    return d.subset(np.flatnonzero(~trivial)), dropped


def fit_standardizer(f: Union[FeatureMatrix, np.ndarray]) -> Standardizer:
    """Per-feature mean and sample std over observed cells."""
    X = _values(f)
    counts = (~np.isnan(X)).sum(axis=0)
    if (counts < 2).any():
        bad = np.flatnonzero(counts < 2).tolist()
        raise ValidationError(f"features {bad} have fewer than two observed values")
    mean = np.nanmean(X, axis=0)
    std = np.nanstd(X, axis=0, ddof=1)
    if (std == 0).any():
        bad = np.flatnonzero(std == 0).tolist()
        raise ValidationError(f"features {bad} have zero spread; drop constant features first")
    return Standardizer(mean, std)


def apply_standardizer(s: Standardizer, f: Union[FeatureMatrix, np.ndarray]):
    """Standardize ``f``; missing cells stay missing. Returns the same kind as given."""
    Z = s.apply(_values(f))
    return f.with_values(Z) if isinstance(f, FeatureMatrix) else Z


def knn_impute(X: Union[FeatureMatrix, np.ndarray], k: int = 3,
               reference: Optional[np.ndarray] = None):
    """Fill missing cells with the mean of the k nearest rows observing the feature.

    The distance between two rows is the Euclidean distance over the features
    both of them observe, divided by the square root of how many features
    that is. Rows sharing no observed feature are never neighbours. Fewer
    than ``k`` usable neighbours: use those available; none: use the
    feature's observed mean in ``reference`` (0 if it has none). Distance
    ties keep reference row order. Imputation is one-shot: neighbours are
    always read from the un-imputed reference.

    Parameters
    ----------
    X : FeatureMatrix or ndarray
        Standardized matrix with NaN for missing cells.
    k : int
        Number of neighbours.
    reference : ndarray, optional
        Rows that may serve as neighbours (e.g. a training fold when ``X``
        is a test fold). Defaults to ``X`` itself.

    Returns
    -------
    (imputed, count)
        Completed matrix (same kind as ``X``) and the number of cells filled.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    values = _values(X)
    R = values if reference is None else np.asarray(reference, dtype=float)
    if R.shape[1] != values.shape[1]:
        raise ValidationError("reference has a different number of features")
    out = values.copy()
    missing = np.isnan(values)
    ref_obs = ~np.isnan(R)
    R0 = np.where(ref_obs, R, 0.0)
    counts = ref_obs.sum(axis=0)
    col_mean = np.divide(R0.sum(axis=0), counts, out=np.zeros(R.shape[1]), where=counts > 0)

    for i in np.flatnonzero(missing.any(axis=1)):
        obs_i = ~missing[i]
        shared = ref_obs & obs_i
        n_shared = shared.sum(axis=1)
        diff = np.where(shared, R0 - np.where(obs_i, values[i], 0.0), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            dist = np.sqrt((diff * diff).sum(axis=1) / n_shared)
        dist[n_shared == 0] = np.inf
        order = np.argsort(dist, kind="stable")
        for j in np.flatnonzero(missing[i]):
            cand = order[ref_obs[order, j] & np.isfinite(dist[order])][:k]
            out[i, j] = R[cand, j].mean() if len(cand) else col_mean[j]
    count = int(missing.sum())
    return (X.with_values(out) if isinstance(X, FeatureMatrix) else out), count


def prepare_features(f: FeatureMatrix, k: int = 3, report: Optional[PreprocessReport] = None
                     ) -> Tuple[FeatureMatrix, PreprocessReport]:
    """Feature-only part of the pipeline: drop constants, standardize, impute."""
    report = report if report is not None else PreprocessReport()
    f, dropped = drop_constant_features(f)
    report.dropped_features.extend(dropped)
    Z = apply_standardizer(fit_standardizer(f), f)
    Z, count = knn_impute(Z, k=k)
    report.imputed_cells += count
    report.total_cells += Z.values.size
    # completed matrix is re-standardized so a second pass is the identity
    Z = apply_standardizer(fit_standardizer(Z), Z)
    return Z, report


def preprocess(d: LabeledDataset, k: int = 3, threshold_s: float = TRIVIAL_THRESHOLD_S
               ) -> Tuple[LabeledDataset, PreprocessReport]:
    """Run the full cleaning pipeline on a labeled dataset."""
    report = PreprocessReport()
    f, dropped = drop_constant_features(d.features)
    report.dropped_features.extend(dropped)
    d = d.with_features(f.feature_names, f.values)
    d, dropped_rows = drop_trivial_instances(d, threshold_s)
    report.dropped_instances.extend(dropped_rows)
    # a column can become constant once trivial rows are gone
    f, dropped = drop_constant_features(d.features)
    report.dropped_features.extend(dropped)
    Z, report = prepare_features(f, k=k, report=report)
    return d.with_features(Z.feature_names, Z.values), report


def fit_transform_fold(X_train: np.ndarray, X_test: np.ndarray, k: int = 3
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """Preprocess a train/test split using statistics of the training rows only."""
    keep = np.flatnonzero(~constant_feature_mask(X_train))
    if len(keep) == 0:
        # nothing to split on; a single constant column keeps the forest usable
        log.warning("every feature is constant on %d training rows", len(X_train))
        return np.zeros((len(X_train), 1)), np.zeros((len(X_test), 1))
    X_train, X_test = X_train[:, keep], X_test[:, keep]
    s = fit_standardizer(X_train)
    Z_train, Z_test = s.apply(X_train), s.apply(X_test)
    Z_test, _ = knn_impute(Z_test, k=k, reference=Z_train)
    Z_train, _ = knn_impute(Z_train, k=k)
    return Z_train, Z_test
