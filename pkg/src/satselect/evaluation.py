"""Portfolio metrics, cross-validation, learning curves and synthetic data."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import forest
from .active import ActiveConfig, QueryStrategy, RuntimeOracle, run_active_loop
from .data import DEFAULT_CUTOFF_S, LabeledDataset, best_solver_indices, format_float
from .exceptions import ValidationError
from .preprocess import fit_transform_fold, prepare_features
from .seeding import child_seed, stream

log = logging.getLogger(__name__)

LENIENT_S = 5.0


@dataclass
class MetricsReport:
    """acc / mes / acc5 of a set of solver picks against the virtual best solver.

    ``mes_pct`` is a fraction of ``vbs_avg_s`` (0.17 means 17%).
    """

    acc: float
    mes_sec: float
    mes_pct: float
    acc5: float
    vbs_avg_s: float
    n: int
    folds: List["MetricsReport"] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["folds"] = [f.to_dict() for f in self.folds]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self, model: str = "RF") -> str:
        """Plain-text table in the acc / mes (sec) / mes% / acc5 layout."""
        header = f"{'Model':<8}{'acc':>8}{'mes (sec)':>12}{'mes%':>8}{'acc5':>8}"
        row = (f"{model:<8}{self.acc:>8.1%}{self.mes_sec:>12.1f}"
               f"{self.mes_pct:>8.1%}{self.acc5:>8.1%}")
        return f"{header}\n{row}\nVBS average runtime {self.vbs_avg_s:.1f} s over {self.n} instances\n"


def compute_metrics(predictions: Sequence[int], runtimes: np.ndarray,
                    lenient_s: float = LENIENT_S) -> MetricsReport:
    """Score solver picks with per-instance runtimes.

    A pick is correct when it achieves the row minimum, so any tied-best
    solver counts. ``mes_sec`` is the mean regret ``runtime[pick] - min``.
    """
    rt = np.asarray(runtimes, dtype=float)
    pred = np.asarray(predictions, dtype=np.int64)
    if rt.ndim != 2 or len(rt) == 0:
        raise ValidationError("need a non-empty instances x solvers runtime array")
    if pred.shape != (len(rt),):
        raise ValidationError("one prediction per instance required")
    if (pred < 0).any() or (pred >= rt.shape[1]).any():
        raise ValidationError("prediction outside portfolio range")
    best = rt.min(axis=1)
    chosen = rt[np.arange(len(rt)), pred]
    regret = chosen - best
    vbs_avg = float(best.sum() / len(best))
    mes = float(regret.mean())
    return MetricsReport(
        acc=float(np.mean(chosen == best)),
        mes_sec=mes,
        mes_pct=mes / vbs_avg if vbs_avg > 0 else 0.0,
        acc5=float(np.mean(regret <= lenient_s)),
        vbs_avg_s=vbs_avg,
        n=len(rt),
    )


def fold_assignment(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold index per instance after a seeded shuffle.

    Stratified (round-robin within label order) when every present label has
    at least ``folds`` members, else contiguous blocks. Fold sizes differ by at
    most one either way.
    """
    y = np.asarray(y)
    n = len(y)
    perm = stream(seed, "fold").permutation(n)
    _, counts = np.unique(y, return_counts=True)
    if (counts >= folds).all():
        perm = perm[np.argsort(y[perm], kind="stable")]
        assign_sorted = np.arange(n) % folds
    else:
        assign_sorted = np.concatenate(
            [np.full(len(b), f) for f, b in enumerate(np.array_split(np.arange(n), folds))])
    assign = np.empty(n, dtype=np.int64)
    assign[perm] = assign_sorted
    return assign


def kfold_cv(d: LabeledDataset, cfg: Optional[forest.ForestConfig] = None, folds: int = 10,
             seed: int = 0, k_neighbors: int = 3) -> MetricsReport:
    """k-fold cross-validated forest metrics, averaged unweighted over folds.

    Constant-feature screening, standardization and imputation are fitted on
    the training folds only. ``d.X`` may contain missing values.
    """
    if folds < 2:
        raise ValidationError("need at least two folds")
    if len(d) < folds:
        raise ValidationError(f"{len(d)} instances cannot fill {folds} folds")
    cfg = cfg or forest.ForestConfig()
    assign = fold_assignment(d.y, folds, seed)
    reports = []
    for f in range(folds):
        test = np.flatnonzero(assign == f)
        train = np.flatnonzero(assign != f)
        Z_train, Z_test = fit_transform_fold(d.X[train], d.X[test], k=k_neighbors)
        model = forest.fit(Z_train, d.y[train], cfg, n_classes=d.n_classes)
        reports.append(compute_metrics(model.predict(Z_test), d.runtimes[test]))
    acc = float(np.mean([r.acc for r in reports]))
    mes = float(np.mean([r.mes_sec for r in reports]))
    acc5 = float(np.mean([r.acc5 for r in reports]))
    vbs = float(np.mean([r.vbs_avg_s for r in reports]))
    return MetricsReport(acc, mes, mes / vbs if vbs > 0 else 0.0, acc5, vbs, len(d), reports)


@dataclass
class LearningCurvePoint:
    strategy: QueryStrategy
    train_size: int
    test_size: int
    acc: float
    seed: int


def learning_curve(d: LabeledDataset, strategies: Iterable, cfg: ActiveConfig,
                   forest_cfg: Optional[forest.ForestConfig] = None, test_fraction: float = 0.2,
                   seeds: Sequence[int] = (0,), k_neighbors: int = 3) -> List[LearningCurvePoint]:
    """Test accuracy after every refit of the active loop, per strategy and seed.

    For each seed a fixed holdout is split off; the remaining pool is shared
    by all strategies (including B0). Preprocessing uses the features of all
    instances, never their labels.
    """
    if not 0 < test_fraction < 1:
        raise ValidationError("test_fraction must lie in (0, 1)")
    forest_cfg = forest_cfg or forest.ForestConfig()
    strategies = [QueryStrategy(s) for s in strategies]
    Z, _ = prepare_features(d.features, k=k_neighbors)
    n = len(d)
    n_test = int(round(test_fraction * n))
    points = []
    for s in seeds:
        perm = stream(s, "holdout").permutation(n)
        test, pool = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        eval_set = (Z.values[test], d.y[test], d.runtimes[test])
        pool_ids = [d.instance_ids[i] for i in pool]
        fcfg = replace(forest_cfg, seed=child_seed(s, "forest"))
        for strat in strategies:
            oracle = RuntimeOracle(pool_ids, d.runtimes[pool])
            _, qlog = run_active_loop(pool_ids, Z.values[pool], oracle,
                                      replace(cfg, strategy=strat, seed=s), fcfg,
                                      n_classes=d.n_classes, eval_set=eval_set)
            points += [LearningCurvePoint(strat, r.train_size, n_test, r.test_acc, s)
                       for r in qlog.records]
    return points


def curve_csv(points: Sequence[LearningCurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "seed", "train_size", "test_acc"])
    for p in points:
        w.writerow([QueryStrategy(p.strategy).value, p.seed, p.train_size, format_float(p.acc)])
    return buf.getvalue()


def mean_curves(points: Sequence[LearningCurvePoint]) -> dict:
    """``{strategy: {train_size: mean accuracy over seeds}}``."""
    acc = {}
    for p in points:
        acc.setdefault(QueryStrategy(p.strategy), {}).setdefault(p.train_size, []).append(p.acc)
    return {s: {t: float(np.mean(v)) for t, v in sorted(by.items())} for s, by in acc.items()}


def synthetic_dataset(n: int, k: int, C: int, separation: float, missing_rate: float = 0.0,
                      runtime_scale: float = 10.0, seed: int = 0, return_complete: bool = False):
    """Clustered stand-in for a solver-runtime dataset.

    Solver ``j`` owns the cluster centred at ``separation * e_j``. Each
    instance is a centre plus unit Gaussian noise; solver ``j`` takes
    ``runtime_scale * (1 + distance to centre j)`` seconds plus a small
    positive jitter, so the owner of the nearest centre is almost always
    fastest. Labels are recomputed from the runtimes. Exactly
    ``round(missing_rate * n * k)`` cells are then masked uniformly.

    With ``return_complete`` the unmasked feature matrix is returned too.
    """
    if not n >= C >= 2:
        raise ValidationError("need n >= C >= 2")
    if k < C:
        raise ValidationError("need at least as many features as solvers (k >= C)")
    if separation < 0 or runtime_scale <= 0:
        raise ValidationError("separation must be >= 0 and runtime_scale > 0")
    if not 0 <= missing_rate < 1:
        raise ValidationError("missing_rate must lie in [0, 1)")
    rng = stream(seed, "synthetic")
    centers = separation * np.eye(C, k)
    owner = rng.integers(0, C, size=n)
    X = centers[owner] + rng.standard_normal((n, k))
    dist = np.linalg.norm(X[:, None, :] - centers[None, :, :], axis=2)
    runtimes = runtime_scale * (1.0 + dist) + rng.exponential(1e-3 * runtime_scale, size=(n, C))
    y = best_solver_indices(runtimes)
    complete = X.copy()
    n_missing = int(round(missing_rate * n * k))
    cells = rng.choice(n * k, size=n_missing, replace=False)
    X.reshape(-1)[cells] = np.nan
    ds = LabeledDataset(
        [f"syn{i:05d}" for i in range(n)], [f"f{j:02d}" for j in range(k)], X, y, runtimes,
        [f"solver{j}" for j in range(C)], max(DEFAULT_CUTOFF_S, float(runtimes.max())),
    )
    return (ds, complete) if return_complete else ds
