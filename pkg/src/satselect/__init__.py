"""Algorithm selection for SAT solver portfolios with active learning.

A random forest predicts the fastest solver of a portfolio from instance
features; pool-based uncertainty sampling decides which instances are worth
the cost of running every solver to obtain their label.

>>> from satselect import evaluation, active
>>> d = evaluation.synthetic_dataset(200, 10, 3, separation=6.0, seed=1)
>>> report = evaluation.kfold_cv(d, folds=5)
"""

__version__ = "0.1.0"

from .active import (ActiveConfig, QueryLog, QueryStrategy, RuntimeOracle, run_active_loop,
                     score, select_batch)
from .data import (PRESETS, FeatureMatrix, LabeledDataset, Portfolio, RuntimeMatrix, join,
                   label_best_solver, load_features, load_runtimes, slice_portfolio, vbs_stats)
from .evaluation import (MetricsReport, compute_metrics, kfold_cv, learning_curve,
                         synthetic_dataset)
from .exceptions import ParseError, ValidationError
from .features import CnfFormula, extract_features, parse_dimacs
from .forest import ForestConfig, RandomForestModel, entropy, fit
from .preprocess import PreprocessReport, knn_impute, preprocess

__all__ = [
    "ActiveConfig", "CnfFormula", "FeatureMatrix", "ForestConfig", "LabeledDataset",
    "MetricsReport", "PRESETS", "ParseError", "Portfolio", "PreprocessReport", "QueryLog",
    "QueryStrategy", "RandomForestModel", "RuntimeMatrix", "RuntimeOracle", "ValidationError",
    "compute_metrics", "entropy", "extract_features", "fit", "join", "kfold_cv",
    "knn_impute", "label_best_solver", "learning_curve", "load_features", "load_runtimes",
    "parse_dimacs", "preprocess", "run_active_loop", "score", "select_batch",
    "slice_portfolio", "synthetic_dataset", "vbs_stats",
]
