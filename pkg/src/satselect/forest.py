"""Random forest classifier grown on entropy (information) gain.

Each tree is trained on a bootstrap sample of the rows and a random subset
of the features (drawn once per tree by default). A tree predicts the class
frequencies of the leaf a row falls into; the forest averages those
distributions uniformly over its trees.

Trees are stored as flat arrays (``feature == -1`` marks a leaf) so that
routing many rows at once is a handful of numpy operations per level.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .exceptions import ValidationError
from .seeding import stream

GAIN_EPS = 1e-12    # gains at or below this count as zero
TIE_EPS = 1e-12     # gains within this of the best are ties


def entropy(dist) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    p = np.asarray(dist, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def default_subset_size(k: int) -> int:
    """``floor(log2 k) + 1`` features per tree, capped at ``k``."""
    if k < 1:
        raise ValidationError("need at least one feature")
    return min(k, int(math.floor(math.log2(k))) + 1)


def _midpoint(a: float, b: float) -> float:
    mid = a + (b - a) / 2.0
    # adjacent floats: the midpoint may round up onto b
    return mid if mid < b else a


@njit(cache=True)
def _split_gains(Xs, y, n_classes, min_leaf):
    """Gain of every (threshold position, feature) pair; -inf where invalid."""
    m, f = Xs.shape
    total = np.zeros(n_classes)
    for i in range(m):
        total[y[i]] += 1.0
    parent = 0.0
    for c in range(n_classes):
        if total[c] > 0:
            p = total[c] / m
            parent -= p * np.log2(p)
    gains = np.full((m - 1, f), -np.inf)
    xs = np.empty((m, f))
    left = np.zeros(n_classes)
    for j in range(f):
        order = np.argsort(Xs[:, j], kind="mergesort")
        for i in range(m):
            xs[i, j] = Xs[order[i], j]
        left[:] = 0.0
        for pos in range(m - 1):
            left[y[order[pos]]] += 1.0
            nl = pos + 1.0
            nr = m - nl
            if not (xs[pos + 1, j] > xs[pos, j]) or nl < min_leaf or nr < min_leaf:
                continue
            hl = 0.0
            hr = 0.0
            for c in range(n_classes):
                if left[c] > 0:
                    p = left[c] / nl
                    hl -= p * np.log2(p)
                rc = total[c] - left[c]
                if rc > 0:
                    p = rc / nr
                    hr -= p * np.log2(p)
            gains[pos, j] = parent - (nl * hl + nr * hr) / m
    return gains, xs


def best_split(X: np.ndarray, y: np.ndarray, candidate_features: Sequence[int],
               n_classes: Optional[int] = None, min_leaf: int = 1
               ) -> Optional[Tuple[int, float, float]]:
    """Find the ``(feature, threshold, gain)`` maximising entropy gain.

    Thresholds are midpoints between consecutive distinct values; rows with
    ``x[feature] <= threshold`` go left. Ties prefer the lower feature index,
    then the lower threshold. Returns None for pure nodes or when no split
    has positive gain.
    """
    y = np.asarray(y, dtype=np.int64)
    m = len(y)
    if m < 2 or m < 2 * min_leaf:
        return None
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if (np.bincount(y, minlength=C) == m).any():
        return None
    feats = np.unique(np.asarray(candidate_features, dtype=np.int64))
    if len(feats) == 0:
        return None
    choice = _pick(*_split_gains(np.ascontiguousarray(X[:, feats], dtype=float), y, C, min_leaf))
    if choice is None:
        return None
    fi, threshold, gain = choice
    return int(feats[fi]), threshold, gain


def _pick(gains, xs):
    """Resolve the best (column, threshold, gain) from a gain table."""
    best = gains.max()
    if best <= GAIN_EPS:
        return None
    # feature-major scan: first tie is lowest feature, then lowest threshold
    fi, pos = np.unravel_index(np.argmax((gains >= best - TIE_EPS).T), gains.T.shape)
    return int(fi), float(_midpoint(xs[pos, fi], xs[pos + 1, fi])), float(gains[pos, fi])


@dataclass
class ForestConfig:
    n_trees: int = 99
    feature_subset_size: Optional[int] = None   # None: floor(log2 k) + 1
    bootstrap: bool = True
    min_leaf: int = 1
    max_depth: Optional[int] = None
    seed: int = 0
    per_node_features: bool = False

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be at least 1")
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be at least 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValidationError("max_depth must be non-negative")

    def subset_size(self, k: int) -> int:
        size = self.feature_subset_size or default_subset_size(k)
        if not 1 <= size <= k:
            raise ValidationError(f"feature_subset_size {size} outside [1, {k}]")
        return size


class Tree:
    """A fitted decision tree in flat-array form."""

    def __init__(self, feature, threshold, left, right, value, count):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.count = np.asarray(count, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row of ``X`` lands in."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            active = np.flatnonzero(f >= 0)
            if len(active) == 0:
                return node
            cur = node[active]
            go_left = X[active, f[active]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": self.value[node].tolist(), "count": int(self.count[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, root: dict, n_classes: int) -> "Tree":
        feature, threshold, left, right, value, count = [], [], [], [], [], []

        def alloc(node):
            leaf = "leaf" in node
            feature.append(-1 if leaf else node["feature"])
            threshold.append(0.0 if leaf else node["threshold"])
            left.append(-1)
            right.append(-1)
            value.append(node["leaf"] if leaf else [0.0] * n_classes)
            count.append(node["count"] if leaf else 0)
            return len(feature) - 1

        # children get consecutive ids and the left subtree is expanded first,
        # matching the numbering produced by grow_tree
        stack = [(alloc(root), root)]
        while stack:
            i, node = stack.pop()
            if "leaf" in node:
                continue
            left[i], right[i] = alloc(node["left"]), alloc(node["right"])
            stack.append((right[i], node["right"]))
            stack.append((left[i], node["left"]))
        return cls(feature, threshold, left, right, value, count)

    def same_as(self, other: "Tree") -> bool:
        return all(np.array_equal(getattr(self, a), getattr(other, a))
                   for a in ("feature", "threshold", "left", "right", "value", "count"))


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, features: Sequence[int],
              min_leaf: int = 1, max_depth: Optional[int] = None,
              rng: Optional[np.random.Generator] = None, node_subset: Optional[int] = None
              ) -> Tree:
    """Grow one tree by recursive best splits on ``features``.

    When ``node_subset`` is given, each node instead draws that many features
    from ``features`` using ``rng``.
    """
    features = np.unique(np.asarray(features, dtype=np.int64))
    Xf = np.ascontiguousarray(X[:, features], dtype=float)
    y = np.asarray(y, dtype=np.int64)
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(rows):
        counts = np.bincount(y[rows], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / len(rows))
        count.append(len(rows))
        return len(feature) - 1

    root_rows = np.arange(len(y))
    stack = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if (max_depth is not None and depth >= max_depth) or len(rows) < 2 * min_leaf \
                or value[node].max() == 1.0:
            continue
        if node_subset is None:
            cols = None
            sub = Xf[rows]
        else:
            cols = np.sort(rng.choice(len(features), size=node_subset, replace=False))
            sub = np.ascontiguousarray(Xf[rows][:, cols])
        choice = _pick(*_split_gains(sub, y[rows], n_classes, min_leaf))
        if choice is None:
            continue
        col, thr, _ = choice
        col = col if cols is None else int(cols[col])
        mask = Xf[rows, col] <= thr
        l_rows, r_rows = rows[mask], rows[~mask]
        feature[node], threshold[node] = int(features[col]), thr
        left[node] = new_node(l_rows)
        right[node] = new_node(r_rows)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], r_rows, depth + 1))
        stack.append((left[node], l_rows, depth + 1))
    tree = Tree(feature, threshold, left, right, value, count)
    internal = tree.feature >= 0
    tree.value[internal] = 0.0
    tree.count[internal] = 0
    return tree


def _fit_tree(X, y, n_classes, cfg: ForestConfig, t: int):
    rng = stream(cfg.seed, "tree", t)
    n, k = X.shape
    rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
    size = cfg.subset_size(k)
    if cfg.per_node_features:
        subset = np.arange(k)
        tree = grow_tree(X[rows], y[rows], n_classes, subset, cfg.min_leaf, cfg.max_depth,
                         rng=rng, node_subset=size)
    else:
        subset = np.sort(rng.choice(k, size=size, replace=False))
        tree = grow_tree(X[rows], y[rows], n_classes, subset, cfg.min_leaf, cfg.max_depth)
    return tree, subset


@dataclass
class RandomForestModel:
    trees: List[Tuple[Tree, np.ndarray]]
    config: ForestConfig
    n_classes: int
    n_features: int
    feature_names: Optional[List[str]] = None

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValidationError(f"model expects {self.n_features} features, got {X.shape[1]}")
        if np.isnan(X).any():
            raise ValidationError("cannot predict on rows with missing values")
        return X

    def predict_proba(self, X) -> np.ndarray:
        """Mean of the per-tree leaf distributions; one row per input row."""
        single = np.ndim(X) == 1
        X = self._check(X)
        total = np.zeros((len(X), self.n_classes))
        for tree, _ in self.trees:
            total += tree.predict_proba(X)
        proba = total / len(self.trees)
        return proba[0] if single else proba

    def predict(self, X) -> np.ndarray:
        """Most probable class; ties go to the lowest class index."""
        return np.argmax(self.predict_proba(X), axis=-1)

    def to_dict(self) -> dict:
        return {
            "format": "satselect.random_forest",
            "version": 1,
            "config": asdict(self.config),
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "feature_names": self.feature_names,
            "trees": [{"features": [int(j) for j in subset], "root": tree.to_dict()}
                      for tree, subset in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestModel":
        if d.get("format") != "satselect.random_forest":
            raise ValidationError("not a serialized satselect forest")
        C = d["n_classes"]
        trees = [(Tree.from_dict(t["root"], C), np.asarray(t["features"], dtype=np.int64))
                 for t in d["trees"]]
        return cls(trees, ForestConfig(**d["config"]), C, d["n_features"], d["feature_names"])

    @classmethod
    def from_json(cls, text: str) -> "RandomForestModel":
        return cls.from_dict(json.loads(text))

    def same_as(self, other: "RandomForestModel") -> bool:
        return (len(self.trees) == len(other.trees)
                and all(a.same_as(b) and np.array_equal(sa, sb)
                        for (a, sa), (b, sb) in zip(self.trees, other.trees)))


def fit(X, y, cfg: Optional[ForestConfig] = None, n_classes: Optional[int] = None,
        feature_names: Optional[Sequence[str]] = None, n_jobs: int = 1) -> RandomForestModel:
    """Train a random forest.

    Parameters
    ----------
    X : array (n, k)
        Complete (imputed) feature matrix.
    y : array (n,)
        Integer class labels.
    cfg : ForestConfig
    n_classes : int, optional
        Number of classes (portfolio size); defaults to ``max(y) + 1``. Classes
        absent from ``y`` simply get probability 0.
    n_jobs : int
        Trees are grown in parallel with joblib when not 1. The result does
        not depend on it: every tree has its own seeded stream.
    """
    cfg = cfg or ForestConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValidationError(f"need matching non-empty X and y, got {X.shape} and {y.shape}")
    if not np.isfinite(X).all():
        raise ValidationError("X must be complete and finite; impute first")
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if C < 2:
        raise ValidationError("need at least two classes")
    if y.min() < 0 or y.max() >= C:
        raise ValidationError("label outside [0, n_classes)")
    cfg.subset_size(X.shape[1])
    if n_jobs == 1:
        trees = [_fit_tree(X, y, C, cfg, t) for t in range(cfg.n_trees)]
    else:
        from joblib import Parallel, delayed
        trees = Parallel(n_jobs=n_jobs)(delayed(_fit_tree)(X, y, C, cfg, t)
                                        for t in range(cfg.n_trees))
    names = list(feature_names) if feature_names is not None else None
    return RandomForestModel(trees, cfg, C, X.shape[1], names)
