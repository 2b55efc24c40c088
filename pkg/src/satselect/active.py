"""Pool-based active learning around the random forest.

The learner sees the features of every pool instance but must pay an oracle
(running all solvers) for each label. Starting from a uniformly drawn batch
B0, it repeatedly scores the unlabeled pool with an uncertainty criterion,
buys labels for the best-ranked batch and refits the forest from scratch.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from . import forest
from .data import LabeledDataset, best_solver_indices, format_float
from .exceptions import ValidationError
from .seeding import stream


class QueryStrategy(str, enum.Enum):
    MIN_MARGIN = "margin"
    MAX_UNCERTAINTY = "maxunc"
    MAX_ENTROPY = "entropy"
    RANDOM_PASSIVE = "passive"

    @property
    def lower_is_better(self) -> bool:
        return self is QueryStrategy.MIN_MARGIN


def score_rows(strategy: QueryStrategy, P: np.ndarray) -> np.ndarray:
    """Score every row of a probability matrix under ``strategy``.

    Margin is the gap between the two largest probabilities (smaller is more
    informative); uncertainty is ``1 - max p``; entropy is in bits. The
    passive strategy has no score and yields NaN.
    """
    strategy = QueryStrategy(strategy)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] < 2:
        raise ValidationError("scores need at least two classes")
    if strategy is QueryStrategy.MIN_MARGIN:
        top2 = np.sort(P, axis=1)[:, -2:]
        return top2[:, 1] - top2[:, 0]
    if strategy is QueryStrategy.MAX_UNCERTAINTY:
        return 1.0 - P.max(axis=1)
    if strategy is QueryStrategy.MAX_ENTROPY:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, P * np.log2(np.where(P > 0, P, 1.0)), 0.0)
        return -terms.sum(axis=1) + 0.0
    return np.full(len(P), np.nan)


def score(strategy: QueryStrategy, p) -> float:
    """Score of a single class distribution."""
    return float(score_rows(strategy, np.asarray(p, dtype=float)[None, :])[0])


def rank_pool(strategy: QueryStrategy, scores: np.ndarray) -> np.ndarray:
    """Pool positions best-first; equal scores keep pool order."""
    strategy = QueryStrategy(strategy)
    key = scores if strategy.lower_is_better else -scores
    return np.argsort(key, kind="stable")


def select_batch(model: forest.RandomForestModel, pool: np.ndarray, strategy: QueryStrategy,
                 b: int, pool_ids: Optional[Sequence] = None,
                 rng: Optional[np.random.Generator] = None) -> list:
    """Pick up to ``b`` pool instances to label, best-ranked first.

    Returns ids from ``pool_ids`` (positions when omitted). The passive
    strategy draws uniformly without replacement from ``rng``.
    """
    strategy = QueryStrategy(strategy)
    if b < 1:
        raise ValidationError("batch size must be at least 1")
    pool = np.asarray(pool, dtype=float)
    ids = list(range(len(pool))) if pool_ids is None else list(pool_ids)
    if strategy is QueryStrategy.RANDOM_PASSIVE:
        if rng is None:
            raise ValidationError("passive selection needs a random generator")
        picks = rng.permutation(len(pool))[:b]
    else:
        picks = rank_pool(strategy, score_rows(strategy, model.predict_proba(pool)))[:b]
    return [ids[i] for i in picks]


class LabelOracle(Protocol):
    def label(self, instance_id) -> int:
        ...


class RuntimeOracle:
    """Answers label queries from known runtimes, charging their sum as cost."""

    def __init__(self, instance_ids: Sequence, runtimes: np.ndarray):
        runtimes = np.asarray(runtimes, dtype=float)
        self._index = {inst: i for i, inst in enumerate(instance_ids)}
        self._labels = best_solver_indices(runtimes)
        self._cost = runtimes.sum(axis=1)
        self.queries = 0
        self.total_cost_s = 0.0

    @classmethod
    def from_dataset(cls, d: LabeledDataset) -> "RuntimeOracle":
        return cls(d.instance_ids, d.runtimes)

    def label(self, instance_id) -> int:
        i = self._index[instance_id]
        self.queries += 1
        self.total_cost_s += float(self._cost[i])
        return int(self._labels[i])

    def cost(self, instance_id) -> float:
        return float(self._cost[self._index[instance_id]])


@dataclass
class ActiveConfig:
    b0_fraction: float = 0.1
    batch_size: int = 25
    label_budget: Optional[int] = None      # None: label the whole pool
    strategy: QueryStrategy = QueryStrategy.MIN_MARGIN
    seed: int = 0

    def __post_init__(self):
        self.strategy = QueryStrategy(self.strategy)
        if not 0 < self.b0_fraction < 1:
            raise ValidationError("b0_fraction must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")

    def b0_size(self, pool_size: int) -> int:
        return int(math.floor(self.b0_fraction * pool_size + 0.5))


@dataclass
class QueryRecord:
    iteration: int
    instance_ids: list
    scores: Optional[List[float]]
    train_size: int
    test_acc: Optional[float] = None
    # best score left in the pool after this batch was taken
    runner_up_score: Optional[float] = None


@dataclass
class QueryLog:
    strategy: QueryStrategy
    records: List[QueryRecord] = field(default_factory=list)

    @property
    def queried(self) -> list:
        return [i for r in self.records for i in r.instance_ids]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "instance", "score", "strategy", "train_size", "test_acc"])
        for r in self.records:
            scores = r.scores if r.scores is not None else [None] * len(r.instance_ids)
            acc = "" if r.test_acc is None else format_float(r.test_acc)
            for inst, s in zip(r.instance_ids, scores):
                w.writerow([r.iteration, inst, "" if s is None else format_float(s),
                            self.strategy.value, r.train_size, acc])
        return buf.getvalue()


class ActiveLoopAborted(RuntimeError):
    """The oracle failed; ``log`` and ``model`` hold the progress so far."""

    def __init__(self, message, log: QueryLog, model: Optional[forest.RandomForestModel]):
        super().__init__(message)
        self.log = log
        self.model = model


def draw_b0(pool_size: int, cfg: ActiveConfig) -> np.ndarray:
    """Initial batch positions; independent of the strategy, so arms share it."""
    return stream(cfg.seed, "b0").choice(pool_size, size=cfg.b0_size(pool_size), replace=False)


def passive_order(pool_size: int, cfg: ActiveConfig) -> np.ndarray:
    """Pool positions in the order a passive learner labels them (B0 first)."""
    first = draw_b0(pool_size, cfg)
    rest = np.setdiff1d(np.arange(pool_size), first)
    return np.concatenate([first, stream(cfg.seed, "passive").permutation(rest)])


def _accuracy(model, eval_set) -> float:
    X, y = eval_set[0], np.asarray(eval_set[1])
    pred = model.predict(X)
    if len(eval_set) > 2:
        rt = np.asarray(eval_set[2], dtype=float)
        return float(np.mean(rt[np.arange(len(rt)), pred] == rt.min(axis=1)))
    return float(np.mean(pred == y))


def run_active_loop(pool_ids: Sequence, pool_X: np.ndarray, oracle: LabelOracle,
                    cfg: ActiveConfig, forest_cfg: Optional[forest.ForestConfig] = None,
                    n_classes: Optional[int] = None, eval_set: Optional[tuple] = None
                    ) -> Tuple[forest.RandomForestModel, QueryLog]:
    """Grow a labeled training set from the pool by uncertainty sampling.

    Parameters
    ----------
    pool_ids, pool_X
        Unlabeled pool: ids and complete (imputed) feature rows.
    oracle
        Source of labels, queried once per selected instance.
    cfg
        Strategy, B0 fraction, batch size, label budget and seed.
    forest_cfg
        Forest settings used for every refit.
    n_classes
        Portfolio size; needed because B0 may miss some classes.
    eval_set
        ``(X, y)`` or ``(X, y, runtimes)`` held-out data; accuracy after each
        refit goes into the log. With runtimes, any tied-best pick counts.

    Returns
    -------
    (model, log)
        Forest trained on every queried instance, and the query log.
    """
    pool_ids = list(pool_ids)
    pool_X = np.asarray(pool_X, dtype=float)
    n = len(pool_ids)
    if pool_X.shape[0] != n:
        raise ValidationError("pool ids and features differ in length")
    forest_cfg = forest_cfg or forest.ForestConfig()
    b0 = cfg.b0_size(n)
    budget = n if cfg.label_budget is None else min(cfg.label_budget, n)
    if budget < b0:
        raise ValidationError(f"label budget {budget} is smaller than B0 ({b0})")
    if n < b0 + cfg.batch_size and budget > b0:
        raise ValidationError(f"pool of {n} too small for B0 {b0} plus a batch of {cfg.batch_size}")
    if b0 < 1:
        raise ValidationError("B0 is empty; raise b0_fraction")
    if n_classes is not None and b0 < n_classes:
        raise ValidationError(f"B0 ({b0}) smaller than the number of classes ({n_classes})")

    log = QueryLog(cfg.strategy)
    model = None
    train_pos: List[int] = []
    train_y: List[int] = []

    def query(positions):
        try:
            return [int(oracle.label(pool_ids[p])) for p in positions]
        except Exception as err:
            raise ActiveLoopAborted(f"oracle failed: {err}", log, model) from err

    def refit():
        C = n_classes if n_classes is not None else max(max(train_y) + 1, 2)
        return forest.fit(pool_X[train_pos], np.asarray(train_y), forest_cfg, n_classes=C)

    passive = cfg.strategy is QueryStrategy.RANDOM_PASSIVE
    order = passive_order(n, cfg)
    first = order[:b0]
    remaining = np.setdiff1d(np.arange(n), first)   # kept in pool order
    cursor = b0

    train_y += query(first)
    train_pos += first.tolist()
    model = refit()
    log.records.append(QueryRecord(
        0, [pool_ids[p] for p in first], None, len(train_pos),
        _accuracy(model, eval_set) if eval_set is not None else None))

    iteration = 0
    while len(train_pos) < budget and len(remaining):
        iteration += 1
        b = min(cfg.batch_size, budget - len(train_pos), len(remaining))
        if passive:
            chosen = order[cursor:cursor + b]
            cursor += b
            chosen_scores, runner_up = None, None
        else:
            s = score_rows(cfg.strategy, model.predict_proba(pool_X[remaining]))
            ranked = rank_pool(cfg.strategy, s)
            chosen = remaining[ranked[:b]]
            chosen_scores = s[ranked[:b]].tolist()
            runner_up = float(s[ranked[b]]) if len(ranked) > b else None
        labels = query(chosen)
        train_pos += chosen.tolist()
        train_y += labels
        remaining = np.setdiff1d(remaining, chosen)
        model = refit()
        log.records.append(QueryRecord(
            iteration, [pool_ids[p] for p in chosen], chosen_scores, len(train_pos),
            _accuracy(model, eval_set) if eval_set is not None else None, runner_up))
    return model, log


def uniform_training_set(pool_ids: Sequence, size: int, cfg: ActiveConfig) -> list:
    """Ids a passive learner with this config would have labeled at ``size``."""
    order = passive_order(len(pool_ids), cfg)
    return [pool_ids[p] for p in order[:size]]
