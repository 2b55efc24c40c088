"""Runtime and feature tables, solver portfolios, labels and VBS statistics.

Runtime CSV layout::

    instance,<solver1>,<solver2>,...
    inst1,420,599,187

Feature CSV layout is the same with feature names as columns; an empty cell
or the token ``NaN`` marks a missing value. Lines starting with ``#`` are
comments in both formats.

A runtime equal to the cutoff means the run was censored (not solved within
the cutoff). Values above the cutoff are clamped to it.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .exceptions import ParseError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_CUTOFF_S = 1200.0

PRESETS: Dict[str, Tuple[str, ...]] = {
    "preset3": ("Glucose", "Minisat", "Lingeling"),
    "preset6": ("Glucose", "Minisat", "Lingeling", "Restartsat", "Lrgshr", "Mxc09"),
    "preset10": (
        "Glucose", "Minisat", "Lingeling", "Restartsat", "Lrgshr", "Mxc09",
        "Rcl", "Precosat", "MphaseSAT64", "Qutersat",
    ),
}

PathOrFile = Union[str, os.PathLike, io.TextIOBase]


@dataclass(frozen=True)
class Portfolio:
    """Ordered list of solver names; order defines label indices."""

    solver_names: Tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.solver_names)
        object.__setattr__(self, "solver_names", names)
        if not names:
            raise ValidationError("portfolio is empty")
        if len(set(names)) != len(names):
            raise ValidationError(f"portfolio has duplicate solvers: {names}")

    @classmethod
    def resolve(cls, value: Union[str, Sequence[str]]) -> "Portfolio":
        """Build a portfolio from a preset name, a comma list, or a sequence."""
        if isinstance(value, str):
            if value in PRESETS:
                return cls(PRESETS[value])
            if "," in value:
                return cls(tuple(s.strip() for s in value.split(",") if s.strip()))
            raise ValidationError(
                f"unknown portfolio {value!r}; presets are {', '.join(PRESETS)} "
                "or a comma-separated solver list"
            )
        return cls(tuple(value))

    def __len__(self):
        return len(self.solver_names)


@dataclass(frozen=True)
class RuntimeMatrix:
    """Instances x solvers runtimes in seconds, censored at ``cutoff_s``."""

    instance_ids: Tuple[str, ...]
    solver_names: Tuple[str, ...]
    values: np.ndarray
    cutoff_s: float = DEFAULT_CUTOFF_S

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "instance_ids", tuple(self.instance_ids))
        object.__setattr__(self, "solver_names", tuple(self.solver_names))
        if values.ndim != 2 or values.shape != (len(self.instance_ids), len(self.solver_names)):
            raise ValidationError(
                f"runtime values shape {values.shape} does not match "
                f"{len(self.instance_ids)} instances x {len(self.solver_names)} solvers"
            )
        _check_unique(self.instance_ids, "instance id")
        if np.isnan(values).any():
            raise ValidationError("runtime matrix contains missing values")
        if (values < 0).any():
            raise ValidationError("negative runtime")
        if (values > self.cutoff_s).any():
            raise ValidationError("runtime above cutoff; clamp before construction")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.instance_ids)

    def row(self, instance_id: str) -> np.ndarray:
        return self.values[self.instance_ids.index(instance_id)]

    @property
    def censored(self) -> np.ndarray:
        return self.values >= self.cutoff_s


@dataclass(frozen=True)
class FeatureMatrix:
    """Instances x named numeric features; NaN marks a missing value."""

    instance_ids: Tuple[str, ...]
    feature_names: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "instance_ids", tuple(self.instance_ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if values.ndim != 2 or values.shape != (len(self.instance_ids), len(self.feature_names)):
            raise ValidationError(
                f"feature values shape {values.shape} does not match "
                f"{len(self.instance_ids)} instances x {len(self.feature_names)} features"
            )
        _check_unique(self.instance_ids, "instance id")
        _check_unique(self.feature_names, "feature name")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.instance_ids)

    def select_features(self, keep: Sequence[int]) -> "FeatureMatrix":
        keep = list(keep)
        return FeatureMatrix(self.instance_ids, [self.feature_names[j] for j in keep],
                             self.values[:, keep])

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.instance_ids, self.feature_names, values)


@dataclass(frozen=True)
class LabeledDataset:
    """Features joined with best-solver labels and the runtimes behind them.

    ``y[i]`` always indexes a solver achieving the minimum of ``runtimes[i]``.
    """

    instance_ids: Tuple[str, ...]
    feature_names: Tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    runtimes: np.ndarray
    solver_names: Tuple[str, ...]
    cutoff_s: float = DEFAULT_CUTOFF_S

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=np.int64)
        runtimes = np.asarray(self.runtimes, dtype=float)
        n = len(self.instance_ids)
        object.__setattr__(self, "instance_ids", tuple(self.instance_ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "solver_names", tuple(self.solver_names))
        if X.shape != (n, len(self.feature_names)) or y.shape != (n,) \
                or runtimes.shape != (n, len(self.solver_names)):
            raise ValidationError(
                f"inconsistent dataset shapes: ids {n}, X {X.shape}, y {y.shape}, "
                f"runtimes {runtimes.shape}"
            )
        if n and ((y < 0).any() or (y >= len(self.solver_names)).any()):
            raise ValidationError("label outside portfolio range")
        if n and not np.array_equal(runtimes[np.arange(n), y], runtimes.min(axis=1)):
            raise ValidationError("label does not achieve the row-minimum runtime")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "runtimes", runtimes)

    def __len__(self):
        return len(self.instance_ids)

    @property
    def n_classes(self) -> int:
        return len(self.solver_names)

    @property
    def features(self) -> FeatureMatrix:
        return FeatureMatrix(self.instance_ids, self.feature_names, self.X)

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        idx = np.asarray(list(indices), dtype=np.int64)
        return LabeledDataset(
            [self.instance_ids[i] for i in idx], self.feature_names, self.X[idx],
            self.y[idx], self.runtimes[idx], self.solver_names, self.cutoff_s,
        )

    def with_features(self, names: Sequence[str], X: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.instance_ids, names, X, self.y, self.runtimes,
                              self.solver_names, self.cutoff_s)


def _check_unique(items: Sequence[str], what: str):
    seen = set()
    for item in items:
        if item in seen:
            raise ValidationError(f"duplicate {what}: {item!r}")
        seen.add(item)


def _open_text(source: PathOrFile):
    if isinstance(source, io.TextIOBase):
        return source, False
    return open(source, newline="", encoding="utf-8"), True


def _read_table(source: PathOrFile, kind: str):
    """Read a header + rows CSV, skipping ``#`` comment lines.

    Returns ``(header, rows)`` where rows are ``(line_number, cells)``.
    """
    fh, owned = _open_text(source)
    try:
        header = None
        rows = []
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            cells = next(csv.reader([stripped]))
            if header is None:
                header = [c.strip() for c in cells]
                continue
            rows.append((lineno, [c.strip() for c in cells]))
    finally:
        if owned:
            fh.close()
    if header is None:
        raise ParseError(f"{kind} file is empty")
    if len(header) < 2:
        raise ParseError(f"{kind} header needs an id column and at least one data column", 1)
    return header, rows


def load_runtimes(path: PathOrFile, cutoff_s: float = DEFAULT_CUTOFF_S) -> RuntimeMatrix:
    """Load a runtime CSV, clamping every cell to ``[0, cutoff_s]``.

    Raises
    ------
    ParseError
        Empty file, wrong row length or non-numeric cell (with line number).
    ValidationError
        Negative runtime or duplicate instance id.
    """
    if not cutoff_s > 0:
        raise ValidationError("cutoff must be positive")
    header, rows = _read_table(path, "runtime")
    solvers = header[1:]
    _check_unique(solvers, "solver name")
    ids: List[str] = []
    values = np.empty((len(rows), len(solvers)))
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(cells)}", lineno)
        if not cells[0]:
            raise ParseError("empty instance id", lineno)
        ids.append(cells[0])
        for j, cell in enumerate(cells[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric runtime {cell!r}", lineno) from None
            if math.isnan(v):
                raise ParseError("missing runtime", lineno)
            if v < 0:
                raise ValidationError(f"line {lineno}: negative runtime {v}")
            values[r, j] = v
    _check_unique(ids, "instance id")
    over = values > cutoff_s
    if over.any():
        log.warning("clamped %d runtime cells above the %g s cutoff", int(over.sum()), cutoff_s)
    values = np.minimum(values, cutoff_s)
    return RuntimeMatrix(ids, solvers, values, cutoff_s)


def load_features(path: PathOrFile) -> FeatureMatrix:
    """Load a feature CSV; empty cells and ``NaN`` become missing."""
    header, rows = _read_table(path, "feature")
    ids: List[str] = []
    values = np.empty((len(rows), len(header) - 1))
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(cells)}", lineno)
        ids.append(cells[0])
        for j, cell in enumerate(cells[1:]):
            if cell == "" or cell.lower() == "nan":
                values[r, j] = np.nan
                continue
            try:
                values[r, j] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric feature value {cell!r}", lineno) from None
    return FeatureMatrix(ids, header[1:], values)


def format_float(v: float) -> str:
    """Shortest round-tripping text for a float; ``NaN`` for missing."""
    if math.isnan(v):
        return "NaN"
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_table(path: PathOrFile, header: Sequence[str], ids: Sequence[str],
                values: np.ndarray, comment: Optional[str] = None):
    fh, owned = (path, False) if isinstance(path, io.TextIOBase) else \
        (open(path, "w", newline="", encoding="utf-8"), True)
    try:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for inst, row in zip(ids, values):
            writer.writerow([inst, *(format_float(v) for v in row)])
    finally:
        if owned:
            fh.close()


def write_runtimes(path: PathOrFile, m: RuntimeMatrix):
    write_table(path, ["instance", *m.solver_names], m.instance_ids, m.values)


def write_features(path: PathOrFile, f: FeatureMatrix, comment: Optional[str] = None):
    write_table(path, ["instance", *f.feature_names], f.instance_ids, f.values, comment)


def slice_portfolio(m: RuntimeMatrix, p: Union[Portfolio, Sequence[str], str]) -> RuntimeMatrix:
    """Project ``m`` onto the solvers of ``p``, in portfolio order."""
    if not isinstance(p, Portfolio):
        p = Portfolio.resolve(p)
    missing = [s for s in p.solver_names if s not in m.solver_names]
    if missing:
        raise ValidationError(f"solvers not in runtime matrix: {', '.join(missing)}")
    cols = [m.solver_names.index(s) for s in p.solver_names]
    return RuntimeMatrix(m.instance_ids, p.solver_names, m.values[:, cols], m.cutoff_s)


def best_solver_indices(values: np.ndarray) -> np.ndarray:
    """Row-wise argmin; ties resolve to the lowest column index."""
    return np.argmin(values, axis=1)


def label_best_solver(m: RuntimeMatrix) -> Tuple[Dict[str, int], Set[str]]:
    """Label each instance with its fastest solver.

    Instances censored on every solver are returned in the second element
    and get no label.
    """
    unsolved_mask = m.censored.all(axis=1)
    best = best_solver_indices(m.values)
    labels = {}
    unsolved = set()
    for inst, lab, dead in zip(m.instance_ids, best, unsolved_mask):
        if dead:
            unsolved.add(inst)
        else:
            labels[inst] = int(lab)
    return labels, unsolved


def vbs_stats(m: Union[RuntimeMatrix, np.ndarray]) -> Tuple[Dict, float]:
    """Per-instance virtual-best runtime and its average over instances."""
    if isinstance(m, RuntimeMatrix):
        ids, values = m.instance_ids, m.values
    else:
        values = np.asarray(m, dtype=float)
        ids = tuple(range(len(values)))
    if len(ids) == 0:
        raise ValidationError("cannot compute VBS statistics of an empty matrix")
    mins = values.min(axis=1)
    return dict(zip(ids, mins.tolist())), float(mins.sum() / len(mins))


def join(f: FeatureMatrix, m: RuntimeMatrix) -> Tuple[LabeledDataset, Set[str]]:
    """Inner-join features and runtimes on instance id and attach labels.

    Rows follow the runtime matrix order. Ids present on one side only, or
    unsolved by every solver, are reported as dropped.
    """
    labels, unsolved = label_best_solver(m)
    feat_index = {inst: i for i, inst in enumerate(f.instance_ids)}
    keep_rt, keep_ft = [], []
    for r, inst in enumerate(m.instance_ids):
        if inst in feat_index and inst not in unsolved:
            keep_rt.append(r)
            keep_ft.append(feat_index[inst])
    kept = {m.instance_ids[r] for r in keep_rt}
    dropped = (set(f.instance_ids) | set(m.instance_ids)) - kept
    if not keep_rt:
        raise ValidationError("feature and runtime tables share no usable instance")
    ids = [m.instance_ids[r] for r in keep_rt]
    ds = LabeledDataset(
        ids, f.feature_names, f.values[keep_ft], [labels[i] for i in ids],
        m.values[keep_rt], m.solver_names, m.cutoff_s,
    )
    return ds, dropped
