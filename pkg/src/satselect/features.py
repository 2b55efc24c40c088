"""DIMACS CNF parsing and structural instance features.

Families emitted by :func:`extract_features`, in column order:

* size: clause and variable counts and their ratios
* balance: fraction of positive literals per clause and per variable
* arity: fractions of unary, binary and ternary clauses
* horn: fraction of Horn clauses and per-variable Horn occurrence counts
* graph: node degrees of the variable-clause, variable and clause graphs

Distributions are summarised by the same five statistics everywhere: mean,
coefficient of variation (population std / mean), min, max and Shannon
entropy in bits. Fractions are binned into 100 equal-width bins over
``[0, 1]`` for the entropy; integer counts use their distinct values as bins.
Statistics are computed on sorted values, so features are exactly invariant
under variable renaming and clause reordering.

Only variables occurring in at least one clause are graph nodes or enter the
per-variable statistics.
"""

from __future__ import annotations

import bz2
import gzip
import logging
import lzma
import os
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ParseError

log = logging.getLogger(__name__)

FEATURE_VERSION = 1
CG_EDGE_CHECK_CAP = 10**6
STATS = ("mean", "coeff_var", "min", "max", "entropy")


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(c) for c in self.clauses))

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(map(str, c)) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF text.

    Comment lines (``c ...``) are skipped and a ``%`` line ends the input.
    Clauses may span lines and are terminated by ``0``. A clause count that
    disagrees with the header only triggers a warning.
    """
    num_vars = declared = None
    clauses: List[Tuple[int, ...]] = []
    current: List[int] = []
    current_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "cC":
            continue
        if line.startswith("%"):
            break
        if line[0] in "pP":
            if num_vars is not None:
                raise ParseError("second problem line", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1].lower() != "cnf":
                raise ParseError(f"malformed problem line {line!r}", lineno)
            try:
                num_vars, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"non-integer count in problem line {line!r}", lineno) from None
            if num_vars < 0 or declared < 0:
                raise ParseError("negative count in problem line", lineno)
            continue
        if num_vars is None:
            raise ParseError("clause before the 'p cnf' problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"non-integer token {tok!r}", lineno) from None
            if lit == 0:
                if not current:
                    raise ParseError("empty clause", lineno)
                clauses.append(tuple(current))
                current = []
                continue
            if abs(lit) > num_vars:
                raise ParseError(f"variable {abs(lit)} exceeds declared {num_vars}", lineno)
            if not current:
                current_line = lineno
            current.append(lit)
    if num_vars is None:
        raise ParseError("missing 'p cnf' problem line")
    if current:
        log.warning("line %s: last clause not terminated by 0; kept", current_line)
        clauses.append(tuple(current))
    if len(clauses) != declared:
        log.warning("header declares %d clauses, found %d", declared, len(clauses))
    return CnfFormula(num_vars, clauses)


def read_dimacs(path) -> CnfFormula:
    """Parse a CNF file, transparently decompressing .gz/.bz2/.xz."""
    path = os.fspath(path)
    opener = {".gz": gzip.open, ".bz2": bz2.open, ".xz": lzma.open}.get(
        os.path.splitext(path)[1], open)
    with opener(path, "rt", encoding="utf-8") as fh:
        return parse_dimacs(fh.read())


def _entropy_bits(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    if counts.sum() == 0:
        return 0.0
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def summarize(values, prefix: str, fraction: bool = False) -> Dict[str, float]:
    """The five-statistic battery of a distribution, keyed ``prefix_stat``."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        return {f"{prefix}_{s}": 0.0 for s in STATS}
    mean = float(v.mean())
    cv = float(v.std() / mean) if mean != 0 else 0.0
    if fraction:
        counts = np.histogram(v, bins=100, range=(0.0, 1.0))[0]
    else:
        counts = np.unique(v, return_counts=True)[1]
    return {f"{prefix}_mean": mean, f"{prefix}_coeff_var": cv, f"{prefix}_min": float(v[0]),
            f"{prefix}_max": float(v[-1]), f"{prefix}_entropy": _entropy_bits(counts)}


class _Incidence:
    """Literal occurrences as flat arrays plus a compact index of used variables."""

    def __init__(self, f: CnfFormula):
        lengths = np.array([len(c) for c in f.clauses], dtype=np.int64)
        lits = np.fromiter((l for c in f.clauses for l in c), dtype=np.int64, count=lengths.sum())
        self.lengths = lengths
        self.clause_of = np.repeat(np.arange(len(lengths)), lengths)
        self.positive = lits > 0
        used, self.var_of = np.unique(np.abs(lits), return_inverse=True)
        self.n_vars = len(used)
        self.n_clauses = len(lengths)

    def matrix(self, mask=None, binary=True) -> sp.csr_matrix:
        """clauses x used-variables occurrence matrix (optionally filtered)."""
        rows, cols = self.clause_of, self.var_of
        if mask is not None:
            rows, cols = rows[mask], cols[mask]
        m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                          shape=(self.n_clauses, self.n_vars))
        if binary:
            m.data[:] = 1.0
        return m


def basic_counts(f: CnfFormula) -> Dict[str, float]:
    c, v = float(f.num_clauses), float(f.num_vars)
    cv = c / v if v and c else 0.0
    vc = v / c if v and c else 0.0
    return {"nclauses": c, "nvars": v, "clauses_vars_ratio": cv, "vars_clauses_ratio": vc,
            "clauses_vars_ratio_sq": cv * cv, "vars_clauses_ratio_sq": vc * vc}


def balance_features(f: CnfFormula, inc: _Incidence = None) -> Dict[str, float]:
    inc = inc or _Incidence(f)
    pos = inc.positive.astype(float)
    per_clause = np.bincount(inc.clause_of, pos, inc.n_clauses) / np.maximum(inc.lengths, 1)
    occ = np.bincount(inc.var_of, minlength=inc.n_vars)
    per_var = np.bincount(inc.var_of, pos, inc.n_vars) / np.maximum(occ, 1)
    out = summarize(per_clause, "pos_frac_clause", fraction=True)
    out.update(summarize(per_var, "pos_frac_var", fraction=True))
    return out


def arity_features(f: CnfFormula) -> Dict[str, float]:
    lengths = np.array([len(c) for c in f.clauses])
    n = max(len(lengths), 1)
    return {"unary_frac": float((lengths == 1).sum() / n),
            "binary_frac": float((lengths == 2).sum() / n),
            "ternary_frac": float((lengths == 3).sum() / n)}


def horn_features(f: CnfFormula, inc: _Incidence = None) -> Dict[str, float]:
    inc = inc or _Incidence(f)
    n_pos = np.bincount(inc.clause_of, inc.positive.astype(float), inc.n_clauses)
    horn = n_pos <= 1
    in_horn = horn[inc.clause_of]
    per_var = np.bincount(inc.var_of[in_horn], minlength=inc.n_vars)
    out = {"horn_frac": float(horn.mean()) if inc.n_clauses else 0.0}
    out.update(summarize(per_var, "horn_var"))
    return out


def _offdiag_degrees(m: sp.spmatrix) -> np.ndarray:
    m = sp.csr_matrix(m)
    m.setdiag(0)
    m.eliminate_zeros()
    return np.diff(m.indptr)


def _clause_graph_degrees(inc: _Incidence, cap: int, seed: int = 0) -> Tuple[np.ndarray, bool]:
    P = inc.matrix(inc.positive)
    N = inc.matrix(~inc.positive)
    checks = int((np.asarray(P.sum(axis=0)) * np.asarray(N.sum(axis=0))).sum())
    c = inc.n_clauses
    if checks <= cap or c < 2:
        conflict = P @ N.T
        return _offdiag_degrees(conflict + conflict.T), False
    # too many candidate pairs: estimate each clause's degree from random pairs
    rng = np.random.default_rng(seed)
    i = rng.integers(0, c, size=cap)
    j = rng.integers(0, c - 1, size=cap)
    j = j + (j >= i)
    hit = (np.asarray(P[i].multiply(N[j]).sum(axis=1)).ravel()
           + np.asarray(N[i].multiply(P[j]).sum(axis=1)).ravel()) > 0
    trials = np.bincount(i, minlength=c) + np.bincount(j, minlength=c)
    hits = np.bincount(i, hit, c) + np.bincount(j, hit, c)
    return hits / np.maximum(trials, 1) * (c - 1), True


def graph_degree_features(f: CnfFormula, inc: _Incidence = None,
                          cg_cap: int = CG_EDGE_CHECK_CAP) -> Dict[str, float]:
    inc = inc or _Incidence(f)
    out = summarize(np.bincount(inc.var_of, minlength=inc.n_vars), "vcg_var")
    out.update(summarize(inc.lengths, "vcg_clause"))
    B = inc.matrix()
    out.update(summarize(_offdiag_degrees(B.T @ B) if inc.n_vars else [], "vg"))
    if inc.n_clauses:
        cg, sampled = _clause_graph_degrees(inc, cg_cap)
    else:
        cg, sampled = np.zeros(0), False
    cg_stats = summarize(cg, "cg")
    out.update({"cg_mean": cg_stats["cg_mean"], "cg_coeff_var": cg_stats["cg_coeff_var"],
                "cg_sampled": float(sampled)})
    return out


def extract_features(f: CnfFormula, cg_cap: int = CG_EDGE_CHECK_CAP) -> Dict[str, float]:
    """All structural features of a formula, in fixed column order."""
    inc = _Incidence(f)
    out = basic_counts(f)
    out.update(balance_features(f, inc))
    out.update(arity_features(f))
    out.update(horn_features(f, inc))
    out.update(graph_degree_features(f, inc, cg_cap))
    return out


FEATURE_NAMES: Tuple[str, ...] = tuple(extract_features(CnfFormula(0, ())))
