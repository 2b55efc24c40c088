"""Independent reference implementations used to check the package.

Everything here is deliberately naive pure Python (lists, loops, ``math``)
and shares no code with ``satselect``.
"""

import itertools
import math

TIE = 1e-12


def entropy_bits(probs):
    return -sum(p * math.log2(p) for p in probs if p > 0)


def label_entropy(labels, n_classes):
    n = len(labels)
    return entropy_bits([labels.count(c) / n for c in range(n_classes)])


def best_split_bruteforce(rows, labels, features, n_classes):
    """Exhaustive (feature, threshold, gain) search; None when nothing gains."""
    n = len(labels)
    if n < 2 or len(set(labels)) == 1:
        return None
    parent = label_entropy(labels, n_classes)
    candidates = []
    for j in sorted(features):
        values = sorted(set(r[j] for r in rows))
        for a, b in zip(values, values[1:]):
            t = (a + b) / 2
            left = [labels[i] for i in range(n) if rows[i][j] <= t]
            right = [labels[i] for i in range(n) if rows[i][j] > t]
            gain = parent - (len(left) * label_entropy(left, n_classes)
                             + len(right) * label_entropy(right, n_classes)) / n
            candidates.append((gain, j, t))
    if not candidates:
        return None
    best = max(g for g, _, _ in candidates)
    if best <= TIE:
        return None
    for g, j, t in candidates:          # already in (feature, threshold) order
        if g >= best - TIE:
            return j, t, g


def tree_bruteforce(rows, labels, n_classes, features=None):
    """Plain recursive maximum-entropy-gain tree as nested dicts."""
    features = range(len(rows[0])) if features is None else features
    split = best_split_bruteforce(rows, labels, features, n_classes)
    if split is None:
        n = len(labels)
        return {"leaf": [labels.count(c) / n for c in range(n_classes)], "count": n}
    j, t, _ = split
    li = [i for i, r in enumerate(rows) if r[j] <= t]
    ri = [i for i, r in enumerate(rows) if r[j] > t]
    return {
        "feature": j,
        "threshold": t,
        "left": tree_bruteforce([rows[i] for i in li], [labels[i] for i in li], n_classes, features),
        "right": tree_bruteforce([rows[i] for i in ri], [labels[i] for i in ri], n_classes, features),
    }


def enumerate_small_datasets():
    """Every multiset of labelled rows in a small grid.

    * one feature over {0, 1, 2}, 2..6 rows
    * two features over {0, 1}^2, 2..6 rows
    * two features over {0, 1, 2}^2, 2..4 rows
    """
    grids = [
        ([(v,) for v in range(3)], range(2, 7)),
        (list(itertools.product(range(2), repeat=2)), range(2, 7)),
        (list(itertools.product(range(3), repeat=2)), range(2, 5)),
    ]
    for points, sizes in grids:
        cells = [(p, c) for p in points for c in (0, 1)]
        for n in sizes:
            for combo in itertools.combinations_with_replacement(cells, n):
                yield [list(map(float, p)) for p, _ in combo], [c for _, c in combo]


def margin(p):
    top = sorted(p, reverse=True)
    return top[0] - top[1]


def max_uncertainty(p):
    return 1 - max(p)


def knn_impute_bruteforce(rows, k):
    """Cell-by-cell reference for the shared-feature-normalised k-NN imputer.

    ``rows`` is a list of lists with None for missing cells.
    """
    width = len(rows[0])
    out = [list(r) for r in rows]
    for i, r in enumerate(rows):
        for j in range(width):
            if r[j] is not None:
                continue
            scored = []
            for q, other in enumerate(rows):
                if other[j] is None:
                    continue
                shared = [f for f in range(width) if r[f] is not None and other[f] is not None]
                if not shared:
                    continue
                d = math.sqrt(sum((r[f] - other[f]) ** 2 for f in shared) / len(shared))
                scored.append((d, q))
            scored.sort()
            picks = [rows[q][j] for _, q in scored[:k]]
            if picks:
                out[i][j] = sum(picks) / len(picks)
            else:
                observed = [o[j] for o in rows if o[j] is not None]
                out[i][j] = sum(observed) / len(observed) if observed else 0.0
    return out
