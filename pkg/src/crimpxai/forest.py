"""Random forest of Gini decision trees, written against plain numpy.

Trees are stored as flat node arrays (sklearn-style). Every node keeps its
training class counts, which gives both the leaf distributions used for
prediction and the per-node sample counts the Shapley recursion needs.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .metrics import confusion, summary

SCHEMA = "crimpxai.forest/v1"
LEAF = -1


@dataclass(frozen=True)
class HyperParams:
    n_estimators: int = 100
    max_depth: int | None = None  # None: grow until pure or < 2 samples
    features_per_split: int | None = None  # None: ceil(sqrt(D))
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0 or None, got {self.max_depth}")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "max_depth": "unlimited" if self.max_depth is None else self.max_depth,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
        }

    @classmethod
    def from_dict(cls, d) -> "HyperParams":
        depth = d.get("max_depth")
        return cls(
            int(d.get("n_estimators", 100)),
            _parse_depth(depth),
            d.get("features_per_split"),
            bool(d.get("bootstrap", True)),
        )


def _parse_depth(depth):
    if depth is None or depth == "unlimited":
        return None
    return int(depth)


# ---------------------------------------------------------------------------
# trees


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # LEAF for leaves
    threshold: np.ndarray  # go left iff x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    distribution: np.ndarray  # (n_nodes, n_classes) training class counts
    n_features: int
    # per-node training sample count; None when loaded from a file without it
    node_sample_count: np.ndarray | None = None

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "distribution", "node_sample_count"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_classes(self) -> int:
        return self.distribution.shape[1]

    @property
    def value(self) -> np.ndarray:
        totals = self.distribution.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, self.distribution / np.where(totals > 0, totals, 1), 0.0)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    @property
    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.arange(X.shape[0])
        while active.size:
            f = self.feature[node[active]]
            internal = f != LEAF
            active = active[internal]
            if not active.size:
                break
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        def rec(node):
            out = {}
            if self.node_sample_count is not None:
                out["node_sample_count"] = _num(self.node_sample_count[node])
            if self.feature[node] == LEAF:
                out["class_distribution"] = [_num(v) for v in self.distribution[node]]
            else:
                out["feature_index"] = int(self.feature[node])
                out["threshold"] = float(self.threshold[node])
                out["left"] = rec(int(self.left[node]))
                out["right"] = rec(int(self.right[node]))
            return out

        return rec(0)

    @classmethod
    def from_dict(cls, root: dict, n_features: int, n_classes: int) -> "Tree":
        feature, threshold, left, right, dist, counts = [], [], [], [], [], []
        has_counts = True

        # iterative preorder so deep trees do not hit the recursion limit
        def new_node():
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            dist.append(None)
            counts.append(None)
            return len(feature) - 1

        stack = [(root, new_node())]
        order = []
        while stack:
            rec, idx = stack.pop()
            order.append(idx)
            if "node_sample_count" in rec:
                counts[idx] = float(rec["node_sample_count"])
            else:
                has_counts = False
            if "feature_index" in rec:
                f = int(rec["feature_index"])
                if not 0 <= f < n_features:
                    raise ValueError(f"feature_index {f} out of range for {n_features} features")
                feature[idx] = f
                threshold[idx] = float(rec["threshold"])
                li, ri = new_node(), new_node()
                left[idx], right[idx] = li, ri
                stack.append((rec["right"], ri))
                stack.append((rec["left"], li))
            else:
                d = [float(v) for v in rec["class_distribution"]]
                if len(d) != n_classes:
                    raise ValueError(f"class_distribution has {len(d)} entries, expected {n_classes}")
                dist[idx] = d
        # internal distributions are the sum of their children
        for idx in reversed(order):
            if feature[idx] != LEAF:
                dist[idx] = [a + b for a, b in zip(dist[left[idx]], dist[right[idx]])]
        return cls(
            np.array(feature, dtype=np.intp),
            np.array(threshold, dtype=float),
            np.array(left, dtype=np.intp),
            np.array(right, dtype=np.intp),
            np.array(dist, dtype=float),
            n_features,
            np.array(counts, dtype=float) if has_counts else None,
        )


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D (samples x features), got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("cannot fit on an empty dataset")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y must have one label per row: {y.shape} vs {X.shape[0]} rows")
    if not np.issubdtype(y.dtype, np.integer) or (y < 0).any():
        raise ValueError("labels must be non-negative integer class indices")
    return X, y.astype(np.intp)


def _best_split(X: np.ndarray, onehot: np.ndarray, idx: np.ndarray, feats: np.ndarray):
    """Best Gini split of rows ``idx`` over ``feats``, or None if every
    candidate is constant there.

    Maximizes sum_k(left_k^2)/n_left + sum_k(right_k^2)/n_right, which is
    equivalent to minimizing weighted child impurity.
    """
    n = idx.size
    sub = X[np.ix_(idx, feats)]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    oh = onehot[idx]
    left = np.cumsum(oh[order], axis=0)[:-1]  # (n-1, k, C)
    right = oh.sum(axis=0) - left
    n_left = np.arange(1, n, dtype=float)[:, None]
    score = np.einsum("ijc,ijc->ij", left, left) / n_left + np.einsum("ijc,ijc->ij", right, right) / (n - n_left)
    score[~valid] = -np.inf
    pos, j = np.unravel_index(int(np.argmax(score)), score.shape)
    lo, hi = xs[pos, j], xs[pos + 1, j]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:  # adjacent floats
        thr = lo
    return int(feats[j]), float(thr)


def fit_tree(
    X,
    y,
    max_depth: int | None = None,
    features_per_split: int | None = None,
    seed: int | np.random.Generator = 0,
    n_classes: int | None = None,
    sample_indices: np.ndarray | None = None,
) -> Tree:
    """Grow one tree greedily on Gini impurity.

    ``sample_indices`` (possibly with repeats) selects the rows used for
    training; a bootstrap resample is passed this way so node counts reflect
    multiplicity. A node becomes a leaf at ``max_depth``, when pure, when it
    holds fewer than 2 samples, or when no feature varies within it.
    """
    X, y = _check_xy(X, y)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    if y.max() >= n_classes:
        raise ValueError(f"label {y.max()} out of range for {n_classes} classes")
    D = X.shape[1]
    k = math.ceil(math.sqrt(D)) if features_per_split is None else min(features_per_split, D)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx0 = np.arange(X.shape[0]) if sample_indices is None else np.asarray(sample_indices, dtype=np.intp)
    if idx0.size == 0:
        raise ValueError("cannot fit on an empty sample")

    onehot = np.eye(n_classes)[y]
    feature, threshold, left, right, dist = [], [], [], [], []

    def add(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        dist.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(add(idx0), idx0, 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = dist[node]
        if idx.size < 2 or np.count_nonzero(counts) <= 1:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        feats = np.sort(rng.choice(D, size=k, replace=False))
        best = _best_split(X, onehot, idx, feats)
        if best is None and k < D:
            # every sampled feature is constant here; fall back to the rest
            rest = np.setdiff1d(np.arange(D), feats)
            best = _best_split(X, onehot, idx, rest)
        if best is None:
            continue
        f, thr = best
        go_left = X[idx, f] <= thr
        li, ri = add(idx[go_left]), add(idx[~go_left])
        feature[node], threshold[node] = f, thr
        left[node], right[node] = li, ri
        stack.append((ri, idx[~go_left], depth + 1))
        stack.append((li, idx[go_left], depth + 1))

    distribution = np.array(dist, dtype=float)
    return Tree(
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        distribution,
        D,
        distribution.sum(axis=1),
    )


# ---------------------------------------------------------------------------
# forests


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]
    n_classes: int
    class_names: tuple[str, ...]
    hyperparams: HyperParams
    seed: int
    n_features: int
    base_rate: np.ndarray = field(default=None)  # mean training-set probability per class

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def to_json(self) -> str:
        doc = {
            "schema": SCHEMA,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "class_names": list(self.class_names),
            "hyperparams": self.hyperparams.to_dict(),
            "seed": self.seed,
            "base_rate": None if self.base_rate is None else [float(v) for v in self.base_rate],
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported forest schema {doc.get('schema')!r}, expected {SCHEMA!r}")
        D, C = int(doc["n_features"]), int(doc["n_classes"])
        trees = tuple(Tree.from_dict(t, D, C) for t in doc["trees"])
        base = doc.get("base_rate")
        return cls(
            trees,
            C,
            tuple(doc["class_names"]),
            HyperParams.from_dict(doc["hyperparams"]),
            int(doc["seed"]),
            D,
            None if base is None else np.asarray(base, dtype=float),
        )


def _tree_seed(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _fit_one(X, y, hp: HyperParams, seed: int, index: int, n_classes: int) -> Tree:
    rng = _tree_seed(seed, index)
    sample = rng.integers(0, X.shape[0], X.shape[0]) if hp.bootstrap else None
    return fit_tree(X, y, hp.max_depth, hp.features_per_split, rng, n_classes, sample)


def fit_forest(
    X,
    y,
    hyperparams: HyperParams = HyperParams(),
    seed: int = 0,
    n_classes: int | None = None,
    class_names: Sequence[str] = (),
) -> Forest:
    """Fit ``n_estimators`` trees, tree ``i`` drawing from the stream
    ``(seed, i)``. Results do not depend on fitting order."""
    X, y = _check_xy(X, y)
    if n_classes is None:
        n_classes = len(class_names) if class_names else int(y.max()) + 1
    names = tuple(class_names) or tuple(str(i) for i in range(n_classes))
    trees = tuple(_fit_one(X, y, hyperparams, seed, i, n_classes) for i in range(hyperparams.n_estimators))
    forest = Forest(trees, n_classes, names, hyperparams, int(seed), X.shape[1])
    base = predict_proba(forest, X).mean(axis=0)
    return Forest(trees, n_classes, names, hyperparams, int(seed), X.shape[1], base)


def predict_proba(f: Forest, X) -> np.ndarray:
    """Mean of per-tree leaf class proportions. 1-D input gives a 1-D result."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != f.n_features:
        raise ValueError(f"expected {f.n_features} features per instance, got shape {X.shape}")
    out = np.zeros((X2.shape[0], f.n_classes))
    for t in f.trees:
        out += t.predict_proba(X2)
    out /= len(f.trees)
    return out[0] if single else out


def predict(f: Forest, X) -> np.ndarray:
    """Class index with the highest probability; ties go to the lowest index."""
    return np.argmax(predict_proba(f, X), axis=-1)


# ---------------------------------------------------------------------------
# cross-validation and grid search


@dataclass(frozen=True)
class FoldScore:
    accuracy: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class CvReport:
    hyperparams: HyperParams
    folds: tuple[FoldScore, ...]

    @property
    def mean(self) -> FoldScore:
        a = np.array([[s.accuracy, s.precision, s.recall, s.f1] for s in self.folds])
        return FoldScore(*(float(v) for v in a.mean(axis=0)))

    @property
    def std(self) -> FoldScore:
        a = np.array([[s.accuracy, s.precision, s.recall, s.f1] for s in self.folds])
        return FoldScore(*(float(v) for v in a.std(axis=0)))

    def to_dict(self) -> dict:
        def d(s):
            return {"accuracy": s.accuracy, "precision": s.precision, "recall": s.recall, "f1": s.f1}

        return {
            "hyperparams": self.hyperparams.to_dict(),
            "folds": [d(s) for s in self.folds],
            "mean": d(self.mean),
            "std": d(self.std),
        }


@dataclass(frozen=True)
class HyperGrid:
    n_estimators: tuple[int, ...] = (50, 100, 200, 300, 400)
    max_depth: tuple[int | None, ...] = (None, 5, 10, 20, 30)
    cv_folds: int = 5
    features_per_split: int | None = None
    bootstrap: bool = True

    def __post_init__(self):
        object.__setattr__(self, "n_estimators", tuple(int(n) for n in self.n_estimators))
        object.__setattr__(self, "max_depth", tuple(_parse_depth(d) for d in self.max_depth))
        if not self.n_estimators or not self.max_depth:
            raise ValueError("hyperparameter grid lists must be non-empty")
        if self.cv_folds < 2:
            raise ValueError(f"cv_folds must be >= 2, got {self.cv_folds}")

    def cells(self) -> list[HyperParams]:
        return [
            HyperParams(n, d, self.features_per_split, self.bootstrap)
            for n, d in itertools.product(self.n_estimators, self.max_depth)
        ]

    @classmethod
    def from_dict(cls, d) -> "HyperGrid":
        return cls(
            tuple(d.get("n_estimators", cls.n_estimators)),
            tuple(d.get("max_depth", cls.max_depth)),
            int(d.get("cv_folds", 5)),
            d.get("features_per_split"),
            bool(d.get("bootstrap", True)),
        )


def fold_assignment(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Validation indices per fold: a seeded permutation cut into near-equal
    contiguous blocks."""
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(b) for b in np.array_split(perm, folds)]


def _score(y_true, y_pred, n_classes) -> FoldScore:
    s = summary(confusion(y_true, y_pred, n_classes))
    return FoldScore(s.accuracy, s.precision, s.recall, s.f1)


def _run_fold(X, y, hp, seed, n_classes, val):
    mask = np.ones(X.shape[0], dtype=bool)
    mask[val] = False
    forest = fit_forest(X[mask], y[mask], hp, seed, n_classes)
    return _score(y[val], predict(forest, X[val]), n_classes)


def _map(fn, arg_lists, jobs: int):
    if jobs <= 1:
        return [fn(*a) for a in arg_lists]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*arg_lists)))


def kfold_cv(
    X, y, hyperparams: HyperParams, folds: int = 5, seed: int = 0, n_classes: int | None = None, jobs: int = 1
) -> CvReport:
    X, y = _check_xy(X, y)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if X.shape[0] < folds:
        raise ValueError(f"{X.shape[0]} samples cannot fill {folds} folds")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    args = [(X, y, hyperparams, seed, n_classes, val) for val in fold_assignment(X.shape[0], folds, seed)]
    return CvReport(hyperparams, tuple(_map(_run_fold, args, jobs)))


def _cell_key(report: CvReport):
    hp = report.hyperparams
    depth = math.inf if hp.max_depth is None else hp.max_depth
    return (-report.mean.accuracy, hp.n_estimators, depth)


def grid_search(
    X, y, grid: HyperGrid = HyperGrid(), seed: int = 0, n_classes: int | None = None, jobs: int = 1
) -> tuple[HyperParams, list[CvReport]]:
    """Exhaustive search over ``grid``; the best cell has the highest mean CV
    accuracy, then fewer trees, then the shallower depth."""
    X, y = _check_xy(X, y)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    cells = grid.cells()
    if X.shape[0] < grid.cv_folds:
        raise ValueError(f"{X.shape[0]} samples cannot fill {grid.cv_folds} folds")
    fold_sets = fold_assignment(X.shape[0], grid.cv_folds, seed)
    args = [(X, y, hp, seed, n_classes, val) for hp in cells for val in fold_sets]
    scores = _map(_run_fold, args, jobs)
    k = grid.cv_folds
    reports = [CvReport(hp, tuple(scores[i * k:(i + 1) * k])) for i, hp in enumerate(cells)]
    best = min(reports, key=_cell_key)
    return best.hyperparams, reports
