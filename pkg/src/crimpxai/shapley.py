"""Exact Shapley attributions for forest class probabilities.

Absent features are marginalized the path-dependent way: at a split on an
absent feature both branches are followed, weighted by the share of training
samples that went each way. ``tree_shap`` computes the values with the
polynomial-time path recursion; ``brute_force_shap`` enumerates coalitions
and exists to check it.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .forest import LEAF, Forest, Tree, predict_proba

MAX_BRUTE_FORCE_FEATURES = 20


@dataclass(frozen=True, eq=False)
class Attribution:
    instance_id: str
    class_index: int
    values: np.ndarray
    base_value: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def output(self) -> float:
        """base_value + sum of attributions, i.e. the explained probability."""
        return float(self.base_value + self.values.sum())


def _check(f: Forest, x, class_index: int | None) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != f.n_features:
        raise ValueError(f"instance has {x.size} features, forest expects {f.n_features}")
    if class_index is not None and not 0 <= class_index < f.n_classes:
        raise ValueError(f"class_index {class_index} out of range for {f.n_classes} classes")
    for i, t in enumerate(f.trees):
        if t.node_sample_count is None:
            raise ValueError(f"tree {i} has no node_sample_count; path-dependent attribution needs it")
    return x


# ---------------------------------------------------------------------------
# path recursion


def _expected_value(tree: Tree) -> np.ndarray:
    cover = tree.node_sample_count
    value = tree.value
    ev = np.zeros((tree.n_nodes, tree.n_classes))
    # children always carry larger indices than their parent
    for node in range(tree.n_nodes - 1, -1, -1):
        if tree.feature[node] == LEAF:
            ev[node] = value[node]
        else:
            l, r = tree.left[node], tree.right[node]
            ev[node] = (cover[l] * ev[l] + cover[r] * ev[r]) / cover[node]
    return ev[0]


def _tree_shap_all_classes(tree: Tree, x: np.ndarray) -> np.ndarray:
    """(D, C) attributions of one tree for every class at once."""
    feature = tree.feature.tolist()
    threshold = tree.threshold.tolist()
    left = tree.left.tolist()
    right = tree.right.tolist()
    cover = tree.node_sample_count.tolist()
    value = tree.value
    # per-feature scalar weights per leaf, folded into phi afterwards
    contrib: dict[tuple[int, int], float] = {}

    def unwound_sum(pw, zeros, ones, depth, i):
        one, zero = ones[i], zeros[i]
        nxt = pw[depth]
        total = 0.0
        for j in range(depth - 1, -1, -1):
            if one != 0.0:
                tmp = nxt * (depth + 1) / ((j + 1) * one)
                total += tmp
                nxt = pw[j] - tmp * zero * (depth - j) / (depth + 1)
            else:
                total += pw[j] * (depth + 1) / (zero * (depth - j))
        return total

    def unwind(feats, zeros, ones, pw, depth, i):
        one, zero = ones[i], zeros[i]
        nxt = pw[depth]
        for j in range(depth - 1, -1, -1):
            if one != 0.0:
                tmp = pw[j]
                pw[j] = nxt * (depth + 1) / ((j + 1) * one)
                nxt = tmp - pw[j] * zero * (depth - j) / (depth + 1)
            else:
                pw[j] = pw[j] * (depth + 1) / (zero * (depth - j))
        del feats[i], zeros[i], ones[i]
        pw.pop()

    def recurse(node, feats, zeros, ones, pw, pz, po, pf):
        # extend the path by one element (feature pf with fractions pz, po)
        feats, zeros, ones, pw = feats + [pf], zeros + [pz], ones + [po], pw + [1.0 if not pw else 0.0]
        depth = len(pw) - 1
        for j in range(depth - 1, -1, -1):
            pw[j + 1] += po * pw[j] * (j + 1) / (depth + 1)
            pw[j] = pz * pw[j] * (depth - j) / (depth + 1)

        f = feature[node]
        if f == LEAF:
            for i in range(1, depth + 1):
                w = unwound_sum(pw, zeros, ones, depth, i) * (ones[i] - zeros[i])
                key = (feats[i], node)
                contrib[key] = contrib.get(key, 0.0) + w
            return

        if x[f] <= threshold[node]:
            hot, cold = left[node], right[node]
        else:
            hot, cold = right[node], left[node]
        iz = io = 1.0
        # a feature already on the path is removed and re-added with merged fractions
        if f in feats[1:]:
            k = feats.index(f, 1)
            iz, io = zeros[k], ones[k]
            unwind(feats, zeros, ones, pw, depth, k)
        w = cover[node]
        recurse(hot, feats, zeros, ones, pw, iz * cover[hot] / w, io, f)
        recurse(cold, feats, zeros, ones, pw, iz * cover[cold] / w, 0.0, f)

    recurse(0, [], [], [], [], 1.0, 1.0, -1)

    phi = np.zeros((tree.n_features, tree.n_classes))
    for (feat, leaf), w in contrib.items():
        phi[feat] += w * value[leaf]
    return phi


def forest_shap_all_classes(f: Forest, x) -> tuple[np.ndarray, np.ndarray]:
    """Attributions for every class: ``(phi[D, C], base[C])``, each the mean
    over trees."""
    x = _check(f, x, None)
    phi = np.zeros((f.n_features, f.n_classes))
    base = np.zeros(f.n_classes)
    for t in f.trees:
        phi += _tree_shap_all_classes(t, x)
        base += _expected_value(t)
    n = len(f.trees)
    return phi / n, base / n


def tree_shap(f: Forest, x, class_index: int, instance_id: str = "") -> Attribution:
    x = _check(f, x, class_index)
    phi, base = forest_shap_all_classes(f, x)
    return Attribution(instance_id, class_index, phi[:, class_index], float(base[class_index]))


# ---------------------------------------------------------------------------
# coalition enumeration oracle


def _coalition_values(tree: Tree, x: np.ndarray, masks: np.ndarray, class_index: int) -> np.ndarray:
    """v(T) for every coalition bitmask in ``masks``: the tree output with
    features outside T integrated out by training-sample routing."""
    cover = tree.node_sample_count
    value = tree.value[:, class_index]

    def ev(node):
        f = tree.feature[node]
        if f == LEAF:
            return np.full(masks.shape, value[node])
        l, r = tree.left[node], tree.right[node]
        vl, vr = ev(l), ev(r)
        known = (masks >> f) & 1 == 1
        follow = vl if x[f] <= tree.threshold[node] else vr
        marginal = (cover[l] * vl + cover[r] * vr) / cover[node]
        return np.where(known, follow, marginal)

    return ev(0)


def brute_force_shap(f: Forest, x, class_index: int, instance_id: str = "") -> Attribution:
    """Shapley values by summing weighted marginal contributions over all
    2^D coalitions. Exponential; D <= 20 only."""
    x = _check(f, x, class_index)
    D = f.n_features
    if D > MAX_BRUTE_FORCE_FEATURES:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE_FEATURES} features, got {D}")
    masks = np.arange(1 << D, dtype=np.int64)
    v = np.zeros(masks.size)
    for t in f.trees:
        v += _coalition_values(t, x, masks, class_index)
    v /= len(f.trees)

    sizes = np.array([bin(m).count("1") for m in range(1 << D)])
    fact = [math.factorial(k) for k in range(D + 1)]
    weight_by_size = np.array([fact[s] * fact[D - s - 1] / fact[D] if s < D else 0.0 for s in range(D + 1)])
    phi = np.zeros(D)
    for i in range(D):
        without = masks[(masks >> i) & 1 == 0]
        phi[i] = np.sum(weight_by_size[sizes[without]] * (v[without | (1 << i)] - v[without]))
    return Attribution(instance_id, class_index, phi, float(v[0]))


# ---------------------------------------------------------------------------
# batches

PREDICTED = "predicted"
ALL = "all"


def _explain_one(f: Forest, x: np.ndarray, iid: str, policy) -> list[Attribution]:
    phi, base = forest_shap_all_classes(f, x)
    if policy == PREDICTED:
        classes = [int(np.argmax(predict_proba(f, x)))]
    elif policy == ALL:
        classes = range(f.n_classes)
    else:
        classes = [int(policy)]
    return [Attribution(iid, c, phi[:, c], float(base[c])) for c in classes]


def explain_batch(
    f: Forest,
    X,
    class_policy: str | int = PREDICTED,
    ids: Sequence[str] | None = None,
    jobs: int = 1,
) -> list[Attribution]:
    """One attribution per instance (per class for ``"all"``), in input order.

    ``class_policy`` is ``"predicted"``, ``"all"`` or a fixed class index.
    """
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return []
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if class_policy not in (PREDICTED, ALL):
        c = int(class_policy)
        if not 0 <= c < f.n_classes:
            raise ValueError(f"class_index {c} out of range for {f.n_classes} classes")
    ids = [str(i) for i in range(X.shape[0])] if ids is None else list(ids)
    if len(ids) != X.shape[0]:
        raise ValueError("ids and X disagree in length")
    if jobs <= 1:
        parts = [_explain_one(f, x, i, class_policy) for x, i in zip(X, ids)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_explain_one, [f] * len(ids), list(X), ids, [class_policy] * len(ids)))
    return [a for part in parts for a in part]


def write_attributions(attrs: Iterable[Attribution], path: str | Path) -> None:
    attrs = list(attrs)
    D = attrs[0].values.size if attrs else 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "class_index", "base_value", *(f"s_{i}" for i in range(D))])
        for a in attrs:
            w.writerow([a.instance_id, a.class_index, repr(a.base_value), *(repr(float(v)) for v in a.values)])


def read_attributions(path: str | Path) -> list[Attribution]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [Attribution(r[0], int(r[1]), np.array(r[3:], dtype=float), float(r[2])) for r in reader]
