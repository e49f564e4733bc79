"""Selectivity study: perturb curve phases, retrain, compare accuracy.

Every proper non-empty subset of the four phases (14 of them) is perturbed
with each of three replacement strategies, giving 42 retrained models.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from .forest import HyperParams, fit_forest, predict
from .phases import DEFAULT_BOUNDARIES, PhaseBoundaries


class Strategy(str, enum.Enum):
    ZERO = "ZERO"
    RANDOM = "RANDOM"
    REMOVE = "REMOVE"


@dataclass(frozen=True)
class ReplacementStrategy:
    kind: Strategy
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Strategy(self.kind))
        if self.kind is Strategy.RANDOM and self.seed is None:
            raise ValueError("RANDOM replacement needs a seed")
        if self.kind is not Strategy.RANDOM and self.seed is not None:
            object.__setattr__(self, "seed", None)

    def __str__(self):
        return self.kind.value


@dataclass(frozen=True)
class PerturbationPlan:
    phases: tuple[int, ...]
    strategy: ReplacementStrategy

    def __post_init__(self):
        phases = tuple(sorted(set(int(p) for p in self.phases)))
        if not 1 <= len(phases) <= 3:
            raise ValueError(f"a plan perturbs 1 to 3 phases, got {phases}")
        if any(p not in (1, 2, 3, 4) for p in phases):
            raise ValueError(f"phases must be in 1..4, got {phases}")
        object.__setattr__(self, "phases", phases)

    @property
    def label(self) -> str:
        return "(" + ",".join(str(p) for p in self.phases) + ")"


def phase_subsets() -> list[tuple[int, ...]]:
    """The 14 proper non-empty subsets of {1, 2, 3, 4}, lexicographically."""
    return sorted(c for k in (1, 2, 3) for c in itertools.combinations((1, 2, 3, 4), k))


def enumerate_plans(random_seed: int = 0) -> list[PerturbationPlan]:
    strategies = [
        ReplacementStrategy(Strategy.ZERO),
        ReplacementStrategy(Strategy.RANDOM, random_seed),
        ReplacementStrategy(Strategy.REMOVE),
    ]
    return [PerturbationPlan(s, a) for s in phase_subsets() for a in strategies]


def _target_indices(plan: PerturbationPlan, b: PhaseBoundaries) -> np.ndarray:
    return np.concatenate([np.arange(r.start, r.stop) for r in (b.phase_range(p) for p in plan.phases)])


def apply_replacement(X, plan: PerturbationPlan, b: PhaseBoundaries = DEFAULT_BOUNDARIES) -> np.ndarray:
    """Perturbed copy of the (N, D) feature matrix.

    RANDOM draws i.i.d. uniform [0, 1) values from a stream keyed on the
    strategy seed and the plan's phases, so a plan always produces the same
    replacement values for the same input shape.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[1] != b.x4:
        raise ValueError(f"feature length {X.shape[1]} does not match phase boundary x4={b.x4}")
    idx = _target_indices(plan, b)
    kind = plan.strategy.kind
    if kind is Strategy.REMOVE:
        return np.delete(X, idx, axis=1)
    out = X.copy()
    if kind is Strategy.ZERO:
        out[:, idx] = 0.0
    else:
        rng = np.random.default_rng([plan.strategy.seed, *plan.phases])
        out[:, idx] = rng.random((X.shape[0], idx.size))
    return out


@dataclass(frozen=True)
class SelectivityResult:
    plan: PerturbationPlan
    test_accuracy: float | None
    delta_vs_base: float | None
    feature_dim: int
    error: str | None = None


@dataclass(frozen=True)
class SelectivityStudy:
    base_accuracy: float
    feature_dim: int
    results: tuple[SelectivityResult, ...]
    boundaries: PhaseBoundaries = DEFAULT_BOUNDARIES


def _accuracy(X_train, y_train, X_test, y_test, hp, seed, n_classes) -> float:
    forest = fit_forest(X_train, y_train, hp, seed, n_classes)
    return float(np.mean(predict(forest, X_test) == y_test))


def _run_plan(X, y, train, test, plan, b, hp, seed, n_classes, base):
    Xp = apply_replacement(X, plan, b)
    try:
        acc = _accuracy(Xp[train], y[train], Xp[test], y[test], hp, seed, n_classes)
    except Exception as exc:  # one failing plan must not abort the study
        return SelectivityResult(plan, None, None, Xp.shape[1], f"{type(exc).__name__}: {exc}")
    return SelectivityResult(plan, acc, acc - base, Xp.shape[1])


def run_selectivity(
    X,
    y,
    ids: Sequence[str],
    split,
    hyperparams: HyperParams,
    boundaries: PhaseBoundaries = DEFAULT_BOUNDARIES,
    seed: int = 0,
    plans: Sequence[PerturbationPlan] | None = None,
    n_classes: int | None = None,
    jobs: int = 1,
) -> SelectivityStudy:
    """Retrain on every perturbed dataset and score on the perturbed test set.

    Train and test partitions (from ``split``) get the same perturbation.
    Each model reuses ``hyperparams`` and ``seed`` from the base model.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    pos = {i: k for k, i in enumerate(ids)}
    try:
        train = np.array([pos[i] for i in split.train_ids], dtype=np.intp)
        test = np.array([pos[i] for i in split.test_ids], dtype=np.intp)
    except KeyError as exc:
        raise ValueError(f"split references unknown id {exc.args[0]!r}") from None
    if n_classes is None:
        n_classes = int(y.max()) + 1
    plans = enumerate_plans(seed) if plans is None else list(plans)

    base = _accuracy(X[train], y[train], X[test], y[test], hyperparams, seed, n_classes)
    args = [(X, y, train, test, p, boundaries, hyperparams, seed, n_classes, base) for p in plans]
    if jobs <= 1:
        results = [_run_plan(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_plan, *zip(*args)))
    return SelectivityStudy(base, X.shape[1], tuple(results), boundaries)


# ---------------------------------------------------------------------------
# reporting


@dataclass(frozen=True)
class SelectivityReport:
    base_accuracy: float
    tables: dict[int, str]  # subset size -> rendered table
    most_selective: dict[str, int | None]  # strategy -> single phase with the lowest accuracy
    verdict: str
    rank_correlation: float | None

    def to_text(self) -> str:
        parts = [f"base accuracy: {self.base_accuracy:.3f}", ""]
        for size in sorted(self.tables):
            parts += [self.tables[size], ""]
        parts.append(f"verdict: {self.verdict}")
        return "\n".join(parts) + "\n"


def _render_table(study: SelectivityStudy, size: int, strategies: Sequence[Strategy]) -> str:
    subsets = [s for s in phase_subsets() if len(s) == size]
    cell = {(r.plan.strategy.kind, r.plan.phases): r for r in study.results if len(r.plan.phases) == size}
    accs = [r.test_accuracy for r in cell.values() if r.test_accuracy is not None]
    lo = min(accs) if accs else None
    hi = max(accs) if accs else None
    lengths = study.boundaries.lengths
    header = "alpha".ljust(8) + "".join(("(" + ",".join(map(str, s)) + ")").rjust(12) for s in subsets)
    lines = [f"{size} phase(s) manipulated  [v lowest, ^ highest]", header]
    for kind in strategies:
        row = kind.value.ljust(8)
        for s in subsets:
            r = cell.get((kind, s))
            if r is None:
                row += "-".rjust(12)
            elif r.test_accuracy is None:
                row += "error".rjust(12)
            else:
                mark = "v" if r.test_accuracy == lo else ("^" if r.test_accuracy == hi else " ")
                row += f"{r.test_accuracy:.3f}{mark}".rjust(12)
        lines.append(row)
    lines.append("points".ljust(8) + "".join(str(sum(lengths[p - 1] for p in s)).rjust(12) for s in subsets))
    return "\n".join(lines)


def selectivity_report(study: SelectivityStudy, phase_importance: Sequence[float] | None = None) -> SelectivityReport:
    """Tables per subset size, plus a check of whether single-phase accuracy
    drops rank the phases the same way ``phase_importance`` does."""
    if not study.results:
        raise ValueError("no selectivity results to report")
    strategies = [s for s in Strategy if any(r.plan.strategy.kind is s for r in study.results)]
    sizes = sorted({len(r.plan.phases) for r in study.results})
    tables = {k: _render_table(study, k, strategies) for k in sizes}

    ok = [r for r in study.results if r.delta_vs_base is not None]
    if ok and all(abs(r.delta_vs_base) < 1e-12 for r in ok):
        return SelectivityReport(study.base_accuracy, tables, {s.value: None for s in strategies}, "no selective phase", None)

    most = {}
    drops = np.zeros(4)
    counts = np.zeros(4)
    for s in strategies:
        singles = sorted(
            (r for r in ok if r.plan.strategy.kind is s and len(r.plan.phases) == 1),
            key=lambda r: (r.test_accuracy, r.plan.phases),
        )
        most[s.value] = singles[0].plan.phases[0] if singles else None
        for r in singles:
            drops[r.plan.phases[0] - 1] -= r.delta_vs_base
            counts[r.plan.phases[0] - 1] += 1

    if phase_importance is None or not counts.all():
        verdict = "single-phase drops available; no importance ranking supplied" if counts.all() else "incomplete single-phase results"
        return SelectivityReport(study.base_accuracy, tables, most, verdict, None)

    drops /= counts
    imp = np.asarray(phase_importance, dtype=float)
    top_drop = int(np.argmax(drops)) + 1
    top_imp = int(np.argmax(imp)) + 1
    rho = None
    if np.ptp(drops) > 0 and np.ptp(imp) > 0:
        rho = float(spearmanr(drops, imp).statistic)
    agree = "consistent" if top_drop == top_imp else "inconsistent"
    rho_txt = "n/a" if rho is None else f"{rho:.2f}"
    verdict = (
        f"{agree}: largest mean single-phase drop at phase {top_drop}, "
        f"highest importance at phase {top_imp} (rank correlation {rho_txt})"
    )
    return SelectivityReport(study.base_accuracy, tables, most, verdict, rho)


def selectivity_csv(study: SelectivityStudy, strategies: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "phases", "accuracy", "delta_vs_base", "feature_dim"])
    w.writerow(["BASE", "", repr(study.base_accuracy), repr(0.0), study.feature_dim])
    for r in study.results:
        if strategies and r.plan.strategy.kind.value not in strategies:
            continue
        w.writerow(
            [
                r.plan.strategy.kind.value,
                r.plan.label,
                "" if r.test_accuracy is None else repr(r.test_accuracy),
                "" if r.delta_vs_base is None else repr(r.delta_vs_base),
                r.feature_dim,
            ]
        )
    return buf.getvalue()


def write_selectivity_csv(study: SelectivityStudy, path: str | Path, strategies: Sequence[str] | None = None) -> None:
    Path(path).write_text(selectivity_csv(study, strategies), encoding="utf-8")
