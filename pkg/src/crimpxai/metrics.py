"""Confusion matrices, macro-averaged scores and expert-agreement reports."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import spearmanr


class MetricWarning(UserWarning):
    """A per-class score was undefined and set to 0."""


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows: true class, columns: predicted class
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64, copy=True)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {c.shape}")
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        names = tuple(self.class_names) or tuple(str(i) for i in range(c.shape[0]))
        if len(names) != c.shape[0]:
            raise ValueError("class_names length does not match matrix size")
        object.__setattr__(self, "class_names", names)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts) and self.class_names == other.class_names

    __hash__ = None

    def to_text(self) -> str:
        names = self.class_names
        width = max(max(len(n) for n in names), len(str(self.counts.max(initial=0))), 4)
        lines = ["true \\ pred".ljust(width) + " | " + " ".join(n.rjust(width) for n in names)]
        lines.append("-" * len(lines[0]))
        for name, row in zip(names, self.counts):
            lines.append(name.ljust(width) + " | " + " ".join(str(v).rjust(width) for v in row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Summary:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    per_class_f1: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.precision,
            "macro_recall": self.recall,
            "macro_f1": self.f1,
            "per_class_precision": list(self.per_class_precision),
            "per_class_recall": list(self.per_class_recall),
            "per_class_f1": list(self.per_class_f1),
        }


def confusion(y_true, y_pred, n_classes: int | None = None, class_names: Sequence[str] = ()) -> ConfusionMatrix:
    """Count (true, predicted) pairs. Labels are integer class indices."""
    yt = np.asarray(y_true, dtype=np.int64).ravel()
    yp = np.asarray(y_pred, dtype=np.int64).ravel()
    if yt.size != yp.size:
        raise ValueError(f"length mismatch: {yt.size} true vs {yp.size} predicted labels")
    if n_classes is None:
        n_classes = len(class_names) if class_names else int(max(yt.max(initial=-1), yp.max(initial=-1)) + 1)
    bad = (yt < 0) | (yt >= n_classes) | (yp < 0) | (yp >= n_classes)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"unknown label at position {i}: true={yt[i]}, predicted={yp[i]} (n_classes={n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (yt, yp), 1)
    return ConfusionMatrix(counts, tuple(class_names))


def _safe_ratio(num: np.ndarray, den: np.ndarray, what: str, names) -> np.ndarray:
    out = np.zeros(num.shape, dtype=float)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    if not ok.all():
        missing = ", ".join(names[i] for i in np.nonzero(~ok)[0])
        warnings.warn(f"{what} undefined for class(es) {missing}; set to 0", MetricWarning, stacklevel=3)
    return out


def summary(cm: ConfusionMatrix) -> Summary:
    c = cm.counts.astype(float)
    total = c.sum()
    if total == 0:
        raise ValueError("cannot summarise an empty confusion matrix")
    tp = np.diag(c)
    precision = _safe_ratio(tp, c.sum(axis=0), "precision", cm.class_names)
    recall = _safe_ratio(tp, c.sum(axis=1), "recall", cm.class_names)
    denom = precision + recall
    f1 = np.zeros_like(denom)
    nz = denom > 0
    f1[nz] = 2 * precision[nz] * recall[nz] / denom[nz]
    return Summary(
        accuracy=float(tp.sum() / total),
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(f1.mean()),
        per_class_precision=tuple(float(v) for v in precision),
        per_class_recall=tuple(float(v) for v in recall),
        per_class_f1=tuple(float(v) for v in f1),
    )


def metrics_json(cm: ConfusionMatrix, extra: Mapping | None = None) -> str:
    doc = {
        "class_names": list(cm.class_names),
        "confusion_matrix": cm.counts.tolist(),
        "n_instances": cm.total,
        **summary(cm).to_dict(),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# expert ratings


@dataclass(frozen=True)
class ExpertRating:
    rater: str
    quality_class: str
    scores: tuple[int, int, int, int]

    def __post_init__(self):
        scores = tuple(int(s) for s in self.scores)
        if len(scores) != 4:
            raise ValueError(f"expected 4 phase scores, got {len(scores)}")
        if any(s not in (0, 1, 2, 3) for s in scores):
            raise ValueError(f"scores must be integers in 0..3, got {scores}")
        object.__setattr__(self, "scores", scores)

    @property
    def top_phases(self) -> frozenset[int]:
        best = max(self.scores)
        return frozenset(i + 1 for i, s in enumerate(self.scores) if s == best)


def read_ratings(source: str | Path | io.TextIOBase) -> list[ExpertRating]:
    """Parse a ``rater,class,p1,p2,p3,p4`` CSV. Lines starting with ``#`` are
    comments."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    expected = ["rater", "class", "p1", "p2", "p3", "p4"]
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
        raise ValueError(f"ratings header must be {','.join(expected)}")
    return [
        ExpertRating(r["rater"].strip(), r["class"].strip(), tuple(int(r[f"p{i}"]) for i in range(1, 5)))
        for r in reader
    ]


def bundled_ratings() -> list[ExpertRating]:
    """The two process experts' phase ratings for both fault
    classes (fixture data, not produced by this package)."""
    ref = resources.files("crimpxai.data").joinpath("expert_ratings.csv")
    with ref.open("r", encoding="utf-8") as fh:
        return read_ratings(fh)


@dataclass(frozen=True)
class ExpertComparison:
    rater: str
    top_phases: frozenset[int]
    top_match: bool
    rank_correlation: float  # nan when either side is constant


@dataclass(frozen=True)
class ClassAgreement:
    quality_class: str
    model_top_phase: int
    normalized_importance: tuple[float, float, float, float]
    experts: tuple[ExpertComparison, ...]


def _normalize(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, 0.5)
    return (v - lo) / (hi - lo)


def expert_agreement(
    class_means: Mapping[str, Sequence[float]],
    ratings: Iterable[ExpertRating],
    classes: Sequence[str] | None = None,
) -> list[ClassAgreement]:
    """Compare model phase importance against expert phase ratings.

    ``class_means`` maps class name to the four per-phase mean importances.
    Only classes that appear in ``classes`` (default: every class in
    ``class_means`` except ``OK``) are compared; each must have ratings.
    The report is descriptive, there is no overall verdict.
    """
    by_class: dict[str, list[ExpertRating]] = {}
    for r in ratings:
        by_class.setdefault(r.quality_class, []).append(r)
    if classes is None:
        classes = [c for c in class_means if c != "OK"]
    missing = [c for c in classes if c not in by_class]
    if missing:
        raise ValueError(f"no expert ratings for class(es): {', '.join(missing)}")

    report = []
    for cls in classes:
        if cls not in class_means:
            raise ValueError(f"no model importance for class {cls!r}")
        means = np.asarray(class_means[cls], dtype=float)
        top = int(np.argmax(means)) + 1
        norm = _normalize(means)
        experts = []
        for r in by_class[cls]:
            scores = np.asarray(r.scores, dtype=float)
            if np.ptp(norm) == 0 or np.ptp(scores) == 0:
                rho = float("nan")
            else:
                rho = float(spearmanr(norm, scores).statistic)
            experts.append(ExpertComparison(r.rater, r.top_phases, top in r.top_phases, rho))
        report.append(ClassAgreement(cls, top, tuple(float(v) for v in norm), tuple(experts)))
    return report


def agreement_json(report: Sequence[ClassAgreement]) -> str:
    doc = [
        {
            "class": a.quality_class,
            "model_top_phase": a.model_top_phase,
            "normalized_importance": list(a.normalized_importance),
            "experts": [
                {
                    "rater": e.rater,
                    "top_phases": sorted(e.top_phases),
                    "top_match": e.top_match,
                    "rank_correlation": None if np.isnan(e.rank_correlation) else e.rank_correlation,
                }
                for e in a.experts
            ],
        }
        for a in report
    ]
    return json.dumps(doc, indent=2) + "\n"
