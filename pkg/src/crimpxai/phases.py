"""Per-phase aggregation of point attributions.

Phase ``i`` covers the half-open index range ``[x_{i-1}, x_i)`` with
``x_0 = 0``, so the four phases partition the curve without overlap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .shapley import Attribution

PHASE_NAMES = ("Centring", "Rolling in", "Compression", "Springback")


@dataclass(frozen=True)
class PhaseBoundaries:
    x1: int = 75
    x2: int = 150
    x3: int = 345
    x4: int = 500

    def __post_init__(self):
        if not 0 < self.x1 < self.x2 < self.x3 < self.x4:
            raise ValueError(f"phase boundaries must satisfy 0 < x1 < x2 < x3 < x4, got {self.edges[1:]}")

    @classmethod
    def of(cls, values: Sequence[int]) -> "PhaseBoundaries":
        if len(values) != 4:
            raise ValueError(f"need exactly 4 boundaries, got {len(values)}")
        return cls(*(int(v) for v in values))

    @property
    def edges(self) -> tuple[int, int, int, int, int]:
        return (0, self.x1, self.x2, self.x3, self.x4)

    @property
    def ranges(self) -> tuple[range, range, range, range]:
        e = self.edges
        return tuple(range(e[i], e[i + 1]) for i in range(4))

    @property
    def lengths(self) -> tuple[int, int, int, int]:
        return tuple(len(r) for r in self.ranges)

    def phase_range(self, phase: int) -> range:
        if phase not in (1, 2, 3, 4):
            raise ValueError(f"phase must be in 1..4, got {phase}")
        return self.ranges[phase - 1]


DEFAULT_BOUNDARIES = PhaseBoundaries()


@dataclass(frozen=True)
class PhaseSlices:
    boundaries: PhaseBoundaries
    ranges: tuple[range, range, range, range]
    names: tuple[str, str, str, str] = PHASE_NAMES


@dataclass(frozen=True)
class PhaseImportance:
    importance: tuple[float, float, float, float]
    weights: tuple[float, float, float, float]
    top_phase: int


def slice(a: Attribution | np.ndarray, b: PhaseBoundaries = DEFAULT_BOUNDARIES) -> PhaseSlices:
    n = (a.values if isinstance(a, Attribution) else np.asarray(a)).size
    if b.x4 != n:
        raise ValueError(f"last phase boundary {b.x4} does not match attribution length {n}")
    return PhaseSlices(b, b.ranges)


def normalize_weights(importance: Sequence[float]) -> tuple[float, float, float, float]:
    """Min-max over the four phase values; all equal -> 0.5 each."""
    v = np.asarray(importance, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return (0.5,) * 4
    return tuple(float(w) for w in (v - lo) / (hi - lo))


def phase_importance(s: PhaseSlices, a: Attribution | np.ndarray) -> PhaseImportance:
    values = a.values if isinstance(a, Attribution) else np.asarray(a, dtype=float)
    if values.size != s.boundaries.x4:
        raise ValueError(f"attribution length {values.size} does not match slices ({s.boundaries.x4})")
    imp = tuple(float(values[r.start:r.stop].mean()) for r in s.ranges)
    top = int(np.argmax(imp)) + 1
    return PhaseImportance(imp, normalize_weights(imp), top)


def importance_of(a: Attribution, b: PhaseBoundaries = DEFAULT_BOUNDARIES) -> PhaseImportance:
    return phase_importance(slice(a, b), a)


@dataclass(frozen=True)
class ClassPhaseStats:
    label: str
    n: int
    mean: tuple[float, float, float, float]
    std: tuple[float, float, float, float]
    highest: int
    lowest: int


@dataclass(frozen=True)
class ClassPhaseSummary:
    classes: dict[str, ClassPhaseStats]
    warnings: tuple[str, ...] = ()

    def means(self) -> dict[str, tuple[float, float, float, float]]:
        return {k: v.mean for k, v in self.classes.items()}


def class_phase_summary(
    items: Iterable[tuple[str, PhaseImportance]],
    expected_classes: Sequence[str] = (),
) -> ClassPhaseSummary:
    """Mean and population std of each phase importance per label.

    ``items`` pairs a label (usually the true class name) with an instance's
    :class:`PhaseImportance`. Labels in ``expected_classes`` with no instance
    are left out and reported in ``warnings``.
    """
    buckets: dict[str, list[tuple[float, ...]]] = {}
    for label, imp in items:
        buckets.setdefault(str(label), []).append(imp.importance)
    if not buckets:
        raise ValueError("class_phase_summary needs at least one instance")
    order = list(expected_classes) + sorted(k for k in buckets if k not in expected_classes)
    stats = {}
    notes = []
    for label in order:
        rows = buckets.get(label)
        if not rows:
            notes.append(f"no instances for class {label}; omitted")
            continue
        arr = np.asarray(rows)
        mean = arr.mean(axis=0)
        std = arr.std(axis=0)
        stats[label] = ClassPhaseStats(
            label,
            len(rows),
            tuple(float(v) for v in mean),
            tuple(float(v) for v in std),
            int(np.argmax(mean)) + 1,
            int(np.argmin(mean)) + 1,
        )
    return ClassPhaseSummary(stats, tuple(notes))


def write_summary_csv(summary: ClassPhaseSummary, path: str | Path, boundaries: PhaseBoundaries = DEFAULT_BOUNDARIES) -> None:
    """Phases as rows, two columns (mean, std) per class."""
    labels = list(summary.classes)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phase", "indices", *(f"{lab}_{part}" for lab in labels for part in ("mean", "std"))])
        for p, (name, r) in enumerate(zip(PHASE_NAMES, boundaries.ranges)):
            row = [f"{name} ({p + 1})", f"[{r.start},{r.stop})"]
            for lab in labels:
                st = summary.classes[lab]
                row += [repr(st.mean[p]), repr(st.std[p])]
            w.writerow(row)
        w.writerow(["highest", "", *(v for lab in labels for v in (summary.classes[lab].highest, ""))])
        w.writerow(["lowest", "", *(v for lab in labels for v in (summary.classes[lab].lowest, ""))])
        w.writerow(["n", "", *(v for lab in labels for v in (summary.classes[lab].n, ""))])


def summary_text(summary: ClassPhaseSummary) -> str:
    labels = list(summary.classes)
    width = max(22, *(len(lab) + 2 for lab in labels))
    head = "phase".ljust(18) + "".join(lab.rjust(width) for lab in labels)
    lines = [head, "-" * len(head)]
    for p, name in enumerate(PHASE_NAMES):
        cells = []
        for lab in labels:
            st = summary.classes[lab]
            mark = " +" if st.highest == p + 1 else (" -" if st.lowest == p + 1 else "  ")
            cells.append(f"{st.mean[p]:.6f} ±{st.std[p]:.6f}{mark}".rjust(width))
        lines.append(f"{name} ({p + 1})".ljust(18) + "".join(cells))
    lines += [f"note: {w}" for w in summary.warnings]
    return "\n".join(lines) + "\n"

