"""Force-curve ingestion, train/test manifests and a synthetic curve generator.

Curve files hold one force reading per line (optional ``force`` header, or an
``id,force`` two-column form). Labels live in a single ``id,major,sub`` CSV.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised for unreadable or inconsistent dataset files."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class Major(str, enum.Enum):
    OK = "OK"
    MISSING_STRANDS = "MISSING_STRANDS"
    CRIMPED_INSULATION = "CRIMPED_INSULATION"


@dataclass(frozen=True, order=True)
class QualityLabel:
    major: Major
    sub: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "major", Major(self.major))
        if self.sub is not None:
            if self.major is not Major.MISSING_STRANDS:
                raise ValueError(f"sub-class only valid for MISSING_STRANDS, got {self.major.value}")
            if self.sub not in (1, 2, 3):
                raise ValueError(f"missing-strand count must be 1, 2 or 3, got {self.sub}")

    @classmethod
    def parse(cls, major: str, sub: str | int | None = None) -> "QualityLabel":
        token = major.strip()
        try:
            m = Major(token)
        except ValueError:
            raise ValueError(f"unknown label token {token!r}") from None
        if sub is None or (isinstance(sub, str) and not sub.strip()):
            return cls(m)
        return cls(m, int(sub))

    def __str__(self) -> str:
        return self.major.value if self.sub is None else f"{self.major.value}_{self.sub}"


@dataclass(frozen=True, eq=False)
class RawCurve:
    id: str
    samples: np.ndarray
    source_meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float, copy=True).ravel()
        if s.size == 0:
            raise ValueError(f"curve {self.id!r} has no samples")
        if not np.all(np.isfinite(s)):
            raise ValueError(f"curve {self.id!r} contains non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, RawCurve):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.samples, other.samples)

    def __hash__(self):
        return hash(self.id)

    def with_samples(self, samples) -> "RawCurve":
        return RawCurve(self.id, samples, self.source_meta)


@dataclass(frozen=True)
class LabeledDataset:
    records: tuple[tuple[RawCurve, QualityLabel], ...] = ()
    # ground-truth signal phase per label name; only set for synthetic data
    signal_phases: Mapping[str, int | None] = field(default_factory=dict)

    def __post_init__(self):
        records = tuple(self.records)
        seen = set()
        for curve, _ in records:
            if curve.id in seen:
                raise DatasetError(f"duplicate curve id {curve.id!r}")
            seen.add(curve.id)
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [c.id for c, _ in self.records]

    @property
    def labels(self) -> list[QualityLabel]:
        return [lab for _, lab in self.records]

    @property
    def class_counts(self) -> dict[Major, int]:
        return dict(Counter(lab.major for _, lab in self.records))

    @property
    def label_counts(self) -> dict[QualityLabel, int]:
        return dict(Counter(lab for _, lab in self.records))

    def subset(self, ids) -> "LabeledDataset":
        wanted = set(ids)
        return LabeledDataset(tuple(r for r in self.records if r[0].id in wanted), self.signal_phases)


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    ratio: float
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]

    def __post_init__(self):
        tr, te = set(self.train_ids), set(self.test_ids)
        if tr & te:
            raise ValueError("train and test ids overlap")

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "ratio": self.ratio,
                "train_ids": list(self.train_ids),
                "test_ids": list(self.test_ids),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        d = json.loads(text)
        return cls(int(d["seed"]), float(d["ratio"]), tuple(d["train_ids"]), tuple(d["test_ids"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SplitManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# file I/O


def load_curve(path: str | Path, curve_id: str | None = None) -> RawCurve:
    """Read one curve file.

    The id is the filename stem unless the file uses the ``id,force`` layout
    or ``curve_id`` is given.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise DatasetError(f"cannot read curve file: {exc.strerror or exc}", path) from exc

    lines = text.splitlines()
    values: list[float] = []
    file_id = None
    two_col = False
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if not values and not header_seen:
            header = line.lower().replace(" ", "")
            if header in ("force", "id,force"):
                header_seen = True
                two_col = header == "id,force"
                continue
        if two_col:
            parts = line.split(",")
            if len(parts) != 2:
                raise DatasetError(f"expected 'id,force', got {line!r}", path, lineno)
            row_id, token = parts[0].strip(), parts[1].strip()
            if file_id is None:
                file_id = row_id
            elif row_id != file_id:
                raise DatasetError(f"mixed ids {file_id!r} and {row_id!r} in one file", path, lineno)
        else:
            token = line
        try:
            v = float(token)
        except ValueError:
            raise DatasetError(f"non-numeric force value {token!r}", path, lineno) from None
        if not math.isfinite(v):
            raise DatasetError(f"non-finite force value {token!r}", path, lineno)
        values.append(v)

    if not values:
        raise DatasetError("curve file contains no force values", path)
    cid = curve_id or file_id or path.stem
    return RawCurve(cid, np.asarray(values))


def save_curve(curve: RawCurve, path: str | Path) -> None:
    # repr() round-trips float64 exactly
    body = "\n".join(repr(float(v)) for v in curve.samples)
    Path(path).write_text("force\n" + body + "\n", encoding="utf-8")


def read_labels(path: str | Path) -> dict[str, QualityLabel]:
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read labels file: {exc.strerror or exc}", path) from exc
    labels: dict[str, QualityLabel] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["id", "major", "sub"]:
            raise DatasetError("labels file must start with header 'id,major,sub'", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            row = row + [""] * (3 - len(row))
            cid = row[0].strip()
            if cid in labels:
                raise DatasetError(f"duplicate id {cid!r} in labels file", path, lineno)
            try:
                labels[cid] = QualityLabel.parse(row[1], row[2])
            except ValueError as exc:
                raise DatasetError(str(exc), path, lineno) from None
    return labels


def write_labels(ds: LabeledDataset, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "major", "sub"])
        for curve, lab in ds.records:
            w.writerow([curve.id, lab.major.value, "" if lab.sub is None else lab.sub])


def load_manifest(directory: str | Path, labels: str | Path) -> LabeledDataset:
    """Load every ``*.csv`` curve in ``directory`` and attach its label.

    Records are ordered by curve id so the result does not depend on
    directory listing order.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError("curve directory does not exist", directory)
    label_map = read_labels(labels)
    labels_path = Path(labels).resolve()
    curves = [
        load_curve(p)
        for p in sorted(directory.glob("*.csv"))
        if p.resolve() != labels_path
    ]
    ids = Counter(c.id for c in curves)
    dupes = sorted(i for i, n in ids.items() if n > 1)
    if dupes:
        raise DatasetError(f"duplicate curve ids: {', '.join(dupes)}", directory)
    unlabeled = sorted(c.id for c in curves if c.id not in label_map)
    if unlabeled:
        raise DatasetError(f"{len(unlabeled)} curve(s) without label: {', '.join(unlabeled)}", labels)
    curves.sort(key=lambda c: c.id)
    return LabeledDataset(tuple((c, label_map[c.id]) for c in curves))


def save_dataset(ds: LabeledDataset, directory: str | Path, labels_name: str = "labels.csv") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    curves_dir = directory / "curves"
    curves_dir.mkdir(exist_ok=True)
    for curve, _ in ds.records:
        save_curve(curve, curves_dir / f"{curve.id}.csv")
    labels_path = directory / labels_name
    write_labels(ds, labels_path)
    return labels_path


# ---------------------------------------------------------------------------
# splitting


def split(ds: LabeledDataset, ratio: float = 0.8, seed: int = 0) -> SplitManifest:
    """Uniform random train/test split.

    The test partition gets ``ceil((1 - ratio) * N)`` records, the train
    partition the rest (1617 curves at 0.8 -> 1293 / 324).
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    n = len(ds)
    if n < 2:
        raise ValueError(f"need at least 2 records to split, got {n}")
    # round() first so 10 * (1 - 0.8) = 1.9999999999999996 counts as 2
    n_test = math.ceil(round((1.0 - ratio) * n, 9))
    n_test = min(max(n_test, 1), n - 1)
    ids = sorted(ds.ids)
    perm = np.random.default_rng(seed).permutation(n)
    test = sorted(ids[i] for i in perm[:n_test])
    train = sorted(ids[i] for i in perm[n_test:])
    return SplitManifest(int(seed), float(ratio), tuple(train), tuple(test))


# ---------------------------------------------------------------------------
# synthetic curves

DEFAULT_BOUNDARIES = (75, 150, 345, 500)


@dataclass(frozen=True)
class ClassShape:
    """Per-class distortion: a raised-cosine bump of ``amplitude`` (in template
    units, template peak = 1) spanning ``phase``. ``phase=None`` means no
    distortion."""

    label: QualityLabel
    phase: int | None = None
    amplitude: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    classes: tuple[ClassShape, ...]
    boundaries: tuple[int, int, int, int] = DEFAULT_BOUNDARIES
    noise: float = 0.01
    scale: float = 1000.0

    def to_dict(self) -> dict:
        return {
            "boundaries": list(self.boundaries),
            "noise": self.noise,
            "scale": self.scale,
            "classes": [
                {
                    "major": c.label.major.value,
                    "sub": c.label.sub,
                    "phase": c.phase,
                    "amplitude": c.amplitude,
                }
                for c in self.classes
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthSpec":
        classes = tuple(
            ClassShape(QualityLabel.parse(c["major"], c.get("sub")), c.get("phase"), float(c.get("amplitude", 0.0)))
            for c in d["classes"]
        )
        return cls(
            classes,
            tuple(d.get("boundaries", DEFAULT_BOUNDARIES)),
            float(d.get("noise", 0.01)),
            float(d.get("scale", 1000.0)),
        )


def default_synth_spec(signal_phase: int = 2, amplitude: float = 0.08, noise: float = 0.01) -> SynthSpec:
    """OK plus two fault classes whose signal sits in the same phase with
    opposite sign (missing strands: weaker force, crimped insulation: stronger)."""
    return SynthSpec(
        (
            ClassShape(QualityLabel(Major.OK)),
            ClassShape(QualityLabel(Major.MISSING_STRANDS), signal_phase, -amplitude),
            ClassShape(QualityLabel(Major.CRIMPED_INSULATION), signal_phase, amplitude),
        ),
        noise=noise,
    )


def crimp_template(boundaries: Sequence[int] = DEFAULT_BOUNDARIES) -> np.ndarray:
    """Four-phase reference shape on ``boundaries[-1]`` points, peak 1.0 at the
    last Compression index."""
    x1, x2, x3, x4 = boundaries
    knots_x = [0, x1, x1 + 0.4 * (x2 - x1), x2, x3 - 1, min(x3 + 0.2 * (x4 - x3), x4 - 1), x4 - 1]
    knots_y = [0.0, 0.10, 0.20, 0.22, 1.0, 0.15, 0.0]
    return np.interp(np.arange(x4), knots_x, knots_y)


def _phase_range(boundaries: Sequence[int], phase: int) -> tuple[int, int]:
    edges = (0, *boundaries)
    return edges[phase - 1], edges[phase]


def synth_generate(spec: SynthSpec, n_per_class: int, seed: int = 0) -> LabeledDataset:
    """Template + phase-confined bump + i.i.d. Gaussian noise, clipped at 0."""
    if n_per_class <= 0:
        raise ValueError(f"n_per_class must be positive, got {n_per_class}")
    if not spec.classes:
        raise ValueError("synthetic spec defines no classes")
    b = tuple(int(v) for v in spec.boundaries)
    if not (0 < b[0] < b[1] < b[2] < b[3]):
        raise ValueError(f"boundaries must be strictly increasing and positive: {b}")
    if spec.noise < 0:
        raise ValueError("noise amplitude must be non-negative")

    template = crimp_template(b)
    rng = np.random.default_rng(seed)
    records = []
    truth: dict[str, int | None] = {}
    for shape in spec.classes:
        base = template.copy()
        if shape.phase is not None:
            if shape.phase not in (1, 2, 3, 4):
                raise ValueError(f"distortion phase must be in 1..4, got {shape.phase}")
            lo, hi = _phase_range(b, shape.phase)
            base[lo:hi] += shape.amplitude * np.hanning(hi - lo)
        truth[str(shape.label)] = shape.phase
        prefix = f"synth_{str(shape.label).lower()}"
        for i in range(n_per_class):
            curve = base + spec.noise * rng.standard_normal(base.size) if spec.noise else base.copy()
            curve = np.clip(curve, 0.0, None) * spec.scale
            records.append((RawCurve(f"{prefix}_{i:04d}", curve), shape.label))
    return LabeledDataset(tuple(records), truth)


# ---------------------------------------------------------------------------
# class index encoding

CLASS_MODES = {
    # the three major classes
    "major": ("OK", "MISSING_STRANDS", "CRIMPED_INSULATION"),
    # missing strands split by strand count
    "sub": ("OK", "MISSING_STRANDS_1", "MISSING_STRANDS_2", "MISSING_STRANDS_3", "CRIMPED_INSULATION"),
}


def class_names(mode: str = "major") -> tuple[str, ...]:
    try:
        return CLASS_MODES[mode]
    except KeyError:
        raise ValueError(f"unknown class mode {mode!r}; choose from {sorted(CLASS_MODES)}") from None


def label_name(label: QualityLabel, mode: str = "major") -> str:
    if mode == "major":
        return label.major.value
    if label.major is Major.MISSING_STRANDS and label.sub is None:
        raise ValueError("5-class mode needs a strand count for every MISSING_STRANDS label")
    return str(label)


def encode_labels(labels: Sequence[QualityLabel], mode: str = "major") -> np.ndarray:
    index = {name: i for i, name in enumerate(class_names(mode))}
    return np.array([index[label_name(lab, mode)] for lab in labels], dtype=np.intp)
