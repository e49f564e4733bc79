"""Raw force curve -> fixed-length, [0, 1]-scaled feature vector.

The chain is invert -> zero baseline -> window -> min-max scale, always in
that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, QualityLabel, RawCurve

DEFAULT_WINDOW_LEN = 500


@dataclass(frozen=True)
class PreprocessConfig:
    invert: bool = True
    window_start: int = 0
    window_len: int = DEFAULT_WINDOW_LEN

    def __post_init__(self):
        if self.window_start < 0:
            raise ValueError(f"window_start must be >= 0, got {self.window_start}")
        if self.window_len <= 0:
            raise ValueError(f"window_len must be positive, got {self.window_len}")

    def to_dict(self) -> dict:
        return {"invert": self.invert, "window_start": self.window_start, "window_len": self.window_len}


@dataclass(frozen=True, eq=False)
class FeatureVector:
    id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.values, other.values)

    __hash__ = None


def invert(c: RawCurve) -> RawCurve:
    # 0.0 - x keeps zeros as +0.0 so an all-zero curve stays bit-identical
    return c.with_samples(0.0 - c.samples)


def zero_baseline(c: RawCurve) -> RawCurve:
    s = c.samples
    if s.size == 0:
        raise ValueError("cannot baseline an empty curve")
    return c.with_samples(s - s.min())


def window(c: RawCurve, cfg: PreprocessConfig) -> RawCurve:
    end = cfg.window_start + cfg.window_len
    if end > len(c):
        raise ValueError(
            f"window [{cfg.window_start}, {end}) exceeds curve {c.id!r} of length {len(c)}"
        )
    return c.with_samples(c.samples[cfg.window_start:end])


def minmax_scale(c: RawCurve) -> FeatureVector:
    """Linear map onto [0, 1]; a constant curve maps to all zeros."""
    s = c.samples
    lo, hi = s.min(), s.max()
    span = hi - lo
    if span == 0:
        return FeatureVector(c.id, np.zeros_like(s))
    out = (s - lo) / span
    # guard against 1 + ulp from rounding
    np.clip(out, 0.0, 1.0, out=out)
    return FeatureVector(c.id, out)


def prepare(c: RawCurve, cfg: PreprocessConfig = PreprocessConfig()) -> FeatureVector:
    if cfg.invert:
        c = invert(c)
    return minmax_scale(window(zero_baseline(c), cfg))


def propose_window_start(
    c: RawCurve, invert_curve: bool = True, threshold: float = 0.02, run: int = 5
) -> int:
    """First index where the baselined force exceeds ``threshold * max`` for
    ``run`` consecutive samples.

    Meant as a starting point when configuring a new machine; the chosen
    value belongs in :class:`PreprocessConfig`.
    """
    if run < 1:
        raise ValueError("run must be >= 1")
    if invert_curve:
        c = invert(c)
    s = zero_baseline(c).samples
    limit = threshold * s.max()
    above = s > limit
    if s.max() == 0 or not above.any():
        raise ValueError(f"curve {c.id!r} never exceeds the contact threshold")
    # length of the current run of True values ending at each index
    counts = np.zeros(s.size, dtype=int)
    k = 0
    for i, flag in enumerate(above):
        k = k + 1 if flag else 0
        counts[i] = k
    hits = np.nonzero(counts >= run)[0]
    if hits.size == 0:
        raise ValueError(f"curve {c.id!r} has no run of {run} samples above the contact threshold")
    return int(hits[0] - run + 1)


def prepare_dataset(
    ds: LabeledDataset, cfg: PreprocessConfig = PreprocessConfig()
) -> tuple[list[str], np.ndarray, list[QualityLabel]]:
    """Prepare every curve; returns ids, an (N, window_len) matrix and labels
    in dataset order."""
    ids = ds.ids
    if not ids:
        return [], np.empty((0, cfg.window_len)), []
    X = np.vstack([prepare(c, cfg).values for c, _ in ds.records])
    return ids, X, ds.labels
