"""Declarative run configuration (JSON).

Grammar (every key optional unless noted)::

    {
      "seed": 0,                         # global seed: forest, CV, RANDOM replacement
      "data": {"curves_dir": "...", "labels": "..."},   # either data ...
      "synth": {"n_per_class": 200, "seed": 0,          # ... or synth (exactly one)
                "signal_phase": 2, "amplitude": 0.08, "noise": 0.01,
                "spec": {...}},                         # full SynthSpec overrides the shorthand
      "preprocess": {"invert": true, "window_start": 0 | "auto", "window_len": 500},
      "split": {"ratio": 0.8, "seed": 0},
      "model": {"grid": {"n_estimators": [...], "max_depth": [null, 5, ...], "cv_folds": 5},
                "fixed": {"n_estimators": 100, "max_depth": null},   # fixed skips the grid
                "reference": {"n_estimators": 150, "max_depth": 20}},
      "phases": {"boundaries": [75, 150, 345, 500]},
      "explain": {"class_policy": "predicted" | "true" | "all" | <int>,
                  "class_mode": "major" | "sub",
                  "instances": "test" | "all" | ["id", ...],
                  "svg_sample": 5},
      "selectivity": {"enabled": true, "strategies": ["ZERO", "RANDOM", "REMOVE"]},
      "out": "run",
      "jobs": 1
    }

Relative paths resolve against the config file's directory. ``max_depth``
``null`` (or ``"unlimited"``) means no depth limit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .dataset import SynthSpec, default_synth_spec
from .forest import HyperGrid, HyperParams
from .phases import PhaseBoundaries


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    curves_dir: Path | None = None
    labels: Path | None = None
    synth: SynthSpec | None = None
    synth_n_per_class: int = 200
    synth_seed: int | None = None
    invert: bool = True
    window_start: int | str = 0
    window_len: int = 500
    split_ratio: float = 0.8
    split_seed: int | None = None
    grid: HyperGrid | None = field(default_factory=HyperGrid)
    fixed: HyperParams | None = None
    reference: dict | None = None
    boundaries: PhaseBoundaries = PhaseBoundaries()
    class_policy: str | int = "predicted"
    class_mode: str = "major"
    instances: str | tuple[str, ...] = "test"
    svg_sample: int = 5
    selectivity: bool = True
    strategies: tuple[str, ...] = ("ZERO", "RANDOM", "REMOVE")
    out: Path = Path("run")
    jobs: int = 1

    @property
    def effective_split_seed(self) -> int:
        return self.seed if self.split_seed is None else self.split_seed

    @property
    def effective_synth_seed(self) -> int:
        return self.seed if self.synth_seed is None else self.synth_seed

    def with_overrides(self, seed=None, jobs=None, out=None) -> "RunConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if jobs is not None:
            changes["jobs"] = int(jobs)
        if out is not None:
            changes["out"] = Path(out)
        return replace(self, **changes)

    def snapshot(self) -> dict:
        """JSON-ready view of the resolved configuration."""
        return {
            "seed": self.seed,
            "data": None if self.curves_dir is None else {"curves_dir": str(self.curves_dir), "labels": str(self.labels)},
            "synth": None
            if self.synth is None
            else {"n_per_class": self.synth_n_per_class, "seed": self.effective_synth_seed, "spec": self.synth.to_dict()},
            "preprocess": {"invert": self.invert, "window_start": self.window_start, "window_len": self.window_len},
            "split": {"ratio": self.split_ratio, "seed": self.effective_split_seed},
            "model": {
                "grid": None
                if self.grid is None
                else {
                    "n_estimators": list(self.grid.n_estimators),
                    "max_depth": ["unlimited" if d is None else d for d in self.grid.max_depth],
                    "cv_folds": self.grid.cv_folds,
                },
                "fixed": None if self.fixed is None else self.fixed.to_dict(),
                "reference": self.reference,
            },
            "phases": {"boundaries": list(self.boundaries.edges[1:])},
            "explain": {
                "class_policy": self.class_policy,
                "class_mode": self.class_mode,
                "instances": self.instances if isinstance(self.instances, str) else list(self.instances),
                "svg_sample": self.svg_sample,
            },
            "selectivity": {"enabled": self.selectivity, "strategies": list(self.strategies)},
            "jobs": self.jobs,
        }


def _get(d: dict, key: str, path: str, kind, default=None):
    if key not in d or d[key] is None:
        return default
    value = d[key]
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{path}.{key}".lstrip("."), f"expected an integer, got {value!r}")
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(f"{path}.{key}".lstrip("."), f"expected {name}, got {value!r}")
    return value


def parse_config(doc: dict, base_dir: Path | None = None, check_paths: bool = True) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    base = Path(".") if base_dir is None else Path(base_dir)
    known = {"seed", "data", "synth", "preprocess", "split", "model", "phases", "explain", "selectivity", "out", "jobs"}
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown field")

    kw: dict[str, Any] = {"seed": _get(doc, "seed", "", int, 0), "jobs": _get(doc, "jobs", "", int, 1)}
    if kw["jobs"] < 1:
        raise ConfigError("jobs", "must be >= 1")

    data, synth = doc.get("data"), doc.get("synth")
    if (data is None) == (synth is None):
        raise ConfigError("data", "exactly one of 'data' or 'synth' must be given")
    if data is not None:
        for key in ("curves_dir", "labels"):
            raw = _get(data, key, "data", str)
            if raw is None:
                raise ConfigError(f"data.{key}", "required")
            p = (base / raw) if not Path(raw).is_absolute() else Path(raw)
            if check_paths and not p.exists():
                raise ConfigError(f"data.{key}", f"path does not exist: {p}")
            kw[key] = p
    else:
        n = _get(synth, "n_per_class", "synth", int, 200)
        if n <= 0:
            raise ConfigError("synth.n_per_class", "must be positive")
        kw["synth_n_per_class"] = n
        kw["synth_seed"] = _get(synth, "seed", "synth", int)
        try:
            if "spec" in synth:
                kw["synth"] = SynthSpec.from_dict(synth["spec"])
            else:
                kw["synth"] = default_synth_spec(
                    _get(synth, "signal_phase", "synth", int, 2),
                    _get(synth, "amplitude", "synth", float, 0.08),
                    _get(synth, "noise", "synth", float, 0.01),
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("synth.spec", str(exc)) from None
        # generated curves are already upright
        kw["invert"] = False

    pre = doc.get("preprocess", {}) or {}
    if "invert" in pre:
        kw["invert"] = _get(pre, "invert", "preprocess", bool)
    ws = pre.get("window_start", 0)
    if not (ws == "auto" or (isinstance(ws, int) and not isinstance(ws, bool) and ws >= 0)):
        raise ConfigError("preprocess.window_start", f"expected a non-negative integer or 'auto', got {ws!r}")
    kw["window_start"] = ws
    kw["window_len"] = _get(pre, "window_len", "preprocess", int, 500)

    sp = doc.get("split", {}) or {}
    ratio = _get(sp, "ratio", "split", float, 0.8)
    if not 0 < ratio < 1:
        raise ConfigError("split.ratio", f"must lie in (0, 1), got {ratio}")
    kw["split_ratio"] = ratio
    kw["split_seed"] = _get(sp, "seed", "split", int)

    model = doc.get("model", {}) or {}
    try:
        if model.get("fixed") is not None:
            kw["fixed"] = HyperParams.from_dict(model["fixed"])
            kw["grid"] = None
        elif model.get("grid") is not None:
            kw["grid"] = HyperGrid.from_dict(model["grid"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("model", str(exc)) from None
    kw["reference"] = model.get("reference")

    ph = doc.get("phases", {}) or {}
    try:
        kw["boundaries"] = PhaseBoundaries.of(ph.get("boundaries", [75, 150, 345, 500]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("phases.boundaries", str(exc)) from None
    if kw["boundaries"].x4 != kw["window_len"]:
        raise ConfigError("phases.boundaries", f"last boundary must equal preprocess.window_len ({kw['window_len']})")

    ex = doc.get("explain", {}) or {}
    policy = ex.get("class_policy", "predicted")
    if policy not in ("predicted", "true", "all") and not (isinstance(policy, int) and not isinstance(policy, bool)):
        raise ConfigError("explain.class_policy", f"expected 'predicted', 'true', 'all' or a class index, got {policy!r}")
    kw["class_policy"] = policy
    mode = ex.get("class_mode", "major")
    if mode not in ("major", "sub"):
        raise ConfigError("explain.class_mode", f"expected 'major' or 'sub', got {mode!r}")
    kw["class_mode"] = mode
    inst = ex.get("instances", "test")
    if isinstance(inst, list):
        inst = tuple(str(i) for i in inst)
    elif inst not in ("test", "all"):
        raise ConfigError("explain.instances", f"expected 'test', 'all' or a list of ids, got {inst!r}")
    kw["instances"] = inst
    kw["svg_sample"] = _get(ex, "svg_sample", "explain", int, 5)

    sel = doc.get("selectivity", {}) or {}
    kw["selectivity"] = _get(sel, "enabled", "selectivity", bool, True)
    strategies = tuple(sel.get("strategies", ("ZERO", "RANDOM", "REMOVE")))
    bad = [s for s in strategies if s not in ("ZERO", "RANDOM", "REMOVE")]
    if bad:
        raise ConfigError("selectivity.strategies", f"unknown strategy {bad[0]!r}")
    kw["strategies"] = strategies

    out = _get(doc, "out", "", str, "run")
    kw["out"] = base / out if not Path(out).is_absolute() else Path(out)
    return RunConfig(**kw)


def load_config(path: str | Path, check_paths: bool = True) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from None
    return parse_config(doc, path.parent, check_paths)
