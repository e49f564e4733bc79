"""Command-line entry point: ``crimpxai {prepare,train,explain,selectivity,report}``.

Each command reads and writes files in the run directory (``out`` in the
config, or ``--out``)::

    prepare      features.csv, split.json, config.json [, synth/ , synth_truth.json]
    train        model.json, cv_report.json, metrics.json, confusion.txt
    explain      attributions.csv, phase_summary.{csv,json,txt}, agreement.json, svg/
    selectivity  selectivity.{csv,json}, selectivity.txt
    report       index.json (checksums of everything above)
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataset as ds_mod
from .config import ConfigError, RunConfig, load_config
from .dataset import DatasetError, QualityLabel, SplitManifest
from .forest import Forest, fit_forest, grid_search, predict
from .metrics import agreement_json, bundled_ratings, confusion, expert_agreement, metrics_json
from .perturb import Strategy, enumerate_plans, run_selectivity, selectivity_csv, selectivity_report
from .phases import class_phase_summary, importance_of, summary_text, write_summary_csv
from .preprocess import PreprocessConfig, prepare_dataset, propose_window_start
from .report import RenderSpec, emit_run_report, render_svg
from .shapley import explain_batch, write_attributions


class CommandError(RuntimeError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# feature matrix file


def write_features(path: Path, ids: Sequence[str], labels: Sequence[QualityLabel], X: np.ndarray) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label", *(f"f_{i}" for i in range(X.shape[1]))])
        for i, lab, row in zip(ids, labels, X):
            w.writerow([i, str(lab), *(repr(float(v)) for v in row)])


def _parse_label(token: str) -> QualityLabel:
    head, _, tail = token.rpartition("_")
    if tail.isdigit():
        return QualityLabel.parse(head, tail)
    return QualityLabel.parse(token)


def read_features(path: Path) -> tuple[list[str], list[QualityLabel], np.ndarray]:
    if not path.is_file():
        raise CommandError(f"{path} not found; run 'prepare' first")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    D = len(header) - 2
    ids = [r[0] for r in rows]
    labels = [_parse_label(r[1]) for r in rows]
    X = np.array([r[2:] for r in rows], dtype=float).reshape(len(rows), D)
    return ids, labels, X


def _load_split(out: Path) -> SplitManifest:
    p = out / "split.json"
    if not p.is_file():
        raise CommandError(f"{p} not found; run 'prepare' first")
    return SplitManifest.load(p)


def _load_model(out: Path) -> Forest:
    p = out / "model.json"
    if not p.is_file():
        raise CommandError(f"{p} not found; run 'train' first")
    return Forest.from_json(p.read_text(encoding="utf-8"))


def _index(ids: Sequence[str]) -> dict[str, int]:
    return {i: k for k, i in enumerate(ids)}


def _rows(ids: Sequence[str], wanted: Sequence[str]) -> np.ndarray:
    pos = _index(ids)
    unknown = [i for i in wanted if i not in pos]
    if unknown:
        raise CommandError(
            f"unknown instance id(s): {', '.join(unknown)} ({len(ids)} known ids in features.csv)"
        )
    return np.array([pos[i] for i in wanted], dtype=np.intp)


# ---------------------------------------------------------------------------
# commands


def cmd_prepare(cfg: RunConfig) -> list[Path]:
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    written = []
    snapshot = cfg.snapshot()
    if cfg.synth is not None:
        data = ds_mod.synth_generate(cfg.synth, cfg.synth_n_per_class, cfg.effective_synth_seed)
        ds_mod.save_dataset(data, out / "synth")
        truth = out / "synth_truth.json"
        truth.write_text(_dump({"signal_phases": dict(data.signal_phases)}), encoding="utf-8")
        written += [out / "synth" / "labels.csv", truth]
    else:
        data = ds_mod.load_manifest(cfg.curves_dir, cfg.labels)
    if len(data) == 0:
        raise CommandError("dataset is empty")

    start = cfg.window_start
    if start == "auto":
        proposals = [propose_window_start(c, cfg.invert) for c, _ in data.records]
        start = int(np.median(proposals))
        shortest = min(len(c) for c, _ in data.records)
        start = max(0, min(start, shortest - cfg.window_len))
        snapshot["preprocess"]["window_start_resolved"] = start
    pre = PreprocessConfig(cfg.invert, int(start), cfg.window_len)
    ids, X, labels = prepare_dataset(data, pre)

    write_features(out / "features.csv", ids, labels, X)
    manifest = ds_mod.split(data, cfg.split_ratio, cfg.effective_split_seed)
    manifest.save(out / "split.json")
    (out / "config.json").write_text(_dump(snapshot), encoding="utf-8")
    return written + [out / "features.csv", out / "split.json", out / "config.json"]


def _train_test(cfg: RunConfig):
    ids, labels, X = read_features(cfg.out / "features.csv")
    manifest = _load_split(cfg.out)
    y = ds_mod.encode_labels(labels, cfg.class_mode)
    tr = _rows(ids, manifest.train_ids)
    te = _rows(ids, manifest.test_ids)
    return ids, labels, X, y, tr, te


def cmd_train(cfg: RunConfig) -> list[Path]:
    out = cfg.out
    ids, labels, X, y, tr, te = _train_test(cfg)
    names = ds_mod.class_names(cfg.class_mode)
    C = len(names)

    cv_doc: dict = {"seed": cfg.seed}
    if cfg.fixed is not None:
        hp = cfg.fixed
        cv_doc["mode"] = "fixed"
        cv_doc["best"] = hp.to_dict()
    else:
        hp, reports = grid_search(X[tr], y[tr], cfg.grid, cfg.seed, C, cfg.jobs)
        cv_doc["mode"] = "grid"
        cv_doc["cells"] = [r.to_dict() for r in reports]
        cv_doc["best"] = hp.to_dict()
        best = next(r for r in reports if r.hyperparams == hp)
        cv_doc["best_cv"] = best.to_dict()
        if cfg.reference:
            ref_n = cfg.reference.get("n_estimators")
            ref_d = cfg.reference.get("max_depth")
            cv_doc["reference"] = {
                "hyperparams": cfg.reference,
                "n_estimators_in_grid": ref_n in cfg.grid.n_estimators,
                "max_depth_in_grid": (None if ref_d in (None, "unlimited") else ref_d) in cfg.grid.max_depth,
                "matches_best": ref_n == hp.n_estimators
                and (None if ref_d in (None, "unlimited") else ref_d) == hp.max_depth,
            }

    forest = fit_forest(X[tr], y[tr], hp, cfg.seed, C, names)
    cm = confusion(y[te], predict(forest, X[te]), C, names)
    (out / "model.json").write_text(forest.to_json(), encoding="utf-8")
    (out / "cv_report.json").write_text(_dump(cv_doc), encoding="utf-8")
    extra = {"hyperparams": hp.to_dict(), "n_train": int(tr.size), "n_test": int(te.size), "seed": cfg.seed}
    (out / "metrics.json").write_text(metrics_json(cm, extra), encoding="utf-8")
    (out / "confusion.txt").write_text(cm.to_text(), encoding="utf-8")
    return [out / n for n in ("model.json", "cv_report.json", "metrics.json", "confusion.txt")]


def _summary_labels(lab: QualityLabel) -> list[str]:
    names = [lab.major.value]
    if lab.sub is not None:
        names.append(str(lab))
    return names


def cmd_explain(cfg: RunConfig, fmt: str = "csv") -> list[Path]:
    out = cfg.out
    ids, labels, X, y, tr, te = _train_test(cfg)
    forest = _load_model(out)
    if isinstance(cfg.instances, tuple):
        rows = _rows(ids, cfg.instances)
        svg_rows = rows
    else:
        rows = te if cfg.instances == "test" else np.arange(len(ids))
        svg_rows = rows[: max(cfg.svg_sample, 0)]

    policy = cfg.class_policy
    batch_policy = "all" if policy in ("all", "true") else policy
    sel_ids = [ids[r] for r in rows]
    attrs = explain_batch(forest, X[rows], batch_policy, sel_ids, cfg.jobs)

    # one attribution per instance drives the phase summary and the picture;
    # with "all"/"true" that is the attribution of the true class
    pos = _index(ids)
    chosen = {}
    for a in attrs:
        if batch_policy != "all" or a.class_index == y[pos[a.instance_id]]:
            chosen[a.instance_id] = a
    if policy == "true":
        attrs = [chosen[i] for i in sel_ids]

    items = []
    importances = {}
    for iid in sel_ids:
        imp = importance_of(chosen[iid], cfg.boundaries)
        importances[iid] = imp
        for name in _summary_labels(labels[pos[iid]]):
            items.append((name, imp))
    present = {n for n, _ in items}
    order = [n for n in ("MISSING_STRANDS", "MISSING_STRANDS_1", "MISSING_STRANDS_2", "MISSING_STRANDS_3", "CRIMPED_INSULATION", "OK") if n in present]
    summ = class_phase_summary(items, order)

    written = []
    write_attributions(attrs, out / "attributions.csv")
    written.append(out / "attributions.csv")
    summary_doc = {
        k: {"n": v.n, "mean": list(v.mean), "std": list(v.std), "highest": v.highest, "lowest": v.lowest}
        for k, v in summ.classes.items()
    }
    (out / "phase_summary.json").write_text(_dump({"classes": summary_doc, "warnings": list(summ.warnings)}), encoding="utf-8")
    written.append(out / "phase_summary.json")
    if fmt == "csv":
        write_summary_csv(summ, out / "phase_summary.csv", cfg.boundaries)
        written.append(out / "phase_summary.csv")
    (out / "phase_summary.txt").write_text(summary_text(summ), encoding="utf-8")
    written.append(out / "phase_summary.txt")

    faults = [c for c in ("MISSING_STRANDS", "CRIMPED_INSULATION") if c in summ.classes]
    if faults:
        report = expert_agreement(summ.means(), bundled_ratings(), faults)
        (out / "agreement.json").write_text(agreement_json(report), encoding="utf-8")
        written.append(out / "agreement.json")

    pred = predict(forest, X[svg_rows]) if len(svg_rows) else []
    svg_dir = out / "svg"
    for r, p in zip(svg_rows, pred):
        iid = ids[r]
        imp = importances.get(iid) or importance_of(explain_batch(forest, X[[r]], int(p), [iid])[0], cfg.boundaries)
        spec = RenderSpec(X[r], imp.weights, forest.class_names[int(p)], imp.top_phase, boundaries=cfg.boundaries, instance_id=iid)
        svg_dir.mkdir(exist_ok=True)
        (svg_dir / f"{iid}.svg").write_bytes(render_svg(spec))
        written.append(svg_dir / f"{iid}.svg")
    return written


def cmd_selectivity(cfg: RunConfig, strategies: Sequence[str] | None = None, fmt: str = "csv") -> list[Path]:
    out = cfg.out
    ids, labels, X, y, tr, te = _train_test(cfg)
    forest = _load_model(out)
    manifest = _load_split(out)
    keep = set(strategies or cfg.strategies)
    plans = [p for p in enumerate_plans(cfg.seed) if p.strategy.kind.value in keep]
    study = run_selectivity(
        X, y, ids, manifest, forest.hyperparams, cfg.boundaries, forest.seed, plans, forest.n_classes, cfg.jobs
    )
    importance = None
    summ_path = out / "phase_summary.json"
    if summ_path.is_file():
        classes = json.loads(summ_path.read_text(encoding="utf-8"))["classes"]
        faults = [classes[c]["mean"] for c in ("MISSING_STRANDS", "CRIMPED_INSULATION") if c in classes]
        if faults:
            importance = np.mean(np.asarray(faults), axis=0)
    rep = selectivity_report(study, importance) if study.results else None

    written = []
    if fmt == "csv":
        (out / "selectivity.csv").write_text(selectivity_csv(study), encoding="utf-8")
        written.append(out / "selectivity.csv")
    else:
        doc = {
            "base_accuracy": study.base_accuracy,
            "feature_dim": study.feature_dim,
            "results": [
                {
                    "strategy": r.plan.strategy.kind.value,
                    "phases": list(r.plan.phases),
                    "accuracy": r.test_accuracy,
                    "delta_vs_base": r.delta_vs_base,
                    "feature_dim": r.feature_dim,
                    "error": r.error,
                }
                for r in study.results
            ],
        }
        (out / "selectivity.json").write_text(_dump(doc), encoding="utf-8")
        written.append(out / "selectivity.json")
    text = rep.to_text() if rep else f"base accuracy: {study.base_accuracy:.3f}\n(no plans selected)\n"
    (out / "selectivity.txt").write_text(text, encoding="utf-8")
    written.append(out / "selectivity.txt")
    return written


def cmd_report(cfg: RunConfig) -> list[Path]:
    out = cfg.out
    if not out.is_dir():
        raise CommandError(f"run directory {out} does not exist")
    files = sorted(
        p.relative_to(out)
        for p in out.rglob("*")
        if p.is_file() and p.name != "index.json" and not p.relative_to(out).as_posix().startswith("synth/curves/")
    )
    return [emit_run_report(out, include=files)]


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crimpxai", description="Transparent fault detection for crimp force curves.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--jobs", type=int, help="worker processes (default from config, 1)")
    common.add_argument("--out", help="override the run directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="format of tabular outputs")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="load or generate curves, preprocess, split")
    sub.add_parser("train", parents=[common], help="grid search / fit the forest, score the test split")
    p = sub.add_parser("explain", parents=[common], help="Shapley attributions, phase summary, SVGs")
    p.add_argument("--instances", nargs="+", help="explain these ids instead of the configured set")
    p = sub.add_parser("selectivity", parents=[common], help="perturbation study (42 retrained models)")
    p.add_argument("--strategy", action="append", choices=[s.value for s in Strategy], help="restrict to strategy (repeatable)")
    sub.add_parser("report", parents=[common], help="write index.json with checksums")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.jobs, args.out)
        if args.command == "prepare":
            written = cmd_prepare(cfg)
        elif args.command == "train":
            written = cmd_train(cfg)
        elif args.command == "explain":
            if args.instances:
                cfg = replace(cfg, instances=tuple(args.instances))
            written = cmd_explain(cfg, args.format)
        elif args.command == "selectivity":
            written = cmd_selectivity(cfg, args.strategy, args.format)
        else:
            written = cmd_report(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CommandError, DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
