import json

import pytest

from crimpxai.cli import main
from crimpxai.config import ConfigError, parse_config


def write_config(tmp_path, **over):
    doc = {
        "seed": 1,
        "synth": {"n_per_class": 20, "signal_phase": 2},
        "model": {"fixed": {"n_estimators": 8, "max_depth": None}},
        "explain": {"svg_sample": 2},
        "out": "run",
    }
    doc.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def run_all(cfg, out=None, extra=()):
    args = ["--config", str(cfg)] + (["--out", str(out)] if out else [])
    for cmd in ("prepare", "train", "explain", "selectivity", "report"):
        assert main([cmd, *args, *extra]) == 0, cmd


def test_end_to_end_synthetic(tmp_path, capsys):
    cfg = write_config(tmp_path)
    run_all(cfg)
    out = tmp_path / "run"
    for name in ("features.csv", "split.json", "model.json", "metrics.json", "attributions.csv",
                 "phase_summary.csv", "agreement.json", "selectivity.csv", "index.json", "synth_truth.json"):
        assert (out / name).is_file(), name
    assert len(list((out / "svg").glob("*.svg"))) == 2
    split = json.loads((out / "split.json").read_text())
    assert (len(split["train_ids"]), len(split["test_ids"])) == (48, 12)
    rows = (out / "selectivity.csv").read_text().splitlines()
    assert len(rows) == 2 + 42
    idx = json.loads((out / "index.json").read_text())
    paths = [e["path"] for e in idx["files"]]
    assert "metrics.json" in paths and "svg/" + sorted(p.name for p in (out / "svg").iterdir())[0] in paths
    assert not any(p.startswith("synth/curves/") for p in paths)
    assert "index.json" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, selectivity={"strategies": ["ZERO"]})
    run_all(cfg, tmp_path / "a")
    run_all(cfg, tmp_path / "b")
    a = json.loads((tmp_path / "a" / "index.json").read_text())
    b = json.loads((tmp_path / "b" / "index.json").read_text())
    assert a == b


def test_strategy_filter(tmp_path):
    cfg = write_config(tmp_path)
    args = ["--config", str(cfg)]
    for cmd in ("prepare", "train"):
        assert main([cmd, *args]) == 0
    assert main(["selectivity", *args, "--strategy", "REMOVE"]) == 0
    rows = (tmp_path / "run" / "selectivity.csv").read_text().splitlines()
    assert len(rows) == 2 + 14
    assert all(r.startswith("REMOVE,") for r in rows[2:])
    assert main(["selectivity", *args, "--strategy", "ZERO", "--format", "json"]) == 0
    doc = json.loads((tmp_path / "run" / "selectivity.json").read_text())
    assert len(doc["results"]) == 14


def test_explain_instances_and_unknown_id(tmp_path, capsys):
    cfg = write_config(tmp_path)
    args = ["--config", str(cfg)]
    for cmd in ("prepare", "train"):
        assert main([cmd, *args]) == 0
    assert main(["explain", *args, "--instances", "synth_ok_0000", "synth_crimped_insulation_0003"]) == 0
    svgs = sorted(p.name for p in (tmp_path / "run" / "svg").iterdir())
    assert svgs == ["synth_crimped_insulation_0003.svg", "synth_ok_0000.svg"]
    capsys.readouterr()
    assert main(["explain", *args, "--instances", "nope"]) == 1
    err = capsys.readouterr().err
    assert "nope" in err and "60 known ids" in err


@pytest.mark.filterwarnings("ignore::crimpxai.metrics.MetricWarning")
def test_grid_mode_records_reference(tmp_path):
    cfg = write_config(
        tmp_path,
        synth={"n_per_class": 10},
        model={"grid": {"n_estimators": [2, 4], "max_depth": [None, 2], "cv_folds": 2},
               "reference": {"n_estimators": 3, "max_depth": 2}},
    )
    for cmd in ("prepare", "train"):
        assert main([cmd, "--config", str(cfg)]) == 0
    doc = json.loads((tmp_path / "run" / "cv_report.json").read_text())
    assert doc["mode"] == "grid" and len(doc["cells"]) == 4
    assert doc["reference"]["n_estimators_in_grid"] is False
    assert doc["reference"]["max_depth_in_grid"] is True


def test_missing_data_dir(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": {"curves_dir": "nowhere", "labels": "labels.csv"}}))
    assert main(["prepare", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "data.curves_dir" in err and "nowhere" in err


def test_commands_need_previous_steps(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["train", "--config", str(cfg)]) == 1
    assert "run 'prepare' first" in capsys.readouterr().err


def test_public_layout_prepare(tmp_path):
    # curves stored as negative forces with a lead-in, like machine exports
    curves = tmp_path / "data" / "curves"
    curves.mkdir(parents=True)
    rows = ["id,major,sub"]
    for k in range(10):
        values = [0.0] * 30 + [-(i % 97) - k for i in range(520)]
        (curves / f"w{k}.csv").write_text("force\n" + "\n".join(map(str, values)) + "\n")
        rows.append(f"w{k},{'OK' if k % 2 else 'MISSING_STRANDS'},{'' if k % 2 else '1'}")
    (tmp_path / "data" / "labels.csv").write_text("\n".join(rows) + "\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "data": {"curves_dir": "data/curves", "labels": "data/labels.csv"},
        "preprocess": {"window_start": "auto"},
        "out": "run",
    }))
    assert main(["prepare", "--config", str(cfg)]) == 0
    snap = json.loads((tmp_path / "run" / "config.json").read_text())
    assert 0 <= snap["preprocess"]["window_start_resolved"] <= 50
    header = (tmp_path / "run" / "features.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 2 + 500


@pytest.mark.parametrize(
    "doc, field",
    [
        ({}, "data"),
        ({"synth": {}, "bogus": 1}, "bogus"),
        ({"synth": {}, "split": {"ratio": 1.0}}, "split.ratio"),
        ({"synth": {}, "phases": {"boundaries": [75, 150, 345, 400]}}, "phases.boundaries"),
        ({"synth": {}, "explain": {"class_policy": "best"}}, "explain.class_policy"),
        ({"synth": {}, "selectivity": {"strategies": ["SHUFFLE"]}}, "selectivity.strategies"),
        ({"synth": {}, "preprocess": {"window_start": -3}}, "preprocess.window_start"),
        ({"synth": {}, "seed": True}, "seed"),
    ],
)
def test_config_errors_name_field(doc, field):
    with pytest.raises(ConfigError) as err:
        parse_config(doc, check_paths=False)
    assert err.value.field_path == field


def test_config_defaults():
    cfg = parse_config({"synth": {}})
    assert cfg.grid.n_estimators == (50, 100, 200, 300, 400)
    assert cfg.invert is False and cfg.split_ratio == 0.8
    assert cfg.with_overrides(seed=5).effective_split_seed == 5
