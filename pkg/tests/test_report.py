import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from crimpxai.dataset import Major, QualityLabel, crimp_template
from crimpxai.phases import PhaseBoundaries
from crimpxai.report import (
    HIGH_COLOR,
    LOW_COLOR,
    ReportError,
    RenderSpec,
    display_name,
    emit_run_report,
    ramp,
    render_svg,
    sha256_file,
)

NS = {"s": "http://www.w3.org/2000/svg"}


def _spec(**kw):
    base = dict(curve=crimp_template(), weights=(0.0, 0.2, 1.0, 0.4), predicted=QualityLabel(Major.CRIMPED_INSULATION), top_phase=3)
    base.update(kw)
    return RenderSpec(**base)


def test_ramp_endpoints():
    assert ramp(0.0) == "#ffffcc"
    assert ramp(1.0) == "#bd0026"
    assert ramp(-3) == ramp(0) and ramp(7) == ramp(1)
    assert ramp(0.5, (0, 0, 0), (255, 255, 255)) == "#808080"
    assert LOW_COLOR == (255, 255, 204) and HIGH_COLOR == (189, 0, 38)


def test_display_name():
    assert display_name(QualityLabel(Major.OK)) == "OK"
    assert display_name(QualityLabel(Major.MISSING_STRANDS, 2)) == "Missing Strands (2)"
    assert display_name("CRIMPED_INSULATION") == "Crimped Insulation"


def test_svg_structure():
    doc = render_svg(_spec())
    root = ET.fromstring(doc)
    assert root.get("width") == "800" and root.get("height") == "420"
    title = root.find("s:text[@id='title']", NS)
    assert title.text == "Predicted quality class: Crimped Insulation"
    groups = root.findall("s:g[@class='phase']", NS)
    assert [g.get("data-phase") for g in groups] == ["1", "2", "3", "4"]
    fills = [g.find("s:rect", NS).get("fill") for g in groups]
    assert fills == [ramp(0.0), ramp(0.2), ramp(1.0), ramp(0.4)]
    cap = root.find("s:text[@id='caption']", NS)
    assert cap.get("data-top-phase") == "3"
    assert cap.text == "Most critical phase: (3) Compression"
    legend = "".join(root.find("s:g[@id='legend']", NS).itertext())
    assert "low influence" in legend and "high influence" in legend
    assert len(root.find("s:polyline[@id='curve']", NS).get("points").split()) == 500


def test_bands_partition_plot_width():
    root = ET.fromstring(render_svg(_spec()))
    rects = [g.find("s:rect", NS) for g in root.findall("s:g[@class='phase']", NS)]
    xs = [(float(r.get("x")), float(r.get("width"))) for r in rects]
    for (x, w), (nx, _) in zip(xs, xs[1:]):
        assert x + w == pytest.approx(nx, abs=0.011)
    assert xs[0][0] == 50
    assert xs[-1][0] + xs[-1][1] == pytest.approx(780, abs=0.011)
    # widths follow the phase lengths 75/75/195/155 over 730 px
    assert [w for _, w in xs] == pytest.approx([730 * n / 500 for n in (75, 75, 195, 155)], abs=0.011)


def test_render_deterministic_and_escaped():
    a = render_svg(_spec(predicted="A<&>B"))
    assert a == render_svg(_spec(predicted="A<&>B"))
    ET.fromstring(a)
    assert b"A&lt;&amp;&gt;B" in a


def test_spec_validation():
    with pytest.raises(ValueError, match="maximal weight"):
        _spec(top_phase=1)
    with pytest.raises(ValueError, match="4 phase weights"):
        _spec(weights=(1.0, 0.0, 0.0))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        _spec(weights=(0.0, 0.2, 1.5, 0.4))
    with pytest.raises(ValueError, match="curve length"):
        _spec(curve=np.zeros(400))
    with pytest.raises(ValueError, match="no room"):
        render_svg(_spec(width=60))


def test_flat_curve_and_custom_boundaries():
    b = PhaseBoundaries(1, 2, 3, 4)
    doc = render_svg(RenderSpec(np.ones(4), (0.5,) * 4, "OK", 1, boundaries=b))
    root = ET.fromstring(doc)
    assert len(root.findall("s:g[@class='phase']", NS)) == 4


def test_run_report_index(tmp_path):
    svg = render_svg(_spec())
    path = emit_run_report(tmp_path, {"metrics.json": '{"a": 1}\n', "sel.csv": "x\n"}, {"c001": svg})
    idx = json.loads(path.read_text())
    assert [e["path"] for e in idx["files"]] == ["metrics.json", "sel.csv", "svg/c001.svg"]
    assert idx["failures"] == {}
    for e in idx["files"]:
        assert e["sha256"] == sha256_file(tmp_path / e["path"])
    first = path.read_bytes()
    emit_run_report(tmp_path, {"metrics.json": '{"a": 1}\n', "sel.csv": "x\n"}, {"c001": svg})
    assert path.read_bytes() == first


def test_run_report_empty_and_include(tmp_path):
    idx = json.loads(emit_run_report(tmp_path).read_text())
    assert idx == {"failures": {}, "files": []}
    (tmp_path / "model.json").write_text("{}")
    idx = json.loads(emit_run_report(tmp_path, include=["model.json"]).read_text())
    assert [e["path"] for e in idx["files"]] == ["model.json"]


def test_run_report_collects_failures(tmp_path):
    (tmp_path / "blocked").write_text("a file where a directory should be")
    with pytest.raises(ReportError) as err:
        emit_run_report(tmp_path, {"blocked/x.json": "{}", "ok.txt": "fine"}, include=["gone.txt"])
    assert set(err.value.failures) == {"blocked/x.json", "gone.txt"}
    idx = json.loads((tmp_path / "index.json").read_text())
    assert [e["path"] for e in idx["files"]] == ["ok.txt"]
