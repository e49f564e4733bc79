"""Operator-facing SVG explanations and the per-run report directory."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .dataset import QualityLabel
from .phases import DEFAULT_BOUNDARIES, PHASE_NAMES, PhaseBoundaries

# every layout constant lives here so output bytes only depend on the RenderSpec
STYLE = {
    "font": "DejaVu Sans, Arial, sans-serif",
    "title_size": 18,
    "caption_size": 13,
    "legend_size": 11,
    "margin_left": 50,
    "margin_right": 20,
    "margin_top": 48,
    "margin_bottom": 70,
    "band_opacity": 0.35,
    "pipe_opacity": 0.75,
    "pipe_width": 14,
    "curve_width": 1.6,
    "curve_color": "#1a1a1a",
    "axis_color": "#777777",
}

LOW_COLOR = (255, 255, 204)  # light yellow
HIGH_COLOR = (189, 0, 38)  # dark red


def ramp(weight: float, low=LOW_COLOR, high=HIGH_COLOR) -> str:
    """Linear RGB interpolation; 0 -> low, 1 -> high."""
    w = min(max(float(weight), 0.0), 1.0)
    rgb = (round(lo + (hi - lo) * w) for lo, hi in zip(low, high))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def display_name(label) -> str:
    text = str(label)
    if isinstance(label, QualityLabel):
        base, sub = label.major.value, "" if label.sub is None else str(label.sub)
    elif text.rsplit("_", 1)[-1].isdigit():
        base, sub = text.rsplit("_", 1)
    else:
        base, sub = text, ""
    pretty = "OK" if base == "OK" else base.replace("_", " ").title()
    return f"{pretty} ({sub})" if sub else pretty


@dataclass(frozen=True, eq=False)
class RenderSpec:
    curve: np.ndarray
    weights: tuple[float, float, float, float]
    predicted: QualityLabel | str
    top_phase: int
    width: int = 800
    height: int = 420
    boundaries: PhaseBoundaries = DEFAULT_BOUNDARIES
    low_color: tuple[int, int, int] = LOW_COLOR
    high_color: tuple[int, int, int] = HIGH_COLOR
    instance_id: str = ""
    extra: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        c = np.array(getattr(self.curve, "values", self.curve), dtype=float).ravel()
        object.__setattr__(self, "curve", c)
        w = tuple(float(v) for v in self.weights)
        if len(w) != 4:
            raise ValueError(f"need 4 phase weights, got {len(w)}")
        if any(not 0.0 <= v <= 1.0 for v in w):
            raise ValueError(f"weights must lie in [0, 1], got {w}")
        object.__setattr__(self, "weights", w)
        if self.top_phase not in (1, 2, 3, 4):
            raise ValueError(f"top_phase must be in 1..4, got {self.top_phase}")
        if w[self.top_phase - 1] != max(w):
            raise ValueError(f"top_phase {self.top_phase} does not carry the maximal weight {w}")
        if c.size != self.boundaries.x4:
            raise ValueError(f"curve length {c.size} does not match phase boundary x4={self.boundaries.x4}")


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def render_svg(spec: RenderSpec) -> bytes:
    s = STYLE
    W, H = spec.width, spec.height
    pw = W - s["margin_left"] - s["margin_right"]
    ph = H - s["margin_top"] - s["margin_bottom"]
    if W <= 0 or H <= 0 or pw <= 0 or ph <= 0:
        raise ValueError(f"canvas {W}x{H} leaves no room for the plot")

    n = spec.curve.size
    x0, y0 = s["margin_left"], s["margin_top"]
    lo, hi = float(spec.curve.min()), float(spec.curve.max())
    span = hi - lo or 1.0

    def px(i: float) -> float:
        return x0 + pw * i / n

    # sample i sits at the centre of its index cell so bands partition the width
    def point(i: int) -> str:
        return f"{_f(px(i + 0.5))},{_f(y0 + ph * (1 - (spec.curve[i] - lo) / span))}"

    fills = [ramp(w, spec.low_color, spec.high_color) for w in spec.weights]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
        f'<text id="title" x="{_f(W / 2)}" y="{_f(s["margin_top"] - 20)}" text-anchor="middle" '
        f'font-family={quoteattr(s["font"])} font-size="{s["title_size"]}" font-weight="bold">'
        f"Predicted quality class: {escape(display_name(spec.predicted))}</text>",
    ]
    for p, (r, fill, w) in enumerate(zip(spec.boundaries.ranges, fills, spec.weights), start=1):
        a, b = px(r.start), px(r.stop)
        pts = " ".join(point(i) for i in r)
        out.append(f'<g class="phase" data-phase="{p}" data-weight="{w!r}">')
        out.append(
            f'<rect class="band" x="{_f(a)}" y="{_f(y0)}" width="{_f(b - a)}" height="{_f(ph)}" '
            f'fill="{fill}" fill-opacity="{s["band_opacity"]}"/>'
        )
        out.append(
            f'<polyline class="pipe" points="{pts}" fill="none" stroke="{fill}" '
            f'stroke-opacity="{s["pipe_opacity"]}" stroke-width="{s["pipe_width"]}" '
            'stroke-linecap="butt" stroke-linejoin="round"/>'
        )
        out.append(
            f'<text x="{_f((a + b) / 2)}" y="{_f(y0 + ph + 16)}" text-anchor="middle" '
            f'font-family={quoteattr(s["font"])} font-size="{s["legend_size"]}">({p})</text>'
        )
        out.append("</g>")
    out.append(
        f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(pw)}" height="{_f(ph)}" fill="none" stroke="{s["axis_color"]}"/>'
    )
    out.append(
        f'<polyline id="curve" points="{" ".join(point(i) for i in range(n))}" fill="none" '
        f'stroke="{s["curve_color"]}" stroke-width="{s["curve_width"]}"/>'
    )
    top = spec.top_phase
    out.append(
        f'<text id="caption" data-top-phase="{top}" x="{_f(x0)}" y="{_f(H - 30)}" '
        f'font-family={quoteattr(s["font"])} font-size="{s["caption_size"]}">'
        f"Most critical phase: ({top}) {escape(PHASE_NAMES[top - 1])}</text>"
    )
    # legend: gradient bar from low to high influence
    lx, ly, lw = W - s["margin_right"] - 220, H - 44, 120
    out += [
        "<defs>",
        '<linearGradient id="influence" x1="0" y1="0" x2="1" y2="0">',
        f'<stop offset="0" stop-color="{ramp(0.0, spec.low_color, spec.high_color)}"/>',
        f'<stop offset="1" stop-color="{ramp(1.0, spec.low_color, spec.high_color)}"/>',
        "</linearGradient>",
        "</defs>",
        f'<g id="legend" font-family={quoteattr(s["font"])} font-size="{s["legend_size"]}">',
        f'<text x="{_f(lx - 6)}" y="{_f(ly + 10)}" text-anchor="end">low influence</text>',
        f'<rect x="{_f(lx)}" y="{_f(ly)}" width="{lw}" height="12" fill="url(#influence)" stroke="{s["axis_color"]}"/>',
        f'<text x="{_f(lx + lw + 6)}" y="{_f(ly + 10)}">high influence</text>',
        "</g>",
        "</svg>",
    ]
    return ("\n".join(out) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# run report


class ReportError(OSError):
    def __init__(self, failures: Mapping[str, str]):
        self.failures = dict(failures)
        detail = "; ".join(f"{k}: {v}" for k, v in self.failures.items())
        super().__init__(f"{len(self.failures)} report file(s) could not be written: {detail}")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def emit_run_report(
    out_dir: str | Path,
    files: Mapping[str, bytes | str] | None = None,
    svgs: Mapping[str, bytes] | None = None,
    include: Sequence[str | Path] = (),
) -> Path:
    """Write a run's artifacts and an ``index.json`` with SHA-256 checksums.

    ``files`` maps relative names to contents (metrics JSON, phase summary
    CSV, selectivity CSV, split manifest, config snapshot, ...). ``svgs``
    maps instance ids to rendered documents and lands under ``svg/``.
    ``include`` lists files already inside ``out_dir`` to index as they are.
    Failed writes are collected and raised together after the rest are done.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    failures: dict[str, str] = {}
    items = dict(files or {})
    for iid, doc in sorted((svgs or {}).items()):
        items[f"svg/{iid}.svg"] = doc
    for rel, content in sorted(items.items()):
        target = out / rel
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            data = content.encode("utf-8") if isinstance(content, str) else bytes(content)
            target.write_bytes(data)
            written.append(target)
        except OSError as exc:
            failures[rel] = exc.strerror or str(exc)
    for p in include:
        p = Path(p)
        target = p if p.is_absolute() else out / p
        if target.is_file():
            written.append(target)
        else:
            failures[str(p)] = "missing"

    entries = []
    for p in sorted(set(written), key=lambda q: q.relative_to(out).as_posix()):
        entries.append({"path": p.relative_to(out).as_posix(), "sha256": sha256_file(p), "bytes": p.stat().st_size})
    index = {"files": entries, "failures": failures}
    index_path = out / "index.json"
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if failures:
        raise ReportError(failures)
    return index_path
