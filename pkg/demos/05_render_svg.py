"""
Operator view: one curve as an SVG
==================================

Colour each phase by its normalized importance and name the most critical
phase under the plot. Writes ``demo_out/explanation.svg``.
"""

from pathlib import Path

import numpy as np

from crimpxai import HyperParams, PreprocessConfig, default_synth_spec, fit_forest, prepare_dataset, synth_generate, tree_shap
from crimpxai.dataset import class_names, encode_labels
from crimpxai.phases import importance_of
from crimpxai.report import RenderSpec, render_svg

ds = synth_generate(default_synth_spec(signal_phase=2), n_per_class=40, seed=4)
ids, X, labels = prepare_dataset(ds, PreprocessConfig(invert=False))
y = encode_labels(labels)
forest = fit_forest(X[1:], y[1:], HyperParams(30), seed=0, n_classes=3, class_names=class_names())

# explain the held-back first curve for its predicted class
x = X[0]
pred = int(np.argmax(forest.predict_proba(x)))
imp = importance_of(tree_shap(forest, x, pred, ids[0]))
print("phase weights", np.round(imp.weights, 3), "top phase", imp.top_phase)

svg = render_svg(RenderSpec(x, imp.weights, forest.class_names[pred], imp.top_phase, instance_id=ids[0]))
out = Path("demo_out")
out.mkdir(exist_ok=True)
(out / "explanation.svg").write_bytes(svg)
print("wrote", out / "explanation.svg", len(svg), "bytes")
