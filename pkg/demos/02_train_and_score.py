"""
Training a forest and scoring it
================================

Small grid search with cross-validation, then a confusion matrix on the
held-out split.
"""

import warnings

import numpy as np

from crimpxai import HyperGrid, PreprocessConfig, default_synth_spec, fit_forest, grid_search, prepare_dataset, split, synth_generate
from crimpxai.dataset import class_names, encode_labels
from crimpxai.metrics import MetricWarning, confusion, summary

ds = synth_generate(default_synth_spec(signal_phase=2), n_per_class=60, seed=1)
ids, X, labels = prepare_dataset(ds, PreprocessConfig(invert=False))
y = encode_labels(labels)
manifest = split(ds, 0.8, seed=1)
pos = {i: k for k, i in enumerate(ids)}
train = np.array([pos[i] for i in manifest.train_ids])
test = np.array([pos[i] for i in manifest.test_ids])

# a deliberately tiny grid; the default HyperGrid() is the full 5 x 5 one
grid = HyperGrid(n_estimators=(10, 30), max_depth=(None, 3), cv_folds=3)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", MetricWarning)
    best, reports = grid_search(X[train], y[train], grid, seed=0, n_classes=3)
for r in reports:
    print(r.hyperparams.n_estimators, r.hyperparams.max_depth, f"cv accuracy {r.mean.accuracy:.3f} ±{r.std.accuracy:.3f}")
print("chosen:", best)

names = class_names("major")
forest = fit_forest(X[train], y[train], best, seed=0, n_classes=3, class_names=names)
cm = confusion(y[test], forest.predict(X[test]), 3, names)
print(cm.to_text())
s = summary(cm)
print(f"accuracy {s.accuracy:.3f}  macro P {s.precision:.3f}  R {s.recall:.3f}  F1 {s.f1:.3f}")
