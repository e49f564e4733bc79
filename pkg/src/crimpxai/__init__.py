"""Transparent fault detection for crimp force curves.

Random-forest classification of preprocessed force curves, exact tree
Shapley attributions aggregated over the four crimp phases, a perturbation
(selectivity) study, and SVG explanations for operators.
"""

from .dataset import (
    LabeledDataset,
    Major,
    QualityLabel,
    RawCurve,
    SplitManifest,
    SynthSpec,
    default_synth_spec,
    load_curve,
    load_manifest,
    split,
    synth_generate,
)
from .forest import Forest, HyperGrid, HyperParams, fit_forest, fit_tree, grid_search, kfold_cv, predict, predict_proba
from .metrics import ConfusionMatrix, confusion, expert_agreement, summary
from .perturb import apply_replacement, enumerate_plans, run_selectivity, selectivity_report
from .phases import PhaseBoundaries, class_phase_summary, phase_importance
from .preprocess import FeatureVector, PreprocessConfig, prepare, prepare_dataset
from .report import RenderSpec, emit_run_report, render_svg
from .shapley import Attribution, brute_force_shap, explain_batch, tree_shap

__version__ = "0.1.0"

__all__ = [
    "Attribution",
    "ConfusionMatrix",
    "FeatureVector",
    "Forest",
    "HyperGrid",
    "HyperParams",
    "LabeledDataset",
    "Major",
    "PhaseBoundaries",
    "PreprocessConfig",
    "QualityLabel",
    "RawCurve",
    "RenderSpec",
    "SplitManifest",
    "SynthSpec",
    "apply_replacement",
    "brute_force_shap",
    "class_phase_summary",
    "confusion",
    "default_synth_spec",
    "emit_run_report",
    "enumerate_plans",
    "expert_agreement",
    "explain_batch",
    "fit_forest",
    "fit_tree",
    "grid_search",
    "kfold_cv",
    "load_curve",
    "load_manifest",
    "phase_importance",
    "predict",
    "predict_proba",
    "prepare",
    "prepare_dataset",
    "render_svg",
    "run_selectivity",
    "selectivity_report",
    "split",
    "summary",
    "synth_generate",
    "tree_shap",
]
