"""
Selectivity: perturb a phase, retrain, compare
==============================================

If a phase really carries the class signal, destroying it should hurt the
retrained model far more than destroying any other phase.
"""

from crimpxai import HyperParams, PreprocessConfig, default_synth_spec, prepare_dataset, run_selectivity, split, synth_generate
from crimpxai.dataset import encode_labels
from crimpxai.perturb import PerturbationPlan, ReplacementStrategy, Strategy, selectivity_report

ds = synth_generate(default_synth_spec(signal_phase=4), n_per_class=50, seed=3)
ids, X, labels = prepare_dataset(ds, PreprocessConfig(invert=False))
y = encode_labels(labels)
manifest = split(ds, 0.8, seed=3)

# the full study is enumerate_plans(): 14 phase subsets x 3 strategies;
# single phases with zero-fill keep this demo quick
plans = [PerturbationPlan((p,), ReplacementStrategy(Strategy.ZERO)) for p in (1, 2, 3, 4)]
study = run_selectivity(X, y, ids, manifest, HyperParams(30), seed=0, plans=plans)
for r in study.results:
    print(r.plan.label, r.plan.strategy, f"accuracy {r.test_accuracy:.3f} (delta {r.delta_vs_base:+.3f})")

report = selectivity_report(study, phase_importance=[0.0, 0.0, 0.1, 1.0])
print(report.to_text())
