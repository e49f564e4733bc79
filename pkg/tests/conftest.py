import numpy as np
import pytest

from crimpxai.dataset import default_synth_spec, encode_labels, split, synth_generate
from crimpxai.forest import HyperParams, fit_forest
from crimpxai.preprocess import PreprocessConfig, prepare_dataset

# criterion number -> (status, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status:4s}  {detail}")


class Prepared:
    """Prepared synthetic dataset with its split as index arrays."""

    def __init__(self, ds, manifest):
        self.ds = ds
        self.manifest = manifest
        self.ids, self.X, self.labels = prepare_dataset(ds, PreprocessConfig(invert=False))
        self.y = encode_labels(self.labels)
        pos = {i: k for k, i in enumerate(self.ids)}
        self.train = np.array([pos[i] for i in manifest.train_ids])
        self.test = np.array([pos[i] for i in manifest.test_ids])


@pytest.fixture(scope="session")
def synth_phase2():
    ds = synth_generate(default_synth_spec(signal_phase=2), 200, seed=0)
    return Prepared(ds, split(ds, 0.8, seed=0))


@pytest.fixture(scope="session")
def synth_forest(synth_phase2):
    p = synth_phase2
    return fit_forest(p.X[p.train], p.y[p.train], HyperParams(n_estimators=50), seed=0, n_classes=3)
