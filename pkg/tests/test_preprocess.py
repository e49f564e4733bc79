import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crimpxai.dataset import LabeledDataset, Major, QualityLabel, RawCurve, crimp_template
from crimpxai.preprocess import (
    PreprocessConfig,
    invert,
    minmax_scale,
    prepare,
    prepare_dataset,
    propose_window_start,
    window,
    zero_baseline,
)


def test_small_example():
    cfg = PreprocessConfig(invert=True, window_start=0, window_len=3)
    fv = prepare(RawCurve("a", [0.0, -2.0, -4.0, -1.0]), cfg)
    assert fv.id == "a"
    np.testing.assert_allclose(fv.values, [0.0, 0.5, 1.0])


def test_window_offset():
    cfg = PreprocessConfig(invert=False, window_start=2, window_len=2)
    np.testing.assert_allclose(prepare(RawCurve("a", [9, 9, 1, 3, 9]), cfg).values, [0.0, 1.0])


def test_window_too_long_names_lengths():
    cfg = PreprocessConfig(window_start=10, window_len=500)
    with pytest.raises(ValueError, match=r"\[10, 510\).*length 400"):
        prepare(RawCurve("short", np.zeros(400)), cfg)


def test_constant_curve_maps_to_zeros():
    fv = prepare(RawCurve("flat", np.full(600, 3.5)))
    assert len(fv) == 500
    assert not fv.values.any()


def test_zero_curve_invert_is_identity():
    c = RawCurve("z", np.zeros(5))
    assert invert(c).samples.tobytes() == c.samples.tobytes()


def test_steps_individually():
    c = RawCurve("a", [3.0, 1.0, 2.0])
    assert invert(c).samples.tolist() == [-3.0, -1.0, -2.0]
    assert zero_baseline(c).samples.tolist() == [2.0, 0.0, 1.0]
    assert window(c, PreprocessConfig(window_start=1, window_len=2)).samples.tolist() == [1.0, 2.0]
    assert minmax_scale(c).values.tolist() == [1.0, 0.0, 0.5]


def test_config_validation():
    with pytest.raises(ValueError):
        PreprocessConfig(window_start=-1)
    with pytest.raises(ValueError):
        PreprocessConfig(window_len=0)


def test_prepare_dataset_matrix():
    ds = LabeledDataset(
        (
            (RawCurve("b", -np.arange(600.0)), QualityLabel(Major.OK)),
            (RawCurve("a", -np.arange(500.0) ** 2), QualityLabel(Major.CRIMPED_INSULATION)),
        )
    )
    ids, X, labels = prepare_dataset(ds)
    assert ids == ["b", "a"]
    assert X.shape == (2, 500)
    assert labels[1].major is Major.CRIMPED_INSULATION
    ids, X, labels = prepare_dataset(LabeledDataset(()))
    assert X.shape == (0, 500) and ids == [] and labels == []


def test_propose_window_start():
    # flat lead-in of 40 samples, then the (negative) force stroke
    raw = np.concatenate([np.zeros(40), -crimp_template()[1:] * 100])
    start = propose_window_start(RawCurve("w", raw))
    assert 40 <= start <= 60
    with pytest.raises(ValueError):
        propose_window_start(RawCurve("flat", np.zeros(10)))


def _curve(kind: int, seed: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if kind == 0:
        return rng.normal(size=n).cumsum()
    if kind == 1:
        return rng.uniform(-1000, 1000, n)
    if kind == 2:
        base = -np.interp(np.linspace(0, 500, n), np.arange(500), crimp_template()) * 3000
        return base + rng.normal(0, 5, n)
    out = np.zeros(n)
    out[rng.integers(0, n) :] = rng.uniform(1, 50)
    return out - rng.uniform(0, 10)


curves = st.builds(
    _curve,
    kind=st.integers(0, 3),
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(500, 700),
)


@settings(max_examples=200, deadline=None)
@given(raw=curves, start=st.integers(0, 200), inv=st.booleans())
def test_prepared_vectors_in_unit_range(raw, start, inv):
    cfg = PreprocessConfig(invert=inv, window_start=min(start, raw.size - 500))
    v = prepare(RawCurve("c", raw), cfg).values
    assert v.shape == (500,)
    assert v.min() >= 0.0 and v.max() <= 1.0
    if np.ptp(raw[cfg.window_start : cfg.window_start + 500]) > 0:
        assert v.min() == 0.0 and v.max() == 1.0
