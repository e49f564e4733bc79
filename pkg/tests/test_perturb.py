import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crimpxai.dataset import SplitManifest
from crimpxai.forest import HyperParams
from crimpxai.perturb import (
    PerturbationPlan,
    ReplacementStrategy,
    SelectivityResult,
    SelectivityStudy,
    Strategy,
    apply_replacement,
    enumerate_plans,
    phase_subsets,
    run_selectivity,
    selectivity_csv,
    selectivity_report,
)
from crimpxai.phases import DEFAULT_BOUNDARIES, PhaseBoundaries

ZERO = ReplacementStrategy(Strategy.ZERO)
REMOVE = ReplacementStrategy(Strategy.REMOVE)


def test_enumeration():
    subsets = phase_subsets()
    assert len(subsets) == 14 and len(set(subsets)) == 14
    assert [len([s for s in subsets if len(s) == k]) for k in (1, 2, 3)] == [4, 6, 4]
    plans = enumerate_plans()
    assert len(plans) == 42
    assert plans[0] == PerturbationPlan((1,), ZERO)
    assert [p.strategy.kind for p in plans[:3]] == [Strategy.ZERO, Strategy.RANDOM, Strategy.REMOVE]
    # lexicographic: (1,), (1, 2), (1, 2, 3), ..., (4,)
    assert [p.phases for p in plans[::3]][:3] == [(1,), (1, 2), (1, 2, 3)]
    assert plans[-1].phases == (4,)


def test_plan_validation():
    with pytest.raises(ValueError):
        PerturbationPlan((1, 2, 3, 4), ZERO)
    with pytest.raises(ValueError):
        PerturbationPlan((), ZERO)
    with pytest.raises(ValueError):
        ReplacementStrategy(Strategy.RANDOM)
    assert PerturbationPlan((3, 1), ZERO).phases == (1, 3)
    assert PerturbationPlan((1, 3), ZERO).label == "(1,3)"


def test_zero_and_remove():
    X = np.random.default_rng(0).random((3, 500))
    z = apply_replacement(X, PerturbationPlan((2,), ZERO))
    assert not z[:, 75:150].any()
    np.testing.assert_array_equal(z[:, :75], X[:, :75])
    r = apply_replacement(X, PerturbationPlan((1, 3), REMOVE))
    assert r.shape == (3, 500 - 75 - 195)
    np.testing.assert_array_equal(r, np.hstack([X[:, 75:150], X[:, 345:]]))


def test_random_reproducible():
    X = np.zeros((4, 500))
    plan = PerturbationPlan((4,), ReplacementStrategy(Strategy.RANDOM, 7))
    a, b = apply_replacement(X, plan), apply_replacement(X, plan)
    np.testing.assert_array_equal(a, b)
    assert ((a[:, 345:] >= 0) & (a[:, 345:] < 1)).all()
    assert not a[:, :345].any()
    other = apply_replacement(X, PerturbationPlan((4,), ReplacementStrategy(Strategy.RANDOM, 8)))
    assert not np.array_equal(a, other)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), plan_index=st.integers(0, 41))
def test_untouched_indices_bit_identical(seed, plan_index):
    X = np.random.default_rng(seed).random((5, 500))
    plan = enumerate_plans(seed % 100)[plan_index]
    out = apply_replacement(X, plan)
    hit = np.zeros(500, bool)
    for p in plan.phases:
        r = DEFAULT_BOUNDARIES.phase_range(p)
        hit[r.start : r.stop] = True
    if plan.strategy.kind is Strategy.REMOVE:
        assert out.tobytes() == X[:, ~hit].tobytes()
    else:
        assert out[:, ~hit].tobytes() == X[:, ~hit].tobytes()


def test_shape_mismatch():
    with pytest.raises(ValueError, match="x4"):
        apply_replacement(np.zeros((2, 400)), PerturbationPlan((1,), ZERO))
    b = PhaseBoundaries(1, 2, 3, 4)
    assert apply_replacement(np.ones((1, 4)), PerturbationPlan((2, 3), REMOVE), b).tolist() == [[1.0, 1.0]]


def _toy_problem():
    # the class is encoded only in phase 1 (first 75 points)
    rng = np.random.default_rng(1)
    n = 60
    y = np.arange(n) % 2
    X = rng.random((n, 500)) * 0.1
    X[:, :75] += y[:, None] * 0.8
    ids = [f"s{i:02d}" for i in range(n)]
    split = SplitManifest(0, 0.75, tuple(ids[:45]), tuple(ids[45:]))
    return X, y, ids, split


def test_run_selectivity_small():
    X, y, ids, split = _toy_problem()
    plans = [PerturbationPlan((p,), s) for p in (1, 2, 3, 4) for s in (ZERO, REMOVE)]
    study = run_selectivity(X, y, ids, split, HyperParams(10), seed=0, plans=plans)
    assert study.base_accuracy == 1.0
    acc = {(r.plan.phases, r.plan.strategy.kind): r.test_accuracy for r in study.results}
    assert acc[((2,), Strategy.ZERO)] == 1.0
    assert acc[((1,), Strategy.ZERO)] < 0.8
    assert [r.feature_dim for r in study.results] == [500, 425, 500, 425, 500, 305, 500, 345]

    rep = selectivity_report(study, phase_importance=[0.9, 0.1, 0.0, 0.0])
    assert rep.most_selective == {"ZERO": 1, "REMOVE": 1}
    assert rep.verdict.startswith("consistent")

    csv_text = selectivity_csv(study)
    lines = csv_text.splitlines()
    assert lines[0] == "strategy,phases,accuracy,delta_vs_base,feature_dim"
    assert lines[1].startswith("BASE,,1.0,")
    assert len(lines) == 2 + 8
    assert len(selectivity_csv(study, ["ZERO"]).splitlines()) == 2 + 4


def test_run_selectivity_no_plans_and_unknown_id():
    X, y, ids, split = _toy_problem()
    study = run_selectivity(X, y, ids, split, HyperParams(3), plans=[])
    assert study.results == ()
    with pytest.raises(ValueError):
        selectivity_report(study)
    bad = SplitManifest(0, 0.75, ("nope",), split.test_ids)
    with pytest.raises(ValueError, match="nope"):
        run_selectivity(X, y, ids, bad, HyperParams(3), plans=[])


def test_report_no_selective_phase():
    plans = enumerate_plans()
    study = SelectivityStudy(0.9, 500, tuple(SelectivityResult(p, 0.9, 0.0, 500) for p in plans))
    rep = selectivity_report(study)
    assert rep.verdict == "no selective phase"
    assert set(rep.tables) == {1, 2, 3}
    assert "points" in rep.to_text()
