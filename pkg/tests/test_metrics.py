import io
import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crimpxai.metrics import (
    ConfusionMatrix,
    ExpertRating,
    MetricWarning,
    agreement_json,
    bundled_ratings,
    confusion,
    expert_agreement,
    metrics_json,
    read_ratings,
    summary,
)


def test_uniform_two_class():
    cm = ConfusionMatrix([[1, 1], [1, 1]])
    s = summary(cm)
    assert (s.accuracy, s.precision, s.recall, s.f1) == (0.5, 0.5, 0.5, 0.5)


def test_counts_from_labels():
    cm = confusion([0, 0, 1, 2, 2], [0, 1, 1, 2, 0], class_names=("a", "b", "c"))
    assert cm.counts.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 1]]
    assert cm.total == 5
    assert "true \\ pred" in cm.to_text()


def test_macro_scores_hand_computed():
    cm = ConfusionMatrix([[1, 1, 0], [0, 1, 0], [1, 0, 1]])
    s = summary(cm)
    p = [1 / 2, 1 / 2, 1 / 1]
    r = [1 / 2, 1 / 1, 1 / 2]
    f = [2 * a * b / (a + b) for a, b in zip(p, r)]
    assert s.accuracy == pytest.approx(3 / 5)
    assert s.precision == pytest.approx(np.mean(p))
    assert s.recall == pytest.approx(np.mean(r))
    assert s.f1 == pytest.approx(np.mean(f))


def test_accuracy_on_324_curves():
    # 324 test curves with 13 errors give the 0.959 accuracy target
    cm = ConfusionMatrix([[160, 2, 1], [3, 100, 2], [2, 3, 51]])
    assert cm.total == 324
    assert summary(cm).accuracy == 311 / 324
    assert abs(summary(cm).accuracy - 0.959) < 1e-3


def test_undefined_precision_warns_and_zeroes():
    cm = ConfusionMatrix([[2, 0], [1, 0]])
    with pytest.warns(MetricWarning, match="precision"):
        s = summary(cm)
    assert s.per_class_precision[1] == 0.0
    assert s.per_class_f1[1] == 0.0


def test_errors():
    with pytest.raises(ValueError, match="position 1"):
        confusion([0, 5], [0, 0], n_classes=2)
    with pytest.raises(ValueError, match="length"):
        confusion([0], [0, 1])
    with pytest.raises(ValueError):
        summary(ConfusionMatrix(np.zeros((2, 2))))
    with pytest.raises(ValueError):
        ConfusionMatrix([[1, 2, 3]])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(2, 5))
def test_permutation_equivariance(seed, k):
    rng = np.random.default_rng(seed)
    yt, yp = rng.integers(0, k, 50), rng.integers(0, k, 50)
    perm = rng.permutation(k)
    a = confusion(yt, yp, k)
    b = confusion(perm[yt], perm[yp], k)
    np.testing.assert_array_equal(b.counts[np.ix_(perm, perm)], a.counts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetricWarning)
        sa, sb = summary(a), summary(b)
    assert sa.accuracy == sb.accuracy
    assert sa.f1 == pytest.approx(sb.f1)
    assert sa.precision == pytest.approx(sb.precision)


def test_metrics_json_stable():
    cm = confusion([0, 1, 1], [0, 1, 0], class_names=("OK", "NOK"))
    text = metrics_json(cm, {"seed": 3})
    assert text == metrics_json(cm, {"seed": 3})
    doc = json.loads(text)
    assert doc["confusion_matrix"] == [[1, 0], [1, 1]]
    assert doc["seed"] == 3 and doc["n_instances"] == 3
    assert set(doc) >= {"accuracy", "macro_precision", "macro_recall", "macro_f1"}


def test_bundled_ratings():
    r = {(x.rater, x.quality_class): x.scores for x in bundled_ratings()}
    assert r == {
        ("expert_1", "MISSING_STRANDS"): (0, 0, 3, 0),
        ("expert_2", "MISSING_STRANDS"): (0, 1, 3, 0),
        ("expert_1", "CRIMPED_INSULATION"): (0, 3, 3, 0),
        ("expert_2", "CRIMPED_INSULATION"): (0, 2, 1, 0),
    }


def test_read_ratings_validation():
    good = "# note\nrater,class,p1,p2,p3,p4\na,OK,0,1,2,3\n"
    assert read_ratings(io.StringIO(good))[0].scores == (0, 1, 2, 3)
    with pytest.raises(ValueError, match="header"):
        read_ratings(io.StringIO("who,class,p1,p2,p3,p4\n"))
    with pytest.raises(ValueError, match="0..3"):
        ExpertRating("a", "OK", (0, 1, 2, 4))


def test_expert_agreement_examples():
    means = {
        "OK": (0.0, 0.0, 0.0, 0.0),
        "MISSING_STRANDS": (0.0004, 0.0011, 0.0020, 0.0003),
        "CRIMPED_INSULATION": (0.0002, 0.0009, 0.0027, 0.0001),
    }
    rep = {a.quality_class: a for a in expert_agreement(means, bundled_ratings())}
    assert list(rep) == ["MISSING_STRANDS", "CRIMPED_INSULATION"]
    ms = rep["MISSING_STRANDS"]
    assert ms.model_top_phase == 3
    assert [e.top_match for e in ms.experts] == [True, True]
    ci = rep["CRIMPED_INSULATION"]
    # expert 1 ties phases 2 and 3 at the top; expert 2 prefers phase 2
    assert ci.experts[0].top_phases == frozenset({2, 3})
    assert [e.top_match for e in ci.experts] == [True, False]
    assert ms.normalized_importance[2] == 1.0
    doc = json.loads(agreement_json(list(rep.values())))
    assert doc[1]["experts"][0]["top_phases"] == [2, 3]


def test_expert_agreement_constant_and_missing():
    rep = expert_agreement({"MISSING_STRANDS": (1.0, 1.0, 1.0, 1.0)}, bundled_ratings())
    assert all(math.isnan(e.rank_correlation) for e in rep[0].experts)
    assert json.loads(agreement_json(rep))[0]["experts"][0]["rank_correlation"] is None
    with pytest.raises(ValueError, match="no expert ratings"):
        expert_agreement({"NEW_FAULT": (1, 2, 3, 4)}, bundled_ratings())
