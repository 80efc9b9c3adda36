import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from moldqc.metrics import ConfusionMatrix, EvalReport, confusion, format_table, metrics, percent


def test_table_four_counts():
    acc, spec, sens = metrics(ConfusionMatrix(tp=18, fp=1, fn=1, tn=292))
    assert (percent(acc), percent(spec), percent(sens)) == ("99.4", "99.7", "94.7")


def test_simple_confusions():
    assert confusion([1, 0], [1, 0]) == ConfusionMatrix(1, 0, 0, 1)
    cm = confusion([1, 1, 0, 1], [0, 0, 0, 0])
    assert (cm.fn, cm.tp) == (3, 0)
    with pytest.raises(ValueError):
        confusion([1, 0], [1])
    with pytest.raises(ValueError):
        confusion([2, 0], [1, 0])
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 0)


def test_perfect_and_undefined():
    assert metrics(confusion([0, 1, 1], [0, 1, 1])) == (1.0, 1.0, 1.0)
    acc, spec, sens = metrics(confusion([0, 0, 0], [0, 1, 0]))
    assert math.isnan(sens) and spec == 2 / 3
    assert percent(sens) == "NaN"


def test_brute_force_tally():
    r = np.random.default_rng(0)
    t = r.integers(0, 2, 1000)
    p = r.integers(0, 2, 1000)
    tally = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for a, b in zip(t.tolist(), p.tolist()):
        key = ("t" if a == b else "f") + ("p" if b == 1 else "n")
        tally[key] += 1
    assert confusion(t, p).to_dict() == tally


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200))
def test_label_swap(pairs):
    t = np.array([a for a, _ in pairs])
    p = np.array([b for _, b in pairs])
    acc, spec, sens = metrics(confusion(t, p))
    acc2, spec2, sens2 = metrics(confusion(1 - t, 1 - p))
    assert acc == acc2
    assert (spec == sens2) or (math.isnan(spec) and math.isnan(sens2))
    assert (sens == spec2) or (math.isnan(sens) and math.isnan(spec2))
    if 0 < t.sum() < len(t):
        assert metrics(confusion(t, t)) == (1.0, 1.0, 1.0)


def test_percent_rounds_half_away():
    assert percent(0.9995) == "100.0"
    assert percent(0.12345) == "12.3"
    assert percent(0.00125) == "0.1"
    assert percent(0.99949) == "99.9"
    assert percent(293 / 312) == "93.9"


def test_report_json():
    rep = EvalReport("naive", "test", 0, ConfusionMatrix(0, 0, 19, 293))
    d = rep.to_dict()
    assert d["accuracy_pct"] == "93.9" and d["sensitivity_pct"] == "0.0" and d["specificity_pct"] == "100.0"
    assert EvalReport.from_dict(json.loads(json.dumps(d))).confusion == rep.confusion
    empty = EvalReport("x", "test", 0, ConfusionMatrix(0, 0, 0, 5)).to_dict()
    assert empty["sensitivity"] is None
    table = format_table([rep])
    assert "Accuracy" in table and "93.9" in table
