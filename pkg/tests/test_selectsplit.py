import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import pearson_oracle

from moldqc.selectsplit import (
    SelectionConfig, SplitConfig, allocate_counts, correlations, pearson, select_top_k,
    stratified_split,
)
from moldqc.tsfeat import FeatureMatrix


def test_pearson_basic():
    x = np.array([1.0, 5.0, 2.0, 8.0])
    assert pearson(x, x) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    assert math.isnan(pearson([2, 2, 2], [1, 2, 3]))
    assert math.isnan(pearson([1, 2, 3], [0.1, 0.1, 0.1]))
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


def test_pearson_against_high_precision():
    r = np.random.default_rng(7)
    worst = 0.0
    for i in range(100):
        n = int(r.integers(5, 200))
        x = r.normal(size=n) * 10 ** r.uniform(-3, 3) + r.normal() * 100
        y = 0.3 * x + r.normal(size=n) if i % 2 else (r.random(n) < 0.2).astype(float)
        if np.all(y == y[0]):
            y[0] = 1 - y[0]
        ref = float(pearson_oracle(x, y))
        worst = max(worst, abs(pearson(x, y) - ref))
    assert worst <= 1e-10


def test_pearson_point_biserial():
    # for a 0/1 target, r equals the point-biserial coefficient
    r = np.random.default_rng(1)
    y = (r.random(80) < 0.3).astype(float)
    x = r.normal(size=80) + y
    m1, m0 = x[y == 1].mean(), x[y == 0].mean()
    p = y.mean()
    rpb = (m1 - m0) / x.std() * math.sqrt(p * (1 - p))
    assert pearson(x, y) == pytest.approx(rpb, rel=1e-12)


def _matrix(values, names=None):
    names = names or [f"f{i:02d}" for i in range(values.shape[1])]
    return FeatureMatrix(names, values, list(range(values.shape[0])))


def test_target_column_ranks_first():
    r = np.random.default_rng(2)
    y = r.normal(size=30)
    v = np.column_stack([r.normal(size=30), y, r.normal(size=30)])
    sel = select_top_k(_matrix(v), y, SelectionConfig(k=2))
    assert sel.names[0] == "f01" and abs(sel.scores[0]) == 1.0
    assert sel.report()[0] == {"feature_name": "f01", "correlation": sel.scores[0], "rank": 1}


def test_all_constant_errors():
    with pytest.raises(ValueError):
        select_top_k(_matrix(np.ones((10, 4))), np.arange(10.0))


@pytest.mark.parametrize("seed", range(10))
def test_top_k_exhaustive_oracle(seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=(50, 20))
    v[:, 3] = 1.0  # constant, dropped
    v[:, 7] = v[:, 5]  # exact tie, broken by name
    y = v[:, 5] + r.normal(size=50) * 2
    names = [f"c{i:02d}" for i in range(20)]
    scored = []
    for i, name in enumerate(names):
        if np.all(v[:, i] == v[0, i]):
            continue
        scored.append((-abs(float(pearson_oracle(v[:, i], y))), name))
    expected = [n for _, n in sorted(scored)[:5]]
    sel = select_top_k(_matrix(v, names), y, SelectionConfig(k=5))
    assert sel.names == expected


@given(st.integers(0, 10_000), st.integers(1, 40))
def test_selection_permutation_invariant(seed, k):
    r = np.random.default_rng(seed)
    v = np.round(r.normal(size=(25, 12)), 1)
    y = r.normal(size=25)
    names = [f"n{i}" for i in range(12)]
    perm = r.permutation(12)
    a = select_top_k(_matrix(v, names), y, SelectionConfig(k=k))
    b = select_top_k(_matrix(v[:, perm], [names[i] for i in perm]), y, SelectionConfig(k=k))
    assert a.names == b.names
    assert len(a.names) == min(k, 12)


def test_correlations_parallel_equal():
    r = np.random.default_rng(3)
    v = r.normal(size=(40, 30))
    y = r.normal(size=40)
    assert correlations(v, y, jobs=1).tobytes() == correlations(v, y, jobs=3).tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        SelectionConfig(k=0)
    with pytest.raises(ValueError):
        SelectionConfig(target="other")
    with pytest.raises(ValueError):
        SplitConfig(fractions=(0.5, 0.5, 0.1))
    with pytest.raises(ValueError):
        SplitConfig(fractions=(1.0, 0.0, 0.0))


def test_paper_scale_split_counts():
    y = np.zeros(3147, dtype=int)
    y[:150] = 1
    s = stratified_split(y, SplitConfig(seed=0))
    assert abs(len(s.train) - 2517) <= 1
    assert y[s.train].sum() == 120
    assert abs(y[s.test].sum() - 15) <= 1 and abs(y[s.holdout].sum() - 15) <= 1


def test_balanced_split():
    y = np.array([0, 1] * 50)
    s = stratified_split(y, SplitConfig(seed=5))
    for part in (s.train, s.test, s.holdout):
        assert y[part].mean() == 0.5


def test_split_per_class_counts_random_labels():
    r = np.random.default_rng(11)
    fr = (0.8, 0.1, 0.1)
    for _ in range(50):
        n = int(r.integers(30, 4000))
        y = (r.random(n) < r.uniform(0.02, 0.5)).astype(int)
        if min(y.sum(), n - y.sum()) < 3:
            continue
        s = stratified_split(y, SplitConfig(fr, seed=int(r.integers(1 << 31))))
        for cls in (0, 1):
            size = int(np.sum(y == cls))
            for part, f in zip((s.train, s.test, s.holdout), fr):
                assert abs(np.sum(y[part] == cls) - f * size) < 1


@given(st.lists(st.integers(0, 1), min_size=6, max_size=300), st.integers(0, 2**32 - 1))
def test_split_partition(labels, seed):
    y = np.array(labels)
    if min(y.sum(), len(y) - y.sum()) < 3:
        with pytest.raises(ValueError):
            stratified_split(y, SplitConfig(seed=seed))
        return
    s = stratified_split(y, SplitConfig(seed=seed))
    allidx = np.concatenate([s.train, s.test, s.holdout])
    assert len(allidx) == len(y) and set(allidx.tolist()) == set(range(len(y)))
    again = stratified_split(y, SplitConfig(seed=seed))
    assert all(np.array_equal(a, b) for a, b in zip((s.train, s.test, s.holdout),
                                                    (again.train, again.test, again.holdout)))


@given(st.integers(0, 10_000), st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
def test_allocate_counts(n, w):
    fr = [v / sum(w) for v in w]
    c = allocate_counts(n, fr)
    assert sum(c) == n
    assert all(abs(ci - n * f) < 1 for ci, f in zip(c, fr))


def test_manifest_maps_ids():
    y = np.array([0] * 10 + [1] * 5)
    s = stratified_split(y, SplitConfig(seed=1))
    ids = list(range(100, 115))
    m = s.manifest(ids)
    assert sorted(m["train_ids"] + m["test_ids"] + m["holdout_ids"]) == ids
    assert m["seed"] == 1 and m["fractions"] == [0.8, 0.1, 0.1]
