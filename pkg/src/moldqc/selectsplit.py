"""Correlation-based feature filtering and stratified train/test/hold-out splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tsfeat import FeatureMatrix

TARGETS = ("opening_distance", "quality_class")
LEAKAGE_MODES = ("whole_dataset", "train_only")
PARTS = ("train", "test", "holdout")


@dataclass(frozen=True)
class SelectionConfig:
    k: int = 300
    target: str = "opening_distance"
    # whole_dataset filters before splitting, as the original workflow did;
    # train_only computes correlations on the training rows alone
    leakage_mode: str = "whole_dataset"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if self.leakage_mode not in LEAKAGE_MODES:
            raise ValueError(f"leakage_mode must be one of {LEAKAGE_MODES}")


@dataclass(frozen=True)
class SplitConfig:
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        f = tuple(float(v) for v in self.fractions)
        if len(f) != 3 or any(not math.isfinite(v) or v <= 0 for v in f):
            raise ValueError("three positive fractions are required")
        if abs(sum(f) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")
        object.__setattr__(self, "fractions", f)


def _is_constant(x: np.ndarray) -> bool:
    # compare values directly: the mean of identical floats need not equal them
    return bool(np.all(x == x[0]))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; NaN when either vector is constant or non-finite."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be vectors of equal length")
    if len(x) < 2:
        raise ValueError("at least two observations are required")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        return math.nan
    if _is_constant(x) or _is_constant(y):
        return math.nan
    dx = x - np.mean(x)
    dy = y - np.mean(y)
    r = float(np.dot(dx, dy)) / math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    return min(1.0, max(-1.0, r))


def correlations(values: np.ndarray, target: Sequence[float], jobs: int = 1) -> np.ndarray:
    """Pearson r of every column with ``target``; each column is computed independently."""
    values = np.asarray(values, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != len(y):
        raise ValueError("target length must equal the row count")
    cols = np.ascontiguousarray(values.T)
    if jobs > 1 and cols.shape[0] > 1:
        from joblib import Parallel, delayed
        chunks = np.array_split(np.arange(cols.shape[0]), jobs)
        parts = Parallel(n_jobs=jobs)(
            delayed(_corr_chunk)(cols[c], y) for c in chunks)
        return np.concatenate(parts)
    return _corr_chunk(cols, y)


def _corr_chunk(cols: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.array([pearson(c, y) for c in cols])


@dataclass
class Selection:
    names: list[str]
    scores: list[float]
    config: SelectionConfig = field(default_factory=SelectionConfig)

    def report(self) -> list[dict]:
        return [{"feature_name": n, "correlation": s, "rank": i + 1}
                for i, (n, s) in enumerate(zip(self.names, self.scores))]


def select_top_k(matrix: FeatureMatrix, target: Sequence[float], cfg: SelectionConfig | None = None,
                 jobs: int = 1) -> Selection:
    """Keep the ``k`` columns with the largest |r| against ``target``.

    Columns with undefined correlation are dropped; ties in |r| are broken by
    ascending column name.
    """
    cfg = cfg or SelectionConfig()
    r = correlations(matrix.values, target, jobs)
    keep = [i for i in range(len(r)) if not math.isnan(r[i])]
    if not keep:
        raise ValueError("no feature has a defined correlation with the target")
    keep.sort(key=lambda i: (-abs(r[i]), matrix.column_names[i]))
    top = keep[: cfg.k]
    return Selection([matrix.column_names[i] for i in top], [float(r[i]) for i in top], cfg)


def allocate_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder rounding of ``n * fraction``; ties go to the earlier part."""
    quotas = [n * f for f in fractions]
    counts = [math.floor(q) for q in quotas]
    left = n - sum(counts)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


@dataclass
class Split:
    train: np.ndarray
    test: np.ndarray
    holdout: np.ndarray
    config: SplitConfig

    def part(self, name: str) -> np.ndarray:
        if name not in PARTS:
            raise KeyError(name)
        return getattr(self, name)

    def manifest(self, run_ids: Sequence[int] | None = None) -> dict:
        ids = np.asarray(run_ids) if run_ids is not None else None

        def conv(idx):
            return [int(v) for v in (idx if ids is None else ids[idx])]

        return {"seed": self.config.seed, "fractions": list(self.config.fractions),
                "train_ids": conv(self.train), "test_ids": conv(self.test),
                "holdout_ids": conv(self.holdout)}


def stratified_split(labels: Sequence[int], cfg: SplitConfig | None = None) -> Split:
    """Shuffle each class with a seeded generator and cut it by the configured fractions.

    Returned index arrays are sorted.
    """
    cfg = cfg or SplitConfig()
    y = np.asarray(labels)
    if y.ndim != 1 or not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be a 0/1 vector")
    rng = np.random.default_rng(cfg.seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if len(idx) < 3:
            raise ValueError(f"class {cls} has {len(idx)} members; at least 3 are needed")
        idx = idx[rng.permutation(len(idx))]
        counts = allocate_counts(len(idx), cfg.fractions)
        start = 0
        for p, c in enumerate(counts):
            parts[p].append(idx[start:start + c])
            start += c
    train, test, holdout = (np.sort(np.concatenate(p)) for p in parts)
    return Split(train, test, holdout, cfg)
