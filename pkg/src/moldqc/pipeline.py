"""Scaler + boosted-tree pipelines, cross-validated random search and the
three quality-class predictors.

* approach A (``classify``): weighted logistic classifier, reject iff p >= 0.5
* approach B (``regress_threshold``): regress the opening distance, reject iff
  the prediction lies outside ``[x_bar - k*s, x_bar + k*s]`` of the training set
* ``naive``: always the training majority label
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gbm
from .gbm import GbmHyperParams, GbmModel
from .simcore import LabelingSummary

FORMAT_VERSION = 1
APPROACHES = ("classify", "regress_threshold", "naive")
SCORES = ("log_loss", "mae")
_LOG_LOSS_CLAMP = 1e-15


def stage_seed(seed: int, stage: str) -> int:
    """Independent 63-bit seed for a named pipeline stage."""
    digest = hashlib.sha256(f"{int(seed)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# ---------------------------------------------------------------------------
# scaler and threshold rule
# ---------------------------------------------------------------------------

@dataclass
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.mean.shape != self.scale.shape or not np.all(self.scale > 0):
            raise ValueError("scaler needs matching mean/scale vectors with scale > 0")

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.mean):
            raise ValueError(f"expected {len(self.mean)} columns")
        return (X - self.mean) / self.scale

    def inverse(self, Z) -> np.ndarray:
        return self.mean + self.scale * np.asarray(Z, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["scale"], dtype=np.float64))


def fit_scaler(X_train) -> Scaler:
    """Per-column mean and population std, ignoring NaN; zero std becomes 1."""
    X = np.asarray(X_train, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("scaler needs a non-empty 2-D training matrix")
    mean = np.zeros(X.shape[1])
    scale = np.ones(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        col = col[~np.isnan(col)]
        if len(col) == 0:
            continue
        if np.all(col == col[0]):
            # exact mean, so a constant column maps to exact zeros
            mean[j] = col[0]
            continue
        mean[j] = np.mean(col)
        sd = float(np.std(col))
        scale[j] = sd if sd > 0 else 1.0
    return Scaler(mean, scale)


@dataclass(frozen=True)
class ThresholdRule:
    x_bar: float
    s: float
    k: float = 2.0

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError("s must be >= 0")

    @classmethod
    def from_training(cls, distances, k: float = 2.0) -> "ThresholdRule":
        d = np.asarray(distances, dtype=np.float64)
        if len(d) < 2 or np.all(d == d[0]):
            raise ValueError("threshold rule needs at least two distinct training distances")
        return cls(float(np.mean(d)), float(np.std(d, ddof=1)), float(k))

    def classify(self, predicted) -> np.ndarray:
        """1 (reject) iff the prediction lies outside the closed acceptance interval."""
        p = np.asarray(predicted, dtype=np.float64)
        lo = self.x_bar - self.k * self.s
        hi = self.x_bar + self.k * self.s
        return ((p < lo) | (p > hi)).astype(np.int64)

    def to_dict(self) -> dict:
        return {"x_bar": self.x_bar, "s": self.s, "k": self.k}


# ---------------------------------------------------------------------------
# search space
# ---------------------------------------------------------------------------

DEFAULT_LISTS: dict[str, list] = {
    "n_estimators": [100, 200, 400, 800],
    "alpha": [0.0, 0.1, 1.0, 10.0],
    "lambda": [0.0, 0.1, 1.0, 10.0],
    "subsample": [0.6, 0.8, 1.0],
    "min_child_weight": [1e-3, 1.0, 5.0],
    "min_child_samples": [5, 20, 50],
    "num_leaves": [15, 31, 63, 127],
}


@dataclass(frozen=True)
class SearchSpace:
    lists: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_LISTS.items()})
    n_draws: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        unknown = set(self.lists) - set(DEFAULT_LISTS)
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        for k, v in self.lists.items():
            if len(v) == 0:
                raise ValueError(f"search list for {k} is empty")
            for value in v:
                GbmHyperParams.from_dict({k: value})  # validates the candidate

    def draws(self) -> list[GbmHyperParams]:
        """``n_draws`` independent draws, one uniform pick per list (in list-name order)."""
        rng = np.random.default_rng(self.seed)
        names = sorted(self.lists)
        out = []
        for _ in range(self.n_draws):
            pick = {k: self.lists[k][int(rng.integers(len(self.lists[k])))] for k in names}
            out.append(GbmHyperParams.from_dict(pick))
        return out

    def to_dict(self) -> dict:
        return {"lists": {k: list(v) for k, v in self.lists.items()},
                "n_draws": self.n_draws, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        return cls(lists={k: list(v) for k, v in d.get("lists", DEFAULT_LISTS).items()},
                   n_draws=int(d.get("n_draws", 40)), seed=int(d.get("seed", 0)))


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

def fold_assignment(y, k: int, stratify: bool, seed: int) -> np.ndarray:
    """Fold id per row: a seeded shuffle cut into ``k`` contiguous chunks.

    With ``stratify`` each class is shuffled and cut separately (classes in
    ascending order, one generator).
    """
    y = np.asarray(y)
    n = len(y)
    if k < 2 or n < k:
        raise ValueError("need k >= 2 and at least k rows")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    groups = [np.flatnonzero(y == c) for c in np.unique(y)] if stratify else [np.arange(n)]
    for idx in groups:
        if stratify and len(idx) < k:
            raise ValueError(f"class with {len(idx)} rows cannot appear in all {k} folds")
        shuffled = idx[rng.permutation(len(idx))]
        for f, chunk in enumerate(np.array_split(shuffled, k)):
            folds[chunk] = f
    return folds


def log_loss(y, p) -> float:
    p = np.clip(np.asarray(p, dtype=np.float64), _LOG_LOSS_CLAMP, 1.0 - _LOG_LOSS_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def mae(y, pred) -> float:
    return float(np.mean(np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(y, dtype=np.float64))))


def _objective(score: str) -> str:
    if score == "log_loss":
        return "weighted_logistic"
    if score == "mae":
        return "squared"
    raise ValueError(f"score must be one of {SCORES}")


def fit_pipeline(X, y, weights, hp: GbmHyperParams, objective: str, seed: int) -> tuple[Scaler, GbmModel]:
    scaler = fit_scaler(X)
    model = gbm.fit(scaler.transform(X), y, weights, hp, seed=seed, objective=objective)
    return scaler, model


def _evaluate(model: GbmModel, scaler: Scaler, X, y, score: str) -> float:
    Z = scaler.transform(X)
    if score == "log_loss":
        return log_loss(y, model.predict_proba(Z))
    return mae(y, model.predict(Z))


def kfold_cv(X, y, weights, hp: GbmHyperParams, k: int = 5, score: str = "mae",
             stratify: bool = False, seed: int = 0) -> float:
    """Unweighted mean held-out score; scaler and model are fit on the k-1 training folds."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)
    objective = _objective(score)
    folds = fold_assignment(y, k, stratify, seed)
    scores = []
    for f in range(k):
        tr = folds != f
        te = ~tr
        scaler, model = fit_pipeline(X[tr], y[tr], w[tr], hp, objective, seed)
        scores.append(_evaluate(model, scaler, X[te], y[te], score))
    return float(np.mean(scores))


@dataclass
class Trial:
    draw_index: int
    hyperparams: GbmHyperParams
    cv_score: float


def _hp_key(hp: GbmHyperParams) -> str:
    return json.dumps(hp.to_dict(), sort_keys=True)


def random_search(X, y, weights, space: SearchSpace, score: str, k: int = 5,
                  stratify: bool = False, jobs: int = 1) -> tuple[GbmHyperParams, float, list[Trial]]:
    """Evaluate ``space.n_draws`` seeded draws by k-fold CV; lowest score wins,
    earliest draw on ties. Repeated draws are evaluated once."""
    draws = space.draws()
    unique: dict[str, GbmHyperParams] = {}
    for hp in draws:
        unique.setdefault(_hp_key(hp), hp)
    keys = list(unique)
    cv_seed = stage_seed(space.seed, "cv")
    args = (X, y, weights)
    if jobs > 1 and len(keys) > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=jobs)(
            delayed(kfold_cv)(*args, unique[key], k, score, stratify, cv_seed) for key in keys)
    else:
        results = [kfold_cv(*args, unique[key], k, score, stratify, cv_seed) for key in keys]
    by_key = dict(zip(keys, results))
    log = [Trial(i, hp, by_key[_hp_key(hp)]) for i, hp in enumerate(draws)]
    best = min(log, key=lambda t: (t.cv_score, t.draw_index))
    return best.hyperparams, best.cv_score, log


def trial_log_csv(log: Sequence[Trial]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["draw_index", "hyperparams_json", "cv_score"])
    for t in log:
        w.writerow([t.draw_index, _hp_key(t.hyperparams), repr(float(t.cv_score))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# bundles and training
# ---------------------------------------------------------------------------

@dataclass
class ModelBundle:
    approach: str
    selected_features: list[str]
    scaler: Scaler | None = None
    model: GbmModel | None = None
    threshold: ThresholdRule | None = None
    labeling: LabelingSummary | None = None
    best_hyperparams: GbmHyperParams | None = None
    cv_score: float | None = None
    majority_label: int | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.approach not in APPROACHES:
            raise ValueError(f"approach must be one of {APPROACHES}")
        has_model = self.model is not None and self.scaler is not None
        if self.approach == "naive":
            if self.model is not None or self.threshold is not None or self.majority_label not in (0, 1):
                raise ValueError("naive bundle holds only the majority label")
        elif not has_model:
            raise ValueError(f"{self.approach} bundle needs a scaler and a model")
        if (self.approach == "regress_threshold") != (self.threshold is not None):
            raise ValueError("a threshold rule belongs to the regress_threshold approach only")

    def predict_labels(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.selected_features):
            raise ValueError(f"expected {len(self.selected_features)} feature columns")
        if self.approach == "naive":
            return np.full(X.shape[0], self.majority_label, dtype=np.int64)
        Z = self.scaler.transform(X)
        if self.approach == "classify":
            return (self.model.predict_proba(Z) >= 0.5).astype(np.int64)
        return self.threshold.classify(self.model.predict(Z))

    def predict_raw(self, X) -> np.ndarray | None:
        """Probability (classify) or predicted distance (regress_threshold)."""
        if self.approach == "naive":
            return None
        Z = self.scaler.transform(np.asarray(X, dtype=np.float64))
        if self.approach == "classify":
            return self.model.predict_proba(Z)
        return self.model.predict(Z)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "approach": self.approach,
            "selected_features": list(self.selected_features),
            "scaler": self.scaler.to_dict() if self.scaler else None,
            "model": self.model.to_json() if self.model else None,
            "threshold": self.threshold.to_dict() if self.threshold else None,
            "labeling": self.labeling.to_dict() if self.labeling else None,
            "best_hyperparams": self.best_hyperparams.to_dict() if self.best_hyperparams else None,
            "cv_score": self.cv_score,
            "majority_label": self.majority_label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported bundle format_version {d.get('format_version')!r}")
        return cls(
            approach=d["approach"],
            selected_features=list(d["selected_features"]),
            scaler=Scaler.from_dict(d["scaler"]) if d.get("scaler") else None,
            model=GbmModel.from_json(d["model"]) if d.get("model") else None,
            threshold=ThresholdRule(**d["threshold"]) if d.get("threshold") else None,
            labeling=LabelingSummary(**d["labeling"]) if d.get("labeling") else None,
            best_hyperparams=GbmHyperParams.from_dict(d["best_hyperparams"]) if d.get("best_hyperparams") else None,
            cv_score=d.get("cv_score"),
            majority_label=d.get("majority_label"),
        )


@dataclass
class TrainResult:
    bundle: ModelBundle
    trials: list[Trial]


def train_approach_A(X, labels, feature_names: Sequence[str], space: SearchSpace | None = None,
                     labeling: LabelingSummary | None = None, jobs: int = 1, k: int = 5) -> TrainResult:
    """Balanced-weight classifier tuned on log loss, refit on all training rows."""
    space = space or SearchSpace()
    y = np.asarray(labels, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)) or len(np.unique(y)) < 2:
        raise ValueError("approach A needs both classes in the training labels")
    w = gbm.balanced_class_weights(y)
    hp, cv, log = random_search(X, y, w, space, "log_loss", k, stratify=True, jobs=jobs)
    scaler, model = fit_pipeline(X, y, w, hp, "weighted_logistic", stage_seed(space.seed, "refit"))
    bundle = ModelBundle("classify", list(feature_names), scaler, model, None, labeling, hp, cv)
    return TrainResult(bundle, log)


def train_approach_B(X, distances, feature_names: Sequence[str], space: SearchSpace | None = None,
                     labeling: LabelingSummary | None = None, jobs: int = 1, k: int = 5,
                     threshold_k: float = 2.0) -> TrainResult:
    """Distance regressor tuned on MAE plus the training-set acceptance interval."""
    space = space or SearchSpace()
    d = np.asarray(distances, dtype=np.float64)
    rule = ThresholdRule.from_training(d, threshold_k)
    hp, cv, log = random_search(X, d, None, space, "mae", k, stratify=False, jobs=jobs)
    scaler, model = fit_pipeline(X, d, None, hp, "squared", stage_seed(space.seed, "refit"))
    bundle = ModelBundle("regress_threshold", list(feature_names), scaler, model, rule, labeling, hp, cv)
    return TrainResult(bundle, log)


def naive_predict(train_labels, n_test: int) -> np.ndarray:
    """Constant training-majority label; an exact tie predicts 0 (accept)."""
    y = np.asarray(train_labels)
    if len(y) == 0:
        raise ValueError("training labels must be non-empty")
    majority = 1 if np.sum(y == 1) > np.sum(y == 0) else 0
    return np.full(int(n_test), majority, dtype=np.int64)


def train_naive(train_labels, feature_names: Sequence[str],
                labeling: LabelingSummary | None = None) -> ModelBundle:
    return ModelBundle("naive", list(feature_names), labeling=labeling,
                       majority_label=int(naive_predict(train_labels, 1)[0]))
