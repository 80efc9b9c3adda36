"""Gradient-boosted decision trees with exact split enumeration.

Trees are grown leaf-wise: the leaf whose best split has the largest gain is
split next, until ``num_leaves`` is reached or no split has positive gain.
Split search scans every feature over presorted row orders, so thresholds are
midpoints between consecutive distinct values (no histogram binning).

Two objectives are supported: ``weighted_logistic`` for the binary quality
class and ``squared`` for regressing the opening distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Any

import numba
import numpy as np

OBJECTIVES = ("weighted_logistic", "squared")

_P_CLAMP = 1e-12
# A split must beat the parent by more than this fraction of the children's
# scores; suppresses splits that only exist through rounding noise.
_REL_GAIN_TOL = 1e-10


@dataclass(frozen=True)
class GbmHyperParams:
    n_estimators: int = 100
    alpha: float = 0.0
    reg_lambda: float = 0.0
    subsample: float = 1.0
    min_child_weight: float = 1e-3
    min_child_samples: int = 20
    num_leaves: int = 31
    learning_rate: float = 0.1

    def __post_init__(self):
        if int(self.n_estimators) != self.n_estimators or self.n_estimators < 0:
            raise ValueError(f"n_estimators must be a non-negative integer, got {self.n_estimators}")
        if not self.alpha >= 0 or not self.reg_lambda >= 0:
            raise ValueError("alpha and lambda must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ValueError(f"subsample must lie in (0, 1], got {self.subsample}")
        if not self.min_child_weight >= 0:
            raise ValueError("min_child_weight must be >= 0")
        if self.min_child_samples < 1:
            raise ValueError("min_child_samples must be >= 1")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")

    def to_dict(self) -> dict:
        # ``lambda`` is the public name; the attribute avoids the keyword.
        d = asdict(self)
        d["lambda"] = d.pop("reg_lambda")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GbmHyperParams":
        d = dict(d)
        if "lambda" in d:
            d["reg_lambda"] = d.pop("lambda")
        return cls(**d)


# ---------------------------------------------------------------------------
# loss calculus
# ---------------------------------------------------------------------------

def loss_grad_hess(objective: str, score, target, weight=1.0):
    """Per-sample gradient and hessian of the loss w.r.t. the raw score.

    ``weighted_logistic``: ``w * logloss(sigmoid(score), y)``.
    ``squared``: ``w * (score - y)**2 / 2``; with unit weights this is the
    plain ``g = score - y, h = 1``.
    """
    score = np.asarray(score, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if objective == "weighted_logistic":
        p = np.clip(_sigmoid(score), _P_CLAMP, 1.0 - _P_CLAMP)
        return weight * (p - target), weight * p * (1.0 - p)
    if objective == "squared":
        return weight * (score - target), np.broadcast_to(weight, score.shape).astype(np.float64)
    raise ValueError(f"unknown objective {objective!r}")


def loss_value(objective: str, score, target, weight=1.0):
    """Per-sample loss whose derivatives :func:`loss_grad_hess` returns."""
    score = np.asarray(score, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if objective == "weighted_logistic":
        # log(1 + e^s) - y*s, written to stay finite for large |s|
        return weight * (np.logaddexp(0.0, score) - target * score)
    if objective == "squared":
        return weight * 0.5 * (score - target) ** 2
    raise ValueError(f"unknown objective {objective!r}")


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def leaf_value(G: float, H: float, alpha: float, reg_lambda: float) -> float:
    """Minimiser of ``G*w + (H + lambda)*w**2/2 + alpha*|w|`` (soft-thresholded Newton step)."""
    if not H + reg_lambda > 0:
        raise ValueError(f"H + lambda must be positive, got {H + reg_lambda}")
    return _leaf_value(G, H, alpha, reg_lambda)


@numba.njit(cache=True)
def _leaf_value(G, H, alpha, lam):
    a = abs(G) - alpha
    if a <= 0.0:
        return 0.0
    if G > 0:
        return -a / (H + lam)
    return a / (H + lam)


@numba.njit(cache=True)
def _score(G, H, alpha, lam):
    a = abs(G) - alpha
    if a <= 0.0:
        return 0.0
    return 0.5 * a * a / (H + lam)


@numba.njit(cache=True)
def _midpoint(a, b):
    m = 0.5 * a + 0.5 * b
    if m >= b:
        return a
    return m


# ---------------------------------------------------------------------------
# split search and tree growth kernels
# ---------------------------------------------------------------------------
#
# Layout: ``Xt`` is features x rows. ``rank[f, r]`` is the dense rank of row
# r's value among the distinct values of feature f (NaN -> _NAN_RANK), so a
# distinct-value boundary is a rank increase. ``order[f]`` lists rows sorted by
# feature f; every tree node owns the same [s, e) segment in all F orders.

_NAN_RANK = np.iinfo(np.int32).max


@numba.njit(cache=True)
def _candidate(gl, hl, gr, hr, alpha, lam, mcw, bar):
    """Children score of a split if it beats ``bar``, else -1."""
    if hl < mcw or hr < mcw:
        return -1.0
    dh_l = hl + lam
    dh_r = hr + lam
    al = max(abs(gl) - alpha, 0.0)
    ar = max(abs(gr) - alpha, 0.0)
    # division-free screen of 0.5*(al^2/dh_l + ar^2/dh_r) > bar
    if 0.5 * (al * al * dh_r + ar * ar * dh_l) <= bar * (dh_l * dh_r):
        return -1.0
    if not (dh_l > 0.0 and dh_r > 0.0):
        return -1.0
    return _score(gl, hl, alpha, lam) + _score(gr, hr, alpha, lam)


@numba.njit(cache=True)
def _initial_bar(G, H, alpha, lam):
    # children score a candidate must beat; the tolerance factor implements
    # gain > _REL_GAIN_TOL * children
    return _score(G, H, alpha, lam) / (1.0 - _REL_GAIN_TOL)


@numba.njit(cache=True)
def _scan_feature(row_f, rank_f, tie_f, s, e, gh, G, H, alpha, lam, mcs, mcw, bar):
    """Scan one feature over ``row_f[s:e]`` for a split beating ``bar``.

    Returns (bar, position, default_left, found); a split at position p puts
    ``row_f[s:p+1]`` (plus NaN rows when default_left) on the left.
    """
    n = e - s
    best_p = -1
    best_dl = True
    v_end = e
    while v_end > s and rank_f[row_f[v_end - 1]] == _NAN_RANK:
        v_end -= 1
    n_nan = e - v_end
    GL = 0.0
    HL = 0.0
    if n_nan == 0:
        # child counts are nl and n - nl: admissible positions are one range
        p_lo = s + mcs - 1
        p_hi = e - mcs
        for p in range(s, p_lo):
            r = row_f[p]
            GL += gh[r, 0]
            HL += gh[r, 1]
        for p in range(p_lo, p_hi):
            r = row_f[p]
            GL += gh[r, 0]
            HL += gh[r, 1]
            if tie_f and rank_f[row_f[p + 1]] == rank_f[r]:
                continue
            c = _candidate(GL, HL, G - GL, H - HL, alpha, lam, mcw, bar)
            if c > bar:
                bar = c
                best_p = p
                best_dl = HL >= H - HL
        return bar, best_p, best_dl, best_p >= 0
    G_nan = 0.0
    H_nan = 0.0
    for p in range(v_end, e):
        r = row_f[p]
        G_nan += gh[r, 0]
        H_nan += gh[r, 1]
    G_valid = G - G_nan
    H_valid = H - H_nan
    for p in range(s, v_end - 1):
        r = row_f[p]
        GL += gh[r, 0]
        HL += gh[r, 1]
        nl = p - s + 1
        if n - nl < mcs:
            break
        if nl + n_nan < mcs:
            continue
        if rank_f[row_f[p + 1]] == rank_f[r]:
            continue
        GR = G_valid - GL
        HR = H_valid - HL
        # NaN rows join the side with the larger hessian sum
        dl = HL >= HR
        if dl:
            gl = GL + G_nan
            hl = HL + H_nan
            cl = nl + n_nan
            gr = GR
            hr = HR
        else:
            gl = GL
            hl = HL
            cl = nl
            gr = GR + G_nan
            hr = HR + H_nan
        if cl < mcs or n - cl < mcs:
            continue
        c = _candidate(gl, hl, gr, hr, alpha, lam, mcw, bar)
        if c > bar:
            bar = c
            best_p = p
            best_dl = dl
    return bar, best_p, best_dl, best_p >= 0


@numba.njit(cache=True)
def _scan_segment(Xt, rank, ties, order, s, e, gh, G, H, alpha, lam, mcs, mcw):
    """Best split of the rows in ``order[:, s:e]``.

    Returns (feature, threshold, gain, default_left); feature -1 when no split
    qualifies. Ties keep the lowest feature, then the lowest threshold.
    """
    parent = _score(G, H, alpha, lam)
    bar = _initial_bar(G, H, alpha, lam)
    best_f = -1
    best_p = 0
    best_dl = True
    for f in range(order.shape[0]):
        bar, p, dl, found = _scan_feature(order[f], rank[f], ties[f], s, e, gh, G, H,
                                          alpha, lam, mcs, mcw, bar)
        if found:
            best_f = f
            best_p = p
            best_dl = dl
    if best_f < 0:
        return -1, 0.0, 0.0, True
    row_f = order[best_f]
    t = _midpoint(Xt[best_f, row_f[best_p]], Xt[best_f, row_f[best_p + 1]])
    return best_f, t, bar - parent, best_dl


@numba.njit(cache=True)
def _segment_sums(order0, s, e, gh):
    G = 0.0
    H = 0.0
    for p in range(s, e):
        r = order0[p]
        G += gh[r, 0]
        H += gh[r, 1]
    return G, H


@numba.njit(cache=True)
def _partition(row, goes_left, s, e, tmp):
    """Stable in-place partition of ``row[s:e]``; returns the left count."""
    li = s
    ri = 0
    for p in range(s, e):
        r = row[p]
        # branchless: write both, advance one cursor
        gl_ = np.int64(goes_left[r])
        row[li] = r
        tmp[ri] = r
        li += gl_
        ri += 1 - gl_
    for q in range(ri):
        row[li + q] = tmp[q]
    return li - s


@numba.njit(cache=True)
def _grow_tree(Xt, rank, ties, order, gh, alpha, lam, mcs, mcw, num_leaves, lr):
    """Grow one tree leaf-wise; ``order`` is permuted in place."""
    n_rows = order.shape[1]
    F = order.shape[0]
    max_nodes = 2 * num_leaves - 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    default_left = np.ones(max_nodes, np.bool_)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)

    seg_s = np.zeros(max_nodes, np.int64)
    seg_e = np.zeros(max_nodes, np.int64)
    Gs = np.zeros(max_nodes)
    Hs = np.zeros(max_nodes)
    cand_f = np.full(max_nodes, -1, np.int64)
    cand_t = np.zeros(max_nodes)
    cand_gain = np.zeros(max_nodes)
    cand_dl = np.ones(max_nodes, np.bool_)
    is_leaf = np.zeros(max_nodes, np.bool_)

    goes_left = np.zeros(Xt.shape[1], np.uint8)
    tmp = np.empty(n_rows, order.dtype)
    Gc = np.zeros(2)
    Hc = np.zeros(2)
    bar = np.zeros(2)
    best_p = np.zeros(2, np.int64)
    best_dl = np.ones(2, np.bool_)
    best_f = np.zeros(2, np.int64)
    scan = np.zeros(2, np.bool_)

    G0, H0 = _segment_sums(order[0], 0, n_rows, gh)
    seg_e[0] = n_rows
    Gs[0] = G0
    Hs[0] = H0
    is_leaf[0] = True
    if n_rows >= 2 * mcs:
        bf, bt, bg, bd = _scan_segment(Xt, rank, ties, order, 0, n_rows, gh, G0, H0, alpha, lam, mcs, mcw)
        cand_f[0] = bf
        cand_t[0] = bt
        cand_gain[0] = bg
        cand_dl[0] = bd
    n_nodes = 1
    n_leaves = 1
    while n_leaves < num_leaves:
        pick = -1
        pick_gain = 0.0
        for i in range(n_nodes):
            if is_leaf[i] and cand_f[i] >= 0 and cand_gain[i] > pick_gain:
                pick = i
                pick_gain = cand_gain[i]
        if pick < 0:
            break
        f = cand_f[pick]
        t = cand_t[pick]
        dl = cand_dl[pick]
        s = seg_s[pick]
        e = seg_e[pick]
        x_f = Xt[f]
        # route rows and take child sums in feature-0 order
        nl = 0
        GL = 0.0
        HL = 0.0
        GR = 0.0
        HR = 0.0
        order0 = order[0]
        for p in range(s, e):
            r = order0[p]
            xv = x_f[r]
            if math.isnan(xv):
                side = dl
            else:
                side = xv <= t
            goes_left[r] = side
            if side:
                nl += 1
                GL += gh[r, 0]
                HL += gh[r, 1]
            else:
                GR += gh[r, 0]
                HR += gh[r, 1]
        Gc[0] = GL
        Hc[0] = HL
        Gc[1] = GR
        Hc[1] = HR
        scan[0] = nl >= 2 * mcs
        scan[1] = e - s - nl >= 2 * mcs
        for k in range(2):
            bar[k] = _initial_bar(Gc[k], Hc[k], alpha, lam)
            best_f[k] = -1
        bounds_s = (s, s + nl)
        bounds_e = (s + nl, e)
        # children too small to split again never need their sorted orders
        for ff in range(F if scan[0] or scan[1] else 0):
            row = order[ff]
            rank_f = rank[ff]
            _partition(row, goes_left, s, e, tmp)
            for k in range(2):
                if not scan[k]:
                    continue
                nb, p, d, found = _scan_feature(row, rank_f, ties[ff], bounds_s[k], bounds_e[k],
                                                gh, Gc[k], Hc[k], alpha, lam, mcs, mcw, bar[k])
                if found:
                    bar[k] = nb
                    best_f[k] = ff
                    best_p[k] = p - bounds_s[k]
                    best_dl[k] = d
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[pick] = f
        threshold[pick] = t
        default_left[pick] = dl
        left[pick] = lc
        right[pick] = rc
        is_leaf[pick] = False
        for k in range(2):
            c = lc + k
            is_leaf[c] = True
            seg_s[c] = bounds_s[k]
            seg_e[c] = bounds_e[k]
            Gs[c] = Gc[k]
            Hs[c] = Hc[k]
            if best_f[k] >= 0:
                bf = best_f[k]
                row_f = order[bf]
                p = bounds_s[k] + best_p[k]
                cand_f[c] = bf
                cand_t[c] = _midpoint(Xt[bf, row_f[p]], Xt[bf, row_f[p + 1]])
                cand_gain[c] = bar[k] - _score(Gc[k], Hc[k], alpha, lam)
                cand_dl[c] = best_dl[k]
        n_leaves += 1
    for i in range(n_nodes):
        if is_leaf[i]:
            value[i] = lr * _leaf_value(Gs[i], Hs[i], alpha, lam)
    return (feature[:n_nodes], threshold[:n_nodes], default_left[:n_nodes],
            left[:n_nodes], right[:n_nodes], value[:n_nodes])


@numba.njit(cache=True)
def _subset_order(full_order, member):
    """Restrict presorted per-feature orders to rows where ``member`` is set."""
    F, N = full_order.shape
    m = 0
    for r in range(N):
        if member[r]:
            m += 1
    out = np.empty((F, m), full_order.dtype)
    for f in range(F):
        k = 0
        for p in range(N):
            r = full_order[f, p]
            if member[r]:
                out[f, k] = r
                k += 1
    return out


@numba.njit(cache=True)
def _route(X, feature, threshold, default_left, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            xv = X[i, feature[node]]
            if math.isnan(xv):
                go_left = default_left[node]
            else:
                go_left = xv <= threshold[node]
            node = left[node] if go_left else right[node]
        out[i] = value[node]
    return out


def presort(Xt: np.ndarray):
    """Per-feature row order (NaN last, stable), dense value ranks and a
    flag per feature telling whether any two non-NaN values are equal."""
    order = np.argsort(Xt, axis=1, kind="stable").astype(np.int32)
    rank = np.full(Xt.shape, _NAN_RANK, dtype=np.int32)
    ties = np.zeros(Xt.shape[0], dtype=np.bool_)
    for f in range(Xt.shape[0]):
        finite = ~np.isnan(Xt[f])
        uniq, inv = np.unique(Xt[f, finite], return_inverse=True)
        rank[f, finite] = inv
        ties[f] = len(uniq) < int(finite.sum())
    return order, rank, ties


# ---------------------------------------------------------------------------
# public split search (single node)
# ---------------------------------------------------------------------------

def best_split(X, g, h, members, hp: GbmHyperParams):
    """Exact best split of one node.

    Returns ``None`` when no split has positive gain, otherwise a dict with
    ``feature``, ``threshold``, ``gain`` and ``default_left``.
    """
    X = np.asarray(X, dtype=np.float64)
    members = np.asarray(members, dtype=np.int64)
    if len(members) < 2 * hp.min_child_samples:
        return None
    Xt = np.ascontiguousarray(X.T)
    mask = np.zeros(X.shape[0], dtype=np.bool_)
    mask[members] = True
    full_order, rank, ties = presort(Xt)
    order = _subset_order(full_order, mask)
    gh = np.ascontiguousarray(np.column_stack([g, h]), dtype=np.float64)
    G, H = _segment_sums(order[0], 0, order.shape[1], gh)
    f, t, gain, dl = _scan_segment(Xt, rank, ties, order, 0, order.shape[1], gh, G, H,
                                   float(hp.alpha), float(hp.reg_lambda),
                                   int(hp.min_child_samples), float(hp.min_child_weight))
    if f < 0:
        return None
    return {"feature": int(f), "threshold": float(t), "gain": float(gain), "default_left": bool(dl)}


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _route(X, self.feature, self.threshold, self.default_left,
                      self.left, self.right, self.value)

    def to_json(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "default_left": bool(self.default_left[node]),
            "left": self.to_json(int(self.left[node])),
            "right": self.to_json(int(self.right[node])),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Tree":
        feature, threshold, dleft, left, right, value = [], [], [], [], [], []

        def visit(o):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            dleft.append(True)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "leaf" in o:
                value[i] = float(o["leaf"])
                return i
            feature[i] = int(o["feature"])
            threshold[i] = float(o["threshold"])
            dleft[i] = bool(o["default_left"])
            left[i] = visit(o["left"])
            right[i] = visit(o["right"])
            return i

        visit(obj)
        return cls(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                   np.array(dleft, dtype=np.bool_), np.array(left, dtype=np.int64),
                   np.array(right, dtype=np.int64), np.array(value, dtype=np.float64))


@dataclass
class GbmModel:
    objective: str
    base_score: float
    feature_count: int
    trees: list[Tree] = field(default_factory=list)
    hyperparams: GbmHyperParams | None = None

    def predict(self, X) -> np.ndarray:
        """Raw scores: ``base_score`` plus the sum of tree outputs."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ValueError(f"expected {self.feature_count} feature columns, got shape {X.shape}")
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            out += tree.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        if self.objective != "weighted_logistic":
            raise ValueError("predict_proba is only defined for the logistic objective")
        return _sigmoid(self.predict(X))

    def to_json(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "base_score": float(self.base_score),
            "feature_count": int(self.feature_count),
            "hyperparams": None if self.hyperparams is None else self.hyperparams.to_dict(),
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GbmModel":
        hp = obj.get("hyperparams")
        return cls(
            objective=obj["objective"],
            base_score=float(obj["base_score"]),
            feature_count=int(obj["feature_count"]),
            trees=[Tree.from_json(t) for t in obj["trees"]],
            hyperparams=None if hp is None else GbmHyperParams.from_dict(hp),
        )


def fit(X, y, weights=None, hp: GbmHyperParams | None = None, seed: int = 0,
        objective: str = "squared", trace: list | None = None) -> GbmModel:
    """Boost ``hp.n_estimators`` trees on ``X``.

    Row subsampling draws ``round(subsample * N)`` rows without replacement per
    tree from ``numpy.random.default_rng(seed)``. When ``trace`` is a list, the
    training scores after every iteration are appended to it (copies).
    """
    hp = hp or GbmHyperParams()
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(y) != X.shape[0] or X.shape[0] == 0:
        raise ValueError("X must be 2-D with one row per target")
    if np.isinf(X).any():
        raise ValueError("X must be finite or NaN")
    N, F = X.shape
    w = np.ones(N) if weights is None else np.asarray(weights, dtype=np.float64)
    if len(w) != N or not np.all(w > 0):
        raise ValueError("weights must be positive, one per row")

    if objective == "weighted_logistic":
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("logistic targets must be 0/1")
        rate = float(np.sum(w * y) / np.sum(w))
        if rate <= 0.0 or rate >= 1.0:
            raise ValueError("logistic objective needs both classes in y")
        base = math.log(rate / (1.0 - rate))
    else:
        if not np.all(np.isfinite(y)):
            raise ValueError("regression targets must be finite")
        base = float(np.sum(w * y) / np.sum(w))

    model = GbmModel(objective=objective, base_score=base, feature_count=F, hyperparams=hp)
    scores = np.full(N, base, dtype=np.float64)
    if hp.n_estimators == 0:
        return model

    Xt = np.ascontiguousarray(X.T)
    full_order, rank, ties = presort(Xt)
    rng = np.random.default_rng(seed)
    m = max(1, int(round(hp.subsample * N)))
    args = (float(hp.alpha), float(hp.reg_lambda), int(hp.min_child_samples),
            float(hp.min_child_weight), int(hp.num_leaves), float(hp.learning_rate))
    for _ in range(hp.n_estimators):
        g, h = loss_grad_hess(objective, scores, y, w)
        gh = np.empty((N, 2))
        gh[:, 0] = g
        gh[:, 1] = h
        if m < N:
            member = np.zeros(N, dtype=np.bool_)
            member[rng.choice(N, size=m, replace=False)] = True
            order = _subset_order(full_order, member)
        else:
            order = full_order.copy()
        arrays = _grow_tree(Xt, rank, ties, order, gh, *args)
        tree = Tree(*[a.copy() for a in arrays])
        model.trees.append(tree)
        scores += tree.predict(X)
        if trace is not None:
            trace.append(scores.copy())
    return model


def balanced_class_weights(y) -> np.ndarray:
    """Per-row weights ``N / (2 * N_c)`` for the row's class ``c``."""
    y = np.asarray(y)
    n = len(y)
    n_pos = int(np.sum(y == 1))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("class weights need both classes present")
    return np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))
