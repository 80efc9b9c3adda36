"""Automated feature extraction from process time series.

A :class:`FeatureCatalog` is an ordered list of ``(extractor, params)``
descriptors applied to every series. Extractors of one family share their
intermediate work (FFT, autocorrelations, moments) per series.

Conventions
-----------
* Undefined values are NaN, never an exception: statistics of a constant
  series (or one whose variance is below 1e-150) that divide by its
  variance, lags or chunks longer than the series,
  Fourier coefficients beyond the Nyquist index.
* Autocorrelation at lag ``l`` is the biased estimate
  ``sum_{t<n-l} (x_t - m)(x_{t+l} - m) / (n * var)``.
* Approximate entropy uses the Chebyshev distance with tolerance ``r * std``.
* Fourier phases are in degrees.

Column names follow ``<series>__<extractor>__<params>``, where params are
``key=value`` pairs joined by ``;`` (``none`` for parameterless extractors).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numba
import numpy as np

from .simcore import SERIES_NAMES, MouldingRun

QUANTILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class Extractor:
    name: str
    params: tuple[tuple[str, object], ...] = ()

    @property
    def param_string(self) -> str:
        if not self.params:
            return "none"
        return ";".join(f"{k}={_fmt(v)}" for k, v in self.params)

    @property
    def label(self) -> str:
        return f"{self.name}__{self.param_string}"

    def kwargs(self) -> dict:
        return dict(self.params)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    return str(v)


class FeatureCatalog:
    """Ordered extractor descriptors; see :func:`default_catalog`."""

    def __init__(self, extractors: Sequence[Extractor]):
        self.extractors = tuple(extractors)
        labels = [e.label for e in self.extractors]
        if len(set(labels)) != len(labels):
            raise ValueError("extractor descriptors must be unique")
        unknown = {e.name for e in self.extractors} - set(_FAMILIES)
        if unknown:
            raise ValueError(f"unknown extractors: {sorted(unknown)}")
        # positions of each family's descriptors, in first-appearance order
        self._groups: dict[str, list[int]] = {}
        for i, e in enumerate(self.extractors):
            self._groups.setdefault(e.name, []).append(i)

    def __len__(self) -> int:
        return len(self.extractors)

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.extractors]

    def column_names(self, series_names: Sequence[str] = SERIES_NAMES) -> list[str]:
        return [f"{s}__{lab}" for s in series_names for lab in self.labels]

    def manifest(self) -> list[dict]:
        return [{"name": e.name, "params": {k: v for k, v in e.params}} for e in self.extractors]

    @classmethod
    def from_manifest(cls, entries: Sequence[dict]) -> "FeatureCatalog":
        return cls([Extractor(d["name"], tuple(d["params"].items())) for d in entries])

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=1)


def _grid(name: str, **axes) -> list[Extractor]:
    """Cartesian product of parameter axes, last axis varying fastest."""
    keys = list(axes)
    out = [()]
    for k in keys:
        out = [p + ((k, v),) for p in out for v in axes[k]]
    return [Extractor(name, p) for p in out]


def default_catalog() -> FeatureCatalog:
    ex: list[Extractor] = []
    for name in ("mean", "variance", "standard_deviation", "skewness", "kurtosis", "sum_values",
                 "minimum", "maximum", "median"):
        ex.append(Extractor(name))
    ex += _grid("quantile", q=QUANTILES)
    for name in ("abs_energy", "mean_abs_change", "mean_change", "absolute_sum_of_changes",
                 "mean_second_derivative_central"):
        ex.append(Extractor(name))
    ex += _grid("autocorrelation", lag=range(1, 21))
    ex += _grid("partial_autocorrelation", lag=range(1, 11))
    ex += _grid("c3", lag=(1, 2, 3))
    ex += _grid("time_reversal_asymmetry_statistic", lag=(1, 2, 3))
    ex += _grid("cid_ce", normalize=(False, True))
    ex += _grid("binned_entropy", max_bins=(5, 10, 20))
    ex += _grid("approximate_entropy", m=(2,), r=(0.2,))
    for name in ("count_above_mean", "count_below_mean", "longest_strike_above_mean",
                 "longest_strike_below_mean", "number_crossing_mean"):
        ex.append(Extractor(name))
    ex += _grid("number_peaks", n=(1, 3, 5, 10))
    ex += _grid("ratio_beyond_r_sigma", r=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0))
    ex += _grid("index_mass_quantile", q=QUANTILES)
    ex += _grid("linear_trend", attr=("slope", "intercept", "rvalue", "stderr"))
    ex += _grid("agg_linear_trend", f_agg=("max", "min", "mean", "var"), chunk_len=(5, 10, 50),
                attr=("slope", "intercept", "rvalue", "stderr"))
    ex += _grid("fft_coefficient", coeff=range(64), attr=("real", "imag", "abs", "angle"))
    ex += _grid("fft_aggregated", aggtype=("centroid", "variance", "skew", "kurtosis"))
    ex += _grid("energy_ratio_by_chunks", num_segments=(10,), segment_focus=range(10))
    for name in ("first_location_of_maximum", "last_location_of_maximum",
                 "first_location_of_minimum", "last_location_of_minimum"):
        ex.append(Extractor(name))
    ex += _grid("mean_n_absolute_max", number_of_maxima=(3, 5, 7))
    return FeatureCatalog(ex)


# ---------------------------------------------------------------------------
# per-series context
# ---------------------------------------------------------------------------

class _Series:
    def __init__(self, x: np.ndarray):
        self.x = x
        self.n = len(x)

    @cached_property
    def mean(self) -> float:
        return float(np.mean(self.x))

    @cached_property
    def centered(self) -> np.ndarray:
        return self.x - self.mean

    @cached_property
    def var(self) -> float:
        return float(np.mean(self.centered ** 2))

    @cached_property
    def std(self) -> float:
        return math.sqrt(self.var)

    @cached_property
    def constant(self) -> bool:
        # a variance this small underflows in the moment ratios, so treat it as zero
        return bool(np.all(self.x == self.x[0])) or not self.var > 1e-150

    @cached_property
    def diff(self) -> np.ndarray:
        return np.diff(self.x)

    @cached_property
    def rfft(self) -> np.ndarray:
        return np.fft.rfft(self.x)


def _nan_if(cond: bool, value) -> float:
    return math.nan if cond else float(value)


# ---------------------------------------------------------------------------
# extractor families: fn(series_ctx, [kwargs, ...]) -> [values]
# ---------------------------------------------------------------------------

def _scalar(fn: Callable[[_Series], float]):
    def family(s: _Series, params: list[dict]) -> list[float]:
        return [fn(s)] * len(params)
    return family


def _skewness(s: _Series) -> float:
    # adjusted Fisher-Pearson coefficient, as in pandas
    n = s.n
    if s.constant or n < 3:
        return math.nan
    m2 = s.var
    m3 = float(np.mean(s.centered ** 3))
    g1 = m3 / m2 ** 1.5
    return g1 * math.sqrt(n * (n - 1)) / (n - 2)


def _kurtosis(s: _Series) -> float:
    # bias-corrected excess kurtosis, as in pandas
    n = s.n
    if s.constant or n < 4:
        return math.nan
    m2 = s.var
    m4 = float(np.mean(s.centered ** 4))
    g2 = m4 / m2 ** 2 - 3.0
    return ((n + 1) * g2 + 6.0) * (n - 1) / ((n - 2) * (n - 3))


def _quantile(s, params):
    return [float(v) for v in np.quantile(s.x, [p["q"] for p in params])]


def _mean_second_derivative_central(s: _Series) -> float:
    if s.n < 3:
        return math.nan
    return float((s.x[-1] - s.x[-2] - s.x[1] + s.x[0]) / (2.0 * (s.n - 2)))


def _acf(s: _Series, max_lag: int) -> np.ndarray:
    """Biased autocorrelation for lags 0..max_lag (NaN when undefined)."""
    out = np.full(max_lag + 1, np.nan)
    if s.constant:
        return out
    c = s.centered
    denom = s.n * s.var
    for lag in range(min(max_lag, s.n - 1) + 1):
        out[lag] = float(np.dot(c[: s.n - lag], c[lag:])) / denom
    return out


def _autocorrelation(s, params):
    lags = [p["lag"] for p in params]
    acf = _acf(s, max(lags))
    return [float(acf[lag]) for lag in lags]


def _partial_autocorrelation(s, params):
    lags = [p["lag"] for p in params]
    max_lag = max(lags)
    acf = _acf(s, max_lag)
    pacf = np.full(max_lag + 1, np.nan)
    pacf[0] = 1.0
    # Durbin-Levinson recursion on the biased autocorrelations
    phi = np.zeros(max_lag + 1)
    v = 1.0
    for k in range(1, max_lag + 1):
        if not np.isfinite(acf[k]) or v <= 0:
            break
        a = (acf[k] - np.dot(phi[1:k], acf[k - 1:0:-1])) / v
        new = phi.copy()
        new[k] = a
        new[1:k] = phi[1:k] - a * phi[k - 1:0:-1]
        phi = new
        v *= 1.0 - a * a
        pacf[k] = a
    return [float(pacf[lag]) for lag in lags]


def _c3(s, params):
    x = s.x
    out = []
    for p in params:
        lag = p["lag"]
        m = s.n - 2 * lag
        out.append(math.nan if m <= 0 else float(np.mean(x[2 * lag:] * x[lag:s.n - lag] * x[:m])))
    return out


def _time_reversal(s, params):
    x = s.x
    out = []
    for p in params:
        lag = p["lag"]
        m = s.n - 2 * lag
        if m <= 0:
            out.append(math.nan)
            continue
        a = x[2 * lag:]
        b = x[lag:s.n - lag]
        c = x[:m]
        out.append(float(np.mean(a * a * b - b * c * c)))
    return out


def _cid_ce(s, params):
    out = []
    for p in params:
        if p["normalize"]:
            if s.constant:
                out.append(math.nan)
                continue
            d = np.diff(s.centered / s.std)
        else:
            d = s.diff
        out.append(float(math.sqrt(np.dot(d, d))))
    return out


def _binned_entropy(s, params):
    out = []
    for p in params:
        hist, _ = np.histogram(s.x, bins=p["max_bins"])
        probs = hist[hist > 0] / s.n
        out.append(float(-np.sum(probs * np.log(probs))))
    return out


@numba.njit(cache=True)
def _apen_counts(uniq, weight, r):
    # uniq: distinct templates sorted on their first column, weight: their
    # multiplicities. Only a window on the first column can lie within r.
    u, m = uniq.shape
    first = uniq[:, 0].copy()
    out = np.empty(u)
    for i in range(u):
        lo = np.searchsorted(first, first[i] - r, side="left")
        hi = np.searchsorted(first, first[i] + r, side="right")
        count = 0.0
        for j in range(lo, hi):
            ok = True
            for k in range(1, m):
                if abs(uniq[i, k] - uniq[j, k]) > r:
                    ok = False
                    break
            if ok:
                count += weight[j]
        out[i] = count
    return out


def _apen_phi(x: np.ndarray, m: int, r: float) -> float:
    n = len(x) - m + 1
    templates = np.lib.stride_tricks.sliding_window_view(x, m)
    uniq, weight = np.unique(templates, axis=0, return_counts=True)
    counts = _apen_counts(np.ascontiguousarray(uniq), weight.astype(np.float64), r)
    return float(np.dot(weight, np.log(counts / n))) / n


def _approximate_entropy(s, params):
    out = []
    for p in params:
        m = p["m"]
        if s.n <= m + 1:
            out.append(0.0)
            continue
        r = p["r"] * s.std
        out.append(float(_apen_phi(s.x, m, r) - _apen_phi(s.x, m + 1, r)))
    return out


@numba.njit(cache=True)
def _longest_run(mask):
    best = 0
    cur = 0
    for v in mask:
        if v:
            cur += 1
            if cur > best:
                best = cur
        else:
            cur = 0
    return best


def _number_crossing_mean(s: _Series) -> float:
    above = s.x > s.mean
    return float(np.count_nonzero(above[1:] != above[:-1]))


def _number_peaks(s, params):
    x = s.x
    out = []
    for p in params:
        n = p["n"]
        if s.n < 2 * n + 1:
            out.append(0.0)
            continue
        core = x[n:s.n - n]
        peak = np.ones(len(core), dtype=bool)
        for k in range(1, n + 1):
            peak &= core > x[n - k:s.n - n - k]
            peak &= core > x[n + k:s.n - n + k]
        out.append(float(np.count_nonzero(peak)))
    return out


def _ratio_beyond_r_sigma(s, params):
    dev = np.abs(s.centered)
    return [float(np.count_nonzero(dev > p["r"] * s.std)) / s.n for p in params]


def _index_mass_quantile(s, params):
    a = np.abs(s.x)
    total = float(a.sum())
    if total == 0.0:
        return [math.nan] * len(params)
    mass = np.cumsum(a) / total
    return [float(np.argmax(mass >= p["q"]) + 1) / s.n for p in params]


def _linregress(y: np.ndarray) -> dict[str, float]:
    n = len(y)
    nan = {"slope": math.nan, "intercept": math.nan, "rvalue": math.nan, "stderr": math.nan}
    if n < 2:
        return nan
    t = np.arange(n, dtype=np.float64)
    tm = (n - 1) / 2.0
    ym = float(np.mean(y))
    dt = t - tm
    dy = y - ym
    sxx = float(np.dot(dt, dt))
    sxy = float(np.dot(dt, dy))
    syy = float(np.dot(dy, dy))
    slope = sxy / sxx
    intercept = ym - slope * tm
    denom = math.sqrt(sxx * syy)
    rvalue = math.nan if denom == 0.0 else sxy / denom
    if n > 2:
        resid = dy - slope * dt
        stderr = math.sqrt(float(np.dot(resid, resid)) / (n - 2) / sxx)
    else:
        stderr = math.nan
    return {"slope": slope, "intercept": intercept, "rvalue": rvalue, "stderr": stderr}


def _linear_trend(s, params):
    fit = _linregress(s.x)
    return [fit[p["attr"]] for p in params]


def _chunk_aggregate(x: np.ndarray, chunk_len: int, f_agg: str) -> np.ndarray:
    """Aggregate consecutive chunks; the last chunk may be shorter."""
    starts = np.arange(0, len(x), chunk_len)
    if f_agg == "max":
        return np.maximum.reduceat(x, starts)
    if f_agg == "min":
        return np.minimum.reduceat(x, starts)
    sizes = np.diff(np.append(starts, len(x)))
    means = np.add.reduceat(x, starts) / sizes
    if f_agg == "mean":
        return means
    dev = x - np.repeat(means, sizes)
    return np.add.reduceat(dev * dev, starts) / sizes


def _agg_linear_trend(s, params):
    cache: dict[tuple, dict] = {}
    out = []
    for p in params:
        key = (p["f_agg"], p["chunk_len"])
        if key not in cache:
            cl = p["chunk_len"]
            if -(-s.n // cl) < 2:
                cache[key] = _linregress(np.empty(0))
            else:
                cache[key] = _linregress(_chunk_aggregate(s.x, cl, p["f_agg"]))
        out.append(cache[key][p["attr"]])
    return out


def _fft_coefficient(s, params):
    f = s.rfft
    out = []
    for p in params:
        k = p["coeff"]
        if k >= len(f):
            out.append(math.nan)
            continue
        c = f[k]
        attr = p["attr"]
        if attr == "real":
            out.append(float(c.real))
        elif attr == "imag":
            out.append(float(c.imag))
        elif attr == "abs":
            out.append(float(abs(c)))
        else:
            out.append(float(math.degrees(math.atan2(c.imag, c.real))))
    return out


def _fft_aggregated(s, params):
    a = np.abs(s.rfft)
    total = float(a.sum())
    if total == 0.0:
        return [math.nan] * len(params)
    k = np.arange(len(a), dtype=np.float64)
    w = a / total

    def moment(j):
        return float(np.dot(w, k ** j))

    m1 = moment(1)
    var = moment(2) - m1 ** 2
    res = {"centroid": m1, "variance": var}
    # a single occupied bin leaves only rounding noise in var
    if var <= 1e-12 * max(1.0, m1 * m1):
        res["skew"] = math.nan
        res["kurtosis"] = math.nan
    else:
        res["skew"] = (moment(3) - 3 * m1 * var - m1 ** 3) / var ** 1.5
        res["kurtosis"] = (moment(4) - 4 * m1 * moment(3) + 6 * moment(2) * m1 ** 2
                           - 3 * m1 ** 4) / var ** 2
    return [res[p["aggtype"]] for p in params]


def _energy_ratio_by_chunks(s, params):
    total = float(np.dot(s.x, s.x))
    out = []
    for p in params:
        segs = np.array_split(s.x, p["num_segments"])
        if total == 0.0:
            out.append(math.nan)
            continue
        seg = segs[p["segment_focus"]]
        out.append(float(np.dot(seg, seg)) / total)
    return out


def _mean_n_absolute_max(s, params):
    a = np.sort(np.abs(s.x))[::-1]
    return [math.nan if p["number_of_maxima"] > s.n else float(np.mean(a[:p["number_of_maxima"]]))
            for p in params]


_FAMILIES: dict[str, Callable[[_Series, list[dict]], list[float]]] = {
    "mean": _scalar(lambda s: s.mean),
    "variance": _scalar(lambda s: s.var),
    "standard_deviation": _scalar(lambda s: s.std),
    "skewness": _scalar(_skewness),
    "kurtosis": _scalar(_kurtosis),
    "sum_values": _scalar(lambda s: float(np.sum(s.x))),
    "minimum": _scalar(lambda s: float(np.min(s.x))),
    "maximum": _scalar(lambda s: float(np.max(s.x))),
    "median": _scalar(lambda s: float(np.median(s.x))),
    "quantile": _quantile,
    "abs_energy": _scalar(lambda s: float(np.dot(s.x, s.x))),
    "mean_abs_change": _scalar(lambda s: float(np.mean(np.abs(s.diff)))),
    "mean_change": _scalar(lambda s: float((s.x[-1] - s.x[0]) / (s.n - 1))),
    "absolute_sum_of_changes": _scalar(lambda s: float(np.sum(np.abs(s.diff)))),
    "mean_second_derivative_central": _scalar(_mean_second_derivative_central),
    "autocorrelation": _autocorrelation,
    "partial_autocorrelation": _partial_autocorrelation,
    "c3": _c3,
    "time_reversal_asymmetry_statistic": _time_reversal,
    "cid_ce": _cid_ce,
    "binned_entropy": _binned_entropy,
    "approximate_entropy": _approximate_entropy,
    "count_above_mean": _scalar(lambda s: float(np.count_nonzero(s.x > s.mean))),
    "count_below_mean": _scalar(lambda s: float(np.count_nonzero(s.x < s.mean))),
    "longest_strike_above_mean": _scalar(lambda s: float(_longest_run(s.x > s.mean))),
    "longest_strike_below_mean": _scalar(lambda s: float(_longest_run(s.x < s.mean))),
    "number_crossing_mean": _scalar(_number_crossing_mean),
    "number_peaks": _number_peaks,
    "ratio_beyond_r_sigma": _ratio_beyond_r_sigma,
    "index_mass_quantile": _index_mass_quantile,
    "linear_trend": _linear_trend,
    "agg_linear_trend": _agg_linear_trend,
    "fft_coefficient": _fft_coefficient,
    "fft_aggregated": _fft_aggregated,
    "energy_ratio_by_chunks": _energy_ratio_by_chunks,
    "first_location_of_maximum": _scalar(lambda s: float(np.argmax(s.x)) / s.n),
    "last_location_of_maximum": _scalar(lambda s: 1.0 - float(np.argmax(s.x[::-1])) / s.n),
    "first_location_of_minimum": _scalar(lambda s: float(np.argmin(s.x)) / s.n),
    "last_location_of_minimum": _scalar(lambda s: 1.0 - float(np.argmin(s.x[::-1])) / s.n),
    "mean_n_absolute_max": _mean_n_absolute_max,
}


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def extract_series_features(series, catalog: FeatureCatalog | None = None) -> np.ndarray:
    """One value per catalog entry, in catalog order."""
    catalog = catalog or default_catalog()
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("a series needs at least two points")
    if not np.all(np.isfinite(x)):
        raise ValueError("series values must be finite")
    s = _Series(x)
    out = np.empty(len(catalog))
    with np.errstate(all="ignore"):
        for name, idx in catalog._groups.items():
            params = [catalog.extractors[i].kwargs() for i in idx]
            out[idx] = _FAMILIES[name](s, params)
    return out


@dataclass
class FeatureMatrix:
    column_names: list[str]
    values: np.ndarray  # runs x features, float64, NaN allowed
    run_ids: list[int]

    def __post_init__(self):
        if self.values.shape != (len(self.run_ids), len(self.column_names)):
            raise ValueError("values shape must be (runs, columns)")
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError("column names must be unique")

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def subset(self, names: Sequence[str]) -> np.ndarray:
        index = {n: i for i, n in enumerate(self.column_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise KeyError(f"feature not in matrix: {missing[0]}")
        return self.values[:, [index[n] for n in names]]

    def rows(self, run_ids: Sequence[int]) -> "FeatureMatrix":
        pos = {r: i for i, r in enumerate(self.run_ids)}
        sel = [pos[r] for r in run_ids]
        return FeatureMatrix(list(self.column_names), self.values[sel], list(run_ids))


def extract_run_features(run: MouldingRun, catalog: FeatureCatalog) -> np.ndarray:
    lengths = {len(run.series(s)) for s in SERIES_NAMES}
    if len(lengths) != 1:
        raise ValueError(f"run {run.run_id}: series lengths differ {sorted(lengths)}")
    return np.concatenate([extract_series_features(run.series(s), catalog) for s in SERIES_NAMES])


def extract_matrix(runs: Sequence[MouldingRun], catalog: FeatureCatalog | None = None,
                   jobs: int = 1) -> FeatureMatrix:
    """Feature rows for ``runs`` in the given order; independent of ``jobs``."""
    catalog = catalog or default_catalog()
    if jobs > 1 and len(runs) > 1:
        from joblib import Parallel, delayed
        rows = Parallel(n_jobs=jobs, batch_size=16)(
            delayed(extract_run_features)(r, catalog) for r in runs)
    else:
        rows = [extract_run_features(r, catalog) for r in runs]
    values = np.vstack(rows) if rows else np.empty((0, 3 * len(catalog)))
    return FeatureMatrix(catalog.column_names(), values, [r.run_id for r in runs])
