"""Surrogate injection-moulding simulator.

Each shot is described by six varied inputs (:class:`ProcessParams`). The
surrogate turns them into three process signals sampled on a fixed grid
(injection pressure, cavity pressure, ram position) and an opening distance
obtained from a linear-Gaussian shrinkage model. Parts whose opening distance
deviates from the dataset mean by more than ``k`` standard deviations are
labelled as rejects (positive class).

The signal shapes are qualitative: fill, packing and cooling phases with the
physical dependencies that make every input recoverable from the signals
(fill time from flow rate, fill pressure from Cross-WLF viscosity, plateau from
packing pressure, decay times from melt and cooling-water temperature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtri

PARAM_NAMES = (
    "cooling_water_temp",
    "melt_temp",
    "flowrate",
    "packing_pressure",
    "power_law_n",
    "d1_viscosity",
)

SERIES_NAMES = ("injection_pressure", "cavity_pressure", "ram_position")

# ratio of interquartile range to standard deviation for a normal distribution
IQR_TO_STD = 1.349


@dataclass(frozen=True)
class ProcessParams:
    cooling_water_temp: float  # K
    melt_temp: float  # K
    flowrate: float  # cm^3/s
    packing_pressure: float  # bar
    power_law_n: float
    d1_viscosity: float  # Pa s

    def __post_init__(self):
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if self.power_law_n > 1:
            raise ValueError(f"power_law_n must lie in (0, 1], got {self.power_law_n}")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, n) for n in PARAM_NAMES)


@dataclass(frozen=True)
class Spread:
    median: float
    iqr_low: float
    iqr_high: float

    def __post_init__(self):
        if not self.iqr_low < self.median < self.iqr_high:
            raise ValueError(f"need iqr_low < median < iqr_high, got {self}")

    @property
    def std(self) -> float:
        return (self.iqr_high - self.iqr_low) / IQR_TO_STD


@dataclass(frozen=True)
class ParamDistributions:
    """Median and interquartile range per varied input."""

    cooling_water_temp: Spread = Spread(313.4, 310.1, 316.5)
    melt_temp: Spread = Spread(503.2, 500.8, 505.4)
    flowrate: Spread = Spread(40.0, 38.1, 41.9)
    packing_pressure: Spread = Spread(400.1, 381.8, 417.9)
    power_law_n: Spread = Spread(0.23, 0.21, 0.25)
    d1_viscosity: Spread = Spread(5.8e13, 5.6e13, 6.0e13)

    def medians(self) -> ProcessParams:
        return ProcessParams(*(getattr(self, n).median for n in PARAM_NAMES))

    def to_dict(self) -> dict:
        return {n: asdict(getattr(self, n)) for n in PARAM_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamDistributions":
        unknown = set(d) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        return cls(**{n: Spread(**d[n]) for n in PARAM_NAMES if n in d})


@dataclass(frozen=True)
class CrossWlfConstants:
    tau_star: float = 25_000.0  # Pa
    d2_ref_temp: float = 263.15  # K
    a1: float = 28.3
    a2: float = 51.6  # K


@dataclass(frozen=True)
class SimConfig:
    nominal_opening_distance: float = 100.0  # mm
    shot_volume: float = 120.0  # cm^3
    cycle_duration: float = 35.0  # s
    sample_rate: float = 50.0  # Hz
    cross_wlf: CrossWlfConstants = field(default_factory=CrossWlfConstants)
    # shrinkage sensitivity per standard deviation of
    # (melt_temp, packing_pressure, cooling_water_temp, log reference viscosity)
    shrinkage_coefficients: tuple[float, float, float, float] = (0.003, -0.006, 0.003, 0.002)
    base_shrink: float = 0.015
    noise_std: float = 0.02  # mm
    rng_seed: int = 0
    # surrogate signal shape
    pack_duration: float = 8.0  # s
    reference_shear_rate: float = 1000.0  # 1/s, for the shrinkage viscosity term
    shear_per_flow: float = 25.0  # fill shear rate per cm^3/s of flow
    nominal_fill_pressure: float = 600.0  # bar at median inputs
    screw_area: float = 9.62  # cm^2
    cushion: float = 10.0  # mm
    pressure_noise: float = 0.5  # bar
    position_noise: float = 0.01  # mm

    def __post_init__(self):
        n = self.sample_rate * self.cycle_duration
        if abs(n - round(n)) > 1e-9 or round(n) < 100:
            raise ValueError("sample_rate * cycle_duration must be an integer >= 100")
        if self.noise_std < 0 or self.pressure_noise < 0 or self.position_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if len(self.shrinkage_coefficients) != 4:
            raise ValueError("shrinkage_coefficients needs four entries")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.cycle_duration))

    def time_grid(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shrinkage_coefficients"] = list(self.shrinkage_coefficients)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "cross_wlf" in d:
            d["cross_wlf"] = CrossWlfConstants(**d["cross_wlf"])
        if "shrinkage_coefficients" in d:
            d["shrinkage_coefficients"] = tuple(d["shrinkage_coefficients"])
        return cls(**d)


@dataclass
class MouldingRun:
    run_id: int
    params: ProcessParams
    injection_pressure: np.ndarray
    cavity_pressure: np.ndarray
    ram_position: np.ndarray
    opening_distance: float
    label: int | None = None

    def series(self, name: str) -> np.ndarray:
        if name not in SERIES_NAMES:
            raise KeyError(name)
        return getattr(self, name)


@dataclass(frozen=True)
class LabelingSummary:
    mu: float
    sigma: float
    k: float
    reject_count: int
    accept_count: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NoiseDraws:
    """Standard-normal draws consumed by :func:`simulate_run`."""

    distance: float
    injection_pressure: np.ndarray
    cavity_pressure: np.ndarray
    ram_position: np.ndarray

    @classmethod
    def draw(cls, rng: np.random.Generator, n_samples: int) -> "NoiseDraws":
        d = rng.standard_normal()
        z = rng.standard_normal((3, n_samples))
        return cls(float(d), z[0], z[1], z[2])

    @classmethod
    def zeros(cls, n_samples: int) -> "NoiseDraws":
        z = np.zeros(n_samples)
        return cls(0.0, z, z, z)


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

def sample_params(dists: ParamDistributions, u: Sequence[float]) -> ProcessParams:
    """Map six quantiles to inputs through per-parameter normal inverse CDFs.

    Each input is normal with mean = median and std = IQR / 1.349.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (len(PARAM_NAMES),):
        raise ValueError(f"need {len(PARAM_NAMES)} quantiles, got shape {u.shape}")
    if not np.all((u > 0) & (u < 1)):
        raise ValueError("quantiles must lie strictly inside (0, 1)")
    values = []
    for name, q in zip(PARAM_NAMES, u):
        spread = getattr(dists, name)
        values.append(float(spread.median + spread.std * ndtri(q)))
    return ProcessParams(*values)


def cross_wlf_viscosity(temp: float, shear_rate: float, params: ProcessParams,
                        consts: CrossWlfConstants) -> float:
    """Cross-WLF melt viscosity in Pa s.

    eta0 = D1 * exp(-A1 (T - T*) / (A2 + T - T*)) with T* = D2, and
    eta = eta0 / (1 + (eta0 * shear_rate / tau*)^(1 - n)).
    """
    dT = temp - consts.d2_ref_temp
    if not dT > 0:
        raise ValueError(f"temperature {temp} K must exceed the reference temperature {consts.d2_ref_temp} K")
    if shear_rate < 0:
        raise ValueError("shear rate must be >= 0")
    eta0 = params.d1_viscosity * math.exp(-consts.a1 * dT / (consts.a2 + dT))
    return eta0 / (1.0 + (eta0 * shear_rate / consts.tau_star) ** (1.0 - params.power_law_n))


def _log_reference_viscosity(params: ProcessParams, cfg: SimConfig) -> float:
    return math.log(cross_wlf_viscosity(params.melt_temp, cfg.reference_shear_rate, params, cfg.cross_wlf))


def log_viscosity_spread(dists: ParamDistributions, cfg: SimConfig) -> tuple[float, float]:
    """Median-point value and first-order standard deviation of the log reference viscosity.

    The spread propagates the standard deviations of melt temperature, power
    law index and D1 through central differences.
    """
    med = dists.medians()
    base = _log_reference_viscosity(med, cfg)
    var = 0.0
    for name in ("melt_temp", "power_law_n", "d1_viscosity"):
        sd = getattr(dists, name).std
        step = 1e-3 * sd
        hi = _log_reference_viscosity(replace(med, **{name: getattr(med, name) + step}), cfg)
        lo = _log_reference_viscosity(replace(med, **{name: getattr(med, name) - step}), cfg)
        var += ((hi - lo) / (2 * step) * sd) ** 2
    return base, math.sqrt(var)


# ---------------------------------------------------------------------------
# one shot
# ---------------------------------------------------------------------------

def fill_time(params: ProcessParams, cfg: SimConfig) -> float:
    if not params.flowrate > 0:
        raise ValueError("flowrate must be positive")
    return cfg.shot_volume / params.flowrate


def shrinkage_deviations(params: ProcessParams, dists: ParamDistributions, cfg: SimConfig) -> np.ndarray:
    """Standardised deviations (melt, packing, cooling, log viscosity) entering the shrinkage."""
    lv_med, lv_sd = log_viscosity_spread(dists, cfg)
    return np.array([
        (params.melt_temp - dists.melt_temp.median) / dists.melt_temp.std,
        (params.packing_pressure - dists.packing_pressure.median) / dists.packing_pressure.std,
        (params.cooling_water_temp - dists.cooling_water_temp.median) / dists.cooling_water_temp.std,
        (_log_reference_viscosity(params, cfg) - lv_med) / lv_sd,
    ])


def opening_distance(params: ProcessParams, cfg: SimConfig, dists: ParamDistributions,
                     distance_draw: float = 0.0) -> float:
    z = shrinkage_deviations(params, dists, cfg)
    eps = distance_draw * cfg.noise_std / cfg.nominal_opening_distance
    shrink = cfg.base_shrink + float(np.dot(cfg.shrinkage_coefficients, z)) + eps
    return cfg.nominal_opening_distance * (1.0 - shrink)


def simulate_run(params: ProcessParams, cfg: SimConfig, run_id: int = 0,
                 noise_draws: NoiseDraws | None = None,
                 dists: ParamDistributions | None = None) -> MouldingRun:
    """Synthesize the three process signals and the opening distance of one shot.

    Deterministic in its arguments; ``noise_draws`` supplies every random
    number (``None`` means a noise-free shot). ``dists`` sets the reference
    point for the shrinkage deviations.
    """
    dists = dists or ParamDistributions()
    n = cfg.n_samples
    noise = noise_draws or NoiseDraws.zeros(n)
    t = cfg.time_grid()
    t_fill = fill_time(params, cfg)
    t_pack_end = t_fill + cfg.pack_duration
    med = dists.medians()
    consts = cfg.cross_wlf

    # fill pressure scales with Cross-WLF viscosity at the fill shear rate times flow
    eta_fill = cross_wlf_viscosity(params.melt_temp, cfg.shear_per_flow * params.flowrate, params, consts)
    eta_med = cross_wlf_viscosity(med.melt_temp, cfg.shear_per_flow * med.flowrate, med, consts)
    p_fill = cfg.nominal_fill_pressure * (eta_fill * params.flowrate) / (eta_med * med.flowrate)

    # decay constants: slower cooling with warmer water, slower freezing with hotter melt
    tau_cool = 1.5 * math.exp((params.cooling_water_temp - med.cooling_water_temp) / 25.0)
    tau_solid = 12.0 * math.exp((params.melt_temp - med.melt_temp) / 20.0) \
        * math.exp((params.cooling_water_temp - med.cooling_water_temp) / 40.0)
    transmission = 0.85 * (eta_med / eta_fill) ** 0.1

    fill = t < t_fill
    pack = (t >= t_fill) & (t < t_pack_end)
    cool = t >= t_pack_end

    inj = np.empty(n)
    frac = np.clip(t / t_fill, 0.0, 1.0)
    inj[fill] = p_fill * frac[fill] ** 0.7
    tp = t[pack] - t_fill
    inj[pack] = params.packing_pressure + (p_fill - params.packing_pressure) * np.exp(-tp / 0.15)
    inj_end = params.packing_pressure + (p_fill - params.packing_pressure) * math.exp(-cfg.pack_duration / 0.15)
    inj[cool] = inj_end * np.exp(-(t[cool] - t_pack_end) / tau_cool)

    cav = np.zeros(n)
    t_arrive = 0.5 * t_fill
    rising = fill & (t >= t_arrive)
    cav_fill_peak = 0.35 * p_fill * transmission
    cav[rising] = cav_fill_peak * (t[rising] - t_arrive) / (t_fill - t_arrive)
    cav_target = transmission * params.packing_pressure
    # approach to the packing level, damped by solidification
    cav[pack] = (cav_target + (cav_fill_peak - cav_target) * np.exp(-tp / 0.4)) * np.exp(-tp / tau_solid)
    cav_end = (cav_target + (cav_fill_peak - cav_target) * math.exp(-cfg.pack_duration / 0.4)) \
        * math.exp(-cfg.pack_duration / tau_solid)
    cav[cool] = cav_end * np.exp(-(t[cool] - t_pack_end) / (0.5 * tau_cool))

    stroke = 10.0 * cfg.shot_volume / cfg.screw_area  # mm
    start = cfg.cushion + stroke
    ram = np.empty(n)
    ram[fill] = start - stroke * frac[fill]
    # packing pushes extra melt in to compensate shrinkage
    compensation = 0.004 * params.packing_pressure
    ram[pack] = cfg.cushion - compensation * (1.0 - np.exp(-tp / 2.0))
    ram_pack_end = cfg.cushion - compensation * (1.0 - math.exp(-cfg.pack_duration / 2.0))
    # screw recovery (plastication) after a short delay
    tc = t[cool] - t_pack_end - 1.0
    recovery = np.clip(tc / 6.0, 0.0, 1.0)
    ram[cool] = ram_pack_end + (start - ram_pack_end) * recovery

    inj = np.round(inj + cfg.pressure_noise * noise.injection_pressure, 2)
    cav = np.round(np.maximum(cav + cfg.pressure_noise * noise.cavity_pressure, 0.0), 2)
    ram = np.round(ram + cfg.position_noise * noise.ram_position, 3)
    # sensor noise must not reverse the fill stroke
    ram[fill] = np.minimum.accumulate(ram[fill])

    return MouldingRun(
        run_id=run_id,
        params=params,
        injection_pressure=inj,
        cavity_pressure=cav,
        ram_position=ram,
        opening_distance=opening_distance(params, cfg, dists, noise.distance),
    )


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def run_rng(seed: int, run_id: int) -> np.random.Generator:
    """Independent generator per run, so batches can be split across workers."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(run_id,)))


def _simulate_one(run_id: int, cfg: SimConfig, dists: ParamDistributions) -> MouldingRun:
    rng = run_rng(cfg.rng_seed, run_id)
    u = rng.random(len(PARAM_NAMES))
    # rng.random is in [0, 1); a zero draw would be an infinite quantile
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    params = sample_params(dists, u)
    noise = NoiseDraws.draw(rng, cfg.n_samples)
    return simulate_run(params, cfg, run_id, noise, dists)


def simulate_batch(n: int, cfg: SimConfig, dists: ParamDistributions | None = None,
                   jobs: int = 1) -> list[MouldingRun]:
    """Simulate runs ``0..n-1``; the result does not depend on ``jobs``."""
    dists = dists or ParamDistributions()
    if jobs > 1:
        from joblib import Parallel, delayed
        return Parallel(n_jobs=jobs)(delayed(_simulate_one)(i, cfg, dists) for i in range(n))
    return [_simulate_one(i, cfg, dists) for i in range(n)]


def label_dataset(distances: Sequence[float], k: float = 2.0) -> tuple[np.ndarray, LabelingSummary]:
    """Reject (1) iff ``|d - mean| > k * std`` over the whole list, else accept (0).

    ``std`` is the population standard deviation of the list.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 1 or len(d) < 2:
        raise ValueError("labelling needs at least two distances")
    if not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite")
    mu = float(np.mean(d))
    sigma = float(np.std(d))
    labels = (np.abs(d - mu) > k * sigma).astype(np.int64)
    rejects = int(labels.sum())
    return labels, LabelingSummary(mu=mu, sigma=sigma, k=float(k),
                                   reject_count=rejects, accept_count=len(d) - rejects)


def simulate_dataset(n: int, cfg: SimConfig, dists: ParamDistributions | None = None,
                     k: float = 2.0, jobs: int = 1) -> tuple[list[MouldingRun], LabelingSummary]:
    runs = simulate_batch(n, cfg, dists, jobs)
    labels, summary = label_dataset([r.opening_distance for r in runs], k)
    for run, lab in zip(runs, labels):
        run.label = int(lab)
    return runs, summary
