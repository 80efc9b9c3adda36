import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from moldqc.simcore import (
    PARAM_NAMES, SERIES_NAMES, CrossWlfConstants, ParamDistributions, ProcessParams,
    SimConfig, Spread, cross_wlf_viscosity, fill_time, label_dataset, sample_params,
    simulate_batch, simulate_dataset, simulate_run,
)

DISTS = ParamDistributions()
CFG = SimConfig()


def _inv_norm(u):
    # independent high-precision inverse normal CDF
    with mpmath.workdps(50):
        return mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(u) - 1)


def test_medians_at_half():
    p = sample_params(DISTS, [0.5] * 6)
    assert p.as_tuple() == (313.4, 503.2, 40.0, 400.1, 0.23, 5.8e13)


def test_upper_quartile_cooling_water():
    u = [0.5] * 6
    u[0] = 0.75
    p = sample_params(DISTS, u)
    expected = 313.4 + float(_inv_norm("0.75")) * (6.4 / 1.349)
    assert p.cooling_water_temp == pytest.approx(expected, abs=1e-9)
    assert abs(p.cooling_water_temp - 316.5) <= 0.15


def test_lower_quartile_packing_pressure():
    u = [0.5] * 6
    u[3] = 0.25
    p = sample_params(DISTS, u)
    expected = 400.1 + float(_inv_norm("0.25")) * (36.1 / 1.349)
    assert p.packing_pressure == pytest.approx(expected, abs=1e-9)
    assert p.packing_pressure == pytest.approx(382.05, abs=0.01)
    assert abs(p.packing_pressure - 381.8) <= 0.5


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_quantile_domain(bad):
    u = [0.5] * 6
    u[2] = bad
    with pytest.raises(ValueError):
        sample_params(DISTS, u)


def test_param_validation():
    with pytest.raises(ValueError):
        ProcessParams(313.4, 503.2, 40.0, 400.1, 1.2, 5.8e13)
    with pytest.raises(ValueError):
        ProcessParams(313.4, 503.2, -1.0, 400.1, 0.23, 5.8e13)
    with pytest.raises(ValueError):
        Spread(1.0, 2.0, 3.0)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(sample_rate=1.0, cycle_duration=35.0)
    with pytest.raises(ValueError):
        SimConfig(noise_std=-1.0)
    assert CFG.n_samples == 1750


def _cross_wlf_oracle(T, shear, n, d1, c):
    with mpmath.workdps(50):
        T, shear, n, d1 = map(mpmath.mpf, (T, shear, n, d1))
        dT = T - mpmath.mpf(c.d2_ref_temp)
        eta0 = d1 * mpmath.exp(-mpmath.mpf(c.a1) * dT / (mpmath.mpf(c.a2) + dT))
        return eta0 / (1 + (eta0 * shear / mpmath.mpf(c.tau_star)) ** (1 - n))


def test_cross_wlf_against_high_precision():
    med = DISTS.medians()
    c = CrossWlfConstants()
    got = cross_wlf_viscosity(503.2, 100.0, med, c)
    ref = _cross_wlf_oracle(503.2, 100.0, med.power_law_n, med.d1_viscosity, c)
    assert abs(got - float(ref)) / float(ref) <= 1e-12


def test_cross_wlf_limits():
    med = DISTS.medians()
    c = CrossWlfConstants()
    eta0 = cross_wlf_viscosity(503.2, 0.0, med, c)
    dT = 503.2 - c.d2_ref_temp
    assert eta0 == med.d1_viscosity * math.exp(-c.a1 * dT / (c.a2 + dT))


def test_cross_wlf_newtonian_is_shear_independent():
    # with n = 1 the shear term is (.)^0 = 1, so eta = eta0 / 2 at every shear rate
    med = replace(DISTS.medians(), power_law_n=1.0)
    c = CrossWlfConstants()
    eta0 = cross_wlf_viscosity(503.2, 0.0, DISTS.medians(), c)
    vals = {cross_wlf_viscosity(503.2, s, med, c) for s in (0.0, 1.0, 100.0, 1e5)}
    assert vals == {eta0 / 2}


def test_cross_wlf_domain():
    med = DISTS.medians()
    with pytest.raises(ValueError):
        cross_wlf_viscosity(263.15, 10.0, med, CrossWlfConstants())
    with pytest.raises(ValueError):
        cross_wlf_viscosity(500.0, -1.0, med, CrossWlfConstants())


def test_noise_free_median_distance():
    run = simulate_run(DISTS.medians(), CFG)
    assert run.opening_distance == pytest.approx(
        CFG.nominal_opening_distance * (1 - CFG.base_shrink), abs=1e-12)


def test_fill_time():
    med = DISTS.medians()
    assert fill_time(med, CFG) == 120.0 / 40.0 == 3.0
    run = simulate_run(med, CFG)
    t = CFG.time_grid()
    fill = t < 3.0
    # ram moves only during fill, then sits at the cushion
    assert np.all(np.diff(run.ram_position[fill]) < 0)
    assert run.ram_position[np.searchsorted(t, 3.0)] == CFG.cushion


def test_packing_pressure_raises_distance():
    med = DISTS.medians()
    hi = replace(med, packing_pressure=med.packing_pressure + DISTS.packing_pressure.std)
    assert simulate_run(hi, CFG).opening_distance > simulate_run(med, CFG).opening_distance


@given(st.floats(300.0, 500.0), st.floats(1.0, 30.0))
def test_monotone_sensitivities(pack, dmelt):
    base = replace(DISTS.medians(), packing_pressure=pack)
    more_pack = replace(base, packing_pressure=pack + 5.0)
    hotter = replace(base, melt_temp=base.melt_temp + dmelt)
    d0 = simulate_run(base, CFG).opening_distance
    assert simulate_run(more_pack, CFG).opening_distance > d0
    assert simulate_run(hotter, CFG).opening_distance < d0


def test_run_invariants():
    runs = simulate_batch(40, CFG)
    for r in runs:
        lengths = {len(r.series(n)) for n in SERIES_NAMES}
        assert lengths == {CFG.n_samples}
        t_fill = fill_time(r.params, CFG)
        fill = CFG.time_grid() < t_fill
        assert np.all(np.diff(r.ram_position[fill]) <= 0)
        assert math.isfinite(r.opening_distance) and r.opening_distance > 0
        # cavity peaks after the fill phase ends
        assert np.argmax(r.cavity_pressure) >= np.argmax(fill == False)  # noqa: E712


def test_cooling_decay_slower_with_warmer_water():
    med = DISTS.medians()
    warm = replace(med, cooling_water_temp=med.cooling_water_temp + 5)
    t = CFG.time_grid()
    i = np.searchsorted(t, 3.0 + CFG.pack_duration + 3.0)
    a = simulate_run(med, CFG).injection_pressure
    b = simulate_run(warm, CFG).injection_pressure
    j = np.searchsorted(t, 3.0 + CFG.pack_duration)
    assert b[i] / b[j] > a[i] / a[j]


def test_deterministic_and_parallel_independent():
    cfg = SimConfig(rng_seed=7)
    a = simulate_batch(12, cfg, jobs=1)
    b = simulate_batch(12, cfg, jobs=1)
    c = simulate_batch(12, cfg, jobs=3)
    for x, y, z in zip(a, b, c):
        assert x.params == y.params == z.params
        assert x.opening_distance == y.opening_distance == z.opening_distance
        for n in SERIES_NAMES:
            assert np.array_equal(x.series(n), y.series(n))
            assert np.array_equal(x.series(n), z.series(n))
    other = simulate_batch(2, SimConfig(rng_seed=8))
    assert other[0].params != a[0].params


def test_label_all_equal():
    labels, s = label_dataset([5.0] * 10)
    assert s.sigma == 0.0
    assert labels.sum() == 0 and s.accept_count == 10


def test_label_boundary_is_accepted():
    # mean 0, population std 1, so 2.0 sits exactly on mu + 2 sigma
    d = [2.0, -2.0, 0, 0, 0, 0, 0, 0]
    labels, s = label_dataset(d)
    assert (s.mu, s.sigma) == (0.0, 1.0)
    assert labels.sum() == 0
    labels, _ = label_dataset(d, k=1.999999)
    assert labels[0] == 1 and labels[1] == 1


def test_label_errors():
    with pytest.raises(ValueError):
        label_dataset([1.0])
    with pytest.raises(ValueError):
        label_dataset([1.0, float("inf")])


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60), st.floats(0.5, 3.0))
def test_label_symmetry(d, k):
    d = np.array(d)
    labels, s = label_dataset(d, k)
    mirrored, s2 = label_dataset(2 * s.mu - d, k)
    assert s.reject_count + s.accept_count == len(d)
    assert s.sigma >= 0
    # mirroring about the mean can move the mean by rounding; compare away from the boundary
    dev = np.abs(d - s.mu)
    safe = np.abs(dev - k * s.sigma) > 1e-9 * (1 + np.abs(d).max())
    assert np.array_equal(labels[safe], mirrored[safe])


def test_gaussian_reject_fraction():
    # oracle: Monte Carlo tail mass beyond 2 sigma over 2e6 standard normals
    z = np.random.default_rng(99).standard_normal(2_000_000)
    tail = np.mean(np.abs(z) > 2.0)
    assert tail == pytest.approx(0.0455, abs=0.001)
    d = np.random.default_rng(3).normal(98.5, 0.75, 3147)
    labels, _ = label_dataset(d)
    assert abs(labels.mean() - tail) <= 0.01


def test_simulate_dataset_labels():
    runs, s = simulate_dataset(200, SimConfig(rng_seed=1))
    labels, s2 = label_dataset([r.opening_distance for r in runs])
    assert [r.label for r in runs] == labels.tolist()
    assert s == s2


def test_config_round_trips():
    assert SimConfig.from_dict(CFG.to_dict()) == CFG
    assert ParamDistributions.from_dict(DISTS.to_dict()) == DISTS
    with pytest.raises(ValueError):
        ParamDistributions.from_dict({"bogus": {}})
    assert len(PARAM_NAMES) == 6
