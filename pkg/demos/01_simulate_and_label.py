"""Simulate a batch of shots, look at one of them and label the batch.

Run with ``python3 demos/01_simulate_and_label.py``.
"""

import numpy as np

from moldqc.simcore import ParamDistributions, SimConfig, fill_time, simulate_dataset

cfg = SimConfig(rng_seed=1)
dists = ParamDistributions()
runs, summary = simulate_dataset(500, cfg, dists)

# one shot: fill, packing and cooling show up in every signal
run = runs[0]
t = cfg.time_grid()
t_fill = fill_time(run.params, cfg)
print(f"run 0: flowrate {run.params.flowrate:.2f} cm3/s, fill ends at {t_fill:.2f} s")
for name in ("injection_pressure", "cavity_pressure", "ram_position"):
    s = run.series(name)
    print(f"  {name:<20} peak {s.max():8.2f} at t = {t[np.argmax(s)]:5.2f} s, final {s[-1]:8.2f}")
print(f"  opening distance {run.opening_distance:.4f} mm")

# labels come from the whole batch: reject when more than 2 sigma from the mean
print(f"\nmu = {summary.mu:.4f} mm, sigma = {summary.sigma:.4f} mm")
print(f"{summary.reject_count} rejects out of {summary.reject_count + summary.accept_count} "
      f"({100 * summary.reject_count / len(runs):.1f}%; a normal tail beyond 2 sigma holds 4.6%)")

# packing pressure is the strongest lever against shrinkage
by_pack = sorted(runs, key=lambda r: r.params.packing_pressure)
low = np.mean([r.opening_distance for r in by_pack[:100]])
high = np.mean([r.opening_distance for r in by_pack[-100:]])
print(f"mean opening distance, lowest vs highest packing pressure: {low:.3f} vs {high:.3f} mm")
