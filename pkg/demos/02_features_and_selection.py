"""From raw signals to a ranked feature list and a stratified split.

Run with ``python3 demos/02_features_and_selection.py`` (about half a minute).
"""

import numpy as np

from moldqc.selectsplit import SelectionConfig, SplitConfig, select_top_k, stratified_split
from moldqc.simcore import SimConfig, simulate_dataset
from moldqc.tsfeat import default_catalog, extract_matrix

runs, summary = simulate_dataset(600, SimConfig(rng_seed=2))
catalog = default_catalog()
fm = extract_matrix(runs, catalog)
print(f"{len(catalog)} extractors per series -> {fm.values.shape[1]} columns for {fm.values.shape[0]} runs")
print(f"columns with at least one NaN: {int(np.isnan(fm.values).any(axis=0).sum())}")

distances = np.array([r.opening_distance for r in runs])
labels = np.array([r.label for r in runs])
for target, y in (("opening_distance", distances), ("quality_class", labels)):
    sel = select_top_k(fm, y, SelectionConfig(k=300, target=target))
    print(f"\ntop features for {target}:")
    for entry in sel.report()[:5]:
        print(f"  {entry['rank']:>2}. {entry['feature_name']:<60} r = {entry['correlation']:+.3f}")

split = stratified_split(labels, SplitConfig(seed=0))
for name in ("train", "test", "holdout"):
    idx = split.part(name)
    print(f"{name:<8} {len(idx):>4} runs, {int(labels[idx].sum()):>3} rejects")
