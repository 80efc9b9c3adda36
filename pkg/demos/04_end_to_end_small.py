"""The command-line pipeline on a reduced dataset, written to ./demo_out.

Run with ``python3 demos/04_end_to_end_small.py`` (a few minutes). The full
experiment is ``moldqc reproduce --out results``.
"""

import json
import os

from moldqc.cli import main

OUT = "demo_out"
os.makedirs(OUT, exist_ok=True)
config = os.path.join(OUT, "config.json")
with open(config, "w") as fh:
    json.dump({"n_runs": 800,
               "search": {"n_draws": 6,
                          "lists": {"n_estimators": [100, 200], "num_leaves": [15, 31],
                                    "min_child_samples": [5, 20], "subsample": [0.8, 1.0]}}}, fh)

common = ["--config", config, "--seed", "5", "--out", OUT]
for step in (["simulate"], ["extract"], ["split"], ["select", "--target", "opening_distance"],
             ["select", "--target", "quality_class"]):
    assert main(step + common) == 0
for approach in ("regress-threshold", "classify", "naive"):
    assert main(["train", "--approach", approach] + common) == 0
    assert main(["evaluate", "--approach", approach] + common) == 0
print()
assert main(["report"] + common) == 0
