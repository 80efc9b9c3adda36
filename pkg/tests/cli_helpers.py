"""Small end-to-end CLI pipeline used by the CLI and acceptance tests."""

import json
import os

from moldqc.cli import main

SMALL_SEARCH = {
    "lists": {"n_estimators": [30, 60], "alpha": [0.0], "lambda": [0.0, 1.0], "subsample": [1.0],
              "min_child_weight": [1e-3], "min_child_samples": [5], "num_leaves": [7, 15]},
    "n_draws": 3,
}
N_RUNS = 300


def write_config(tmp, name="config.json"):
    path = os.path.join(tmp, name)
    with open(path, "w") as fh:
        json.dump({"n_runs": N_RUNS, "search": SMALL_SEARCH}, fh)
    return path


def run_pipeline(out, config, seed=3, jobs=1):
    common = ["--config", config, "--seed", str(seed), "--out", out, "--jobs", str(jobs)]
    steps = [["simulate"], ["extract"], ["split"],
             ["select", "--target", "opening_distance"], ["select", "--target", "quality_class"]]
    for approach in ("regress-threshold", "classify", "naive"):
        steps += [["train", "--approach", approach], ["evaluate", "--approach", approach],
                  ["predict", "--approach", approach]]
    steps.append(["report"])
    for step in steps:
        code = main(step + common)
        assert code == 0, step
