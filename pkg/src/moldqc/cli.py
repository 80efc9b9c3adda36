"""Command-line front end: ``moldqc <command> [--config PATH] [--seed N] [--jobs N] [--out DIR]``.

Commands hand off through files in ``--out``:

    simulate  -> runs.csv, timeseries.csv, labeling.json
    extract   -> features.csv, catalog.json
    select    -> selection_<target>.json
    split     -> split.json
    train     -> bundle_<approach>.json, trials_<approach>.csv
    evaluate  -> report_<approach>_<part>.json / .txt
    predict   -> predictions_<approach>.csv
    report    -> report.json / report.txt (all evaluated approaches)
    reproduce -> every step above for the three approaches

Exit codes: 0 success, 2 I/O or argument error, 3 schema error, 4 compatibility error.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import artifacts as art
from .artifacts import ArtifactError, CompatibilityError, SchemaError, provenance
from .metrics import EvalReport, confusion, format_table
from .pipeline import (ModelBundle, SearchSpace, stage_seed, train_approach_A, train_approach_B,
                       train_naive, trial_log_csv)
from .selectsplit import SelectionConfig, SplitConfig, select_top_k, stratified_split
from .simcore import LabelingSummary, ParamDistributions, SimConfig, simulate_dataset
from .tsfeat import FeatureCatalog, default_catalog, extract_matrix

APPROACH_NAMES = {"classify": "classify", "regress-threshold": "regress_threshold", "naive": "naive"}
APPROACH_TARGET = {"classify": "quality_class", "regress_threshold": "opening_distance"}


@dataclass
class RunConfig:
    seed: int = 0
    n_runs: int = 3147
    sim: SimConfig = field(default_factory=SimConfig)
    distributions: ParamDistributions = field(default_factory=ParamDistributions)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    fractions: tuple = (0.8, 0.1, 0.1)
    search: SearchSpace = field(default_factory=SearchSpace)
    cv_folds: int = 5
    label_k: float = 2.0
    out: str = "."
    paths: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"seed", "n_runs", "sim", "distributions", "selection", "split", "search",
                 "cv_folds", "label_k", "out", "paths"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        if "seed" in d:
            cfg.seed = int(d["seed"])
        if "n_runs" in d:
            cfg.n_runs = int(d["n_runs"])
        if "sim" in d:
            cfg.sim = SimConfig.from_dict(d["sim"])
        if "distributions" in d:
            cfg.distributions = ParamDistributions.from_dict(d["distributions"])
        if "selection" in d:
            cfg.selection = SelectionConfig(**d["selection"])
        if "split" in d:
            cfg.fractions = tuple(d["split"].get("fractions", cfg.fractions))
        if "search" in d:
            cfg.search = SearchSpace.from_dict(d["search"])
        for key in ("cv_folds", "label_k", "out"):
            if key in d:
                setattr(cfg, key, type(getattr(cfg, key))(d[key]))
        if "paths" in d:
            cfg.paths = dict(d["paths"])
        return cfg

    def path(self, name: str) -> str:
        return os.path.join(self.out, self.paths.get(name, name))

    # stage configs carry seeds derived from the global seed
    def sim_config(self) -> SimConfig:
        return dataclasses.replace(self.sim, rng_seed=stage_seed(self.seed, "simulate"))

    def split_config(self) -> SplitConfig:
        return SplitConfig(self.fractions, stage_seed(self.seed, "split"))

    def search_space(self) -> SearchSpace:
        return dataclasses.replace(self.search, seed=stage_seed(self.seed, "search"))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, args) -> None:
    n = args.n if args.n is not None else cfg.n_runs
    if n < 2:
        raise ValueError("--n must be at least 2: labelling needs two or more runs")
    sim = cfg.sim_config()
    runs, summary = simulate_dataset(n, sim, cfg.distributions, cfg.label_k, args.jobs)
    prov = provenance("simulate", cfg.seed)
    art.write_runs_csv(cfg.path("runs.csv"), runs, prov)
    art.write_timeseries_csv(cfg.path("timeseries.csv"), runs, sim.time_grid(), prov)
    art.write_json(cfg.path("labeling.json"),
                   {"labeling": summary.to_dict(), "n_runs": n, "sim": sim.to_dict(),
                    "distributions": cfg.distributions.to_dict()}, prov)
    print(f"simulated {n} runs: {summary.reject_count} rejects, {summary.accept_count} accepts")


def _load_runs(cfg: RunConfig) -> art.RunsTable:
    return art.read_runs_csv(cfg.path("runs.csv"))


def cmd_extract(cfg: RunConfig, args) -> None:
    table = _load_runs(cfg)
    runs = art.read_timeseries_csv(cfg.path("timeseries.csv"), table)
    catalog = default_catalog()
    fm = extract_matrix(runs, catalog, args.jobs)
    prov = provenance("extract", cfg.seed)
    art.write_features_csv(cfg.path("features.csv"), fm, prov)
    art.write_json(cfg.path("catalog.json"), {"series": list(_series_names()), "extractors": catalog.manifest(),
                                              "columns_per_series": len(catalog)}, prov)
    print(f"extracted {fm.values.shape[1]} features for {fm.values.shape[0]} runs")


def _series_names():
    from .simcore import SERIES_NAMES
    return SERIES_NAMES


def _load_features(cfg: RunConfig):
    fm, _ = art.read_features_csv(cfg.path("features.csv"))
    return fm


def _aligned(fm, table: art.RunsTable, ids: Sequence[int] | None = None):
    """Feature rows and runs-table positions for ``ids`` (default: all feature rows)."""
    ids = list(fm.run_ids) if ids is None else list(ids)
    pos = table.index()
    missing = [r for r in ids if r not in pos]
    if missing:
        raise CompatibilityError(f"run_id {missing[0]} is missing from the runs summary")
    fpos = {r: i for i, r in enumerate(fm.run_ids)}
    missing = [r for r in ids if r not in fpos]
    if missing:
        raise CompatibilityError(f"run_id {missing[0]} is missing from the feature matrix")
    return [fpos[r] for r in ids], [pos[r] for r in ids]


def _load_split(cfg: RunConfig) -> dict:
    doc = art.read_json(cfg.path("split.json"), ["train_ids", "test_ids", "holdout_ids"])
    for key in ("train_ids", "test_ids", "holdout_ids"):
        if not isinstance(doc[key], list) or not all(isinstance(v, int) for v in doc[key]):
            raise SchemaError(cfg.path("split.json"), "must be a list of integers", column=key)
    return doc


def cmd_select(cfg: RunConfig, args) -> None:
    sel_cfg = SelectionConfig(k=args.k if args.k is not None else cfg.selection.k,
                              target=args.target or cfg.selection.target,
                              leakage_mode=args.leakage_mode or cfg.selection.leakage_mode)
    table = _load_runs(cfg)
    fm = _load_features(cfg)
    if sel_cfg.leakage_mode == "train_only":
        ids = _load_split(cfg)["train_ids"]
    else:
        ids = None
    frows, trows = _aligned(fm, table, ids)
    target = table.distances[trows] if sel_cfg.target == "opening_distance" else table.labels[trows]
    sub = fm.rows([fm.run_ids[i] for i in frows])
    selection = select_top_k(sub, target, sel_cfg, args.jobs)
    art.write_json(cfg.path(f"selection_{sel_cfg.target}.json"),
                   {"target": sel_cfg.target, "k": sel_cfg.k, "leakage_mode": sel_cfg.leakage_mode,
                    "features": selection.report()}, provenance("select", cfg.seed))
    print(f"selected {len(selection.names)} features for {sel_cfg.target}")


def cmd_split(cfg: RunConfig, args) -> None:
    table = _load_runs(cfg)
    split = stratified_split(table.labels, cfg.split_config())
    manifest = split.manifest(table.run_ids)
    art.write_json(cfg.path("split.json"), manifest, provenance("split", cfg.seed))
    print(f"split {len(table.run_ids)} runs: train {len(split.train)}, test {len(split.test)}, "
          f"holdout {len(split.holdout)}")


def _load_selection(path) -> dict:
    doc = art.read_json(path, ["target", "features"])
    names = []
    for i, entry in enumerate(doc["features"]):
        if not isinstance(entry, dict) or "feature_name" not in entry:
            raise SchemaError(path, f"entry {i} lacks feature_name", column="features")
        names.append(entry["feature_name"])
    doc["names"] = names
    return doc


def _feature_block(fm, names: Sequence[str], rows: Sequence[int]) -> np.ndarray:
    index = {n: i for i, n in enumerate(fm.column_names)}
    for n in names:
        if n not in index:
            raise CompatibilityError(f"feature {n!r} is not in the feature matrix")
    return fm.values[np.ix_(list(rows), [index[n] for n in names])]


def cmd_train(cfg: RunConfig, args) -> None:
    approach = APPROACH_NAMES[args.approach]
    table = _load_runs(cfg)
    fm = _load_features(cfg)
    split = _load_split(cfg)
    labeling = _load_labeling(cfg)
    frows, trows = _aligned(fm, table, split["train_ids"])
    space = cfg.search_space()
    if args.n_draws is not None:
        space = dataclasses.replace(space, n_draws=args.n_draws)
    prov = provenance("train", cfg.seed)

    if approach == "naive":
        sel_path = args.selection
        names = _load_selection(sel_path)["names"] if sel_path else []
        bundle = train_naive(table.labels[trows], names, labeling)
        trials = None
    else:
        target = APPROACH_TARGET[approach]
        sel_path = args.selection or cfg.path(f"selection_{target}.json")
        sel = _load_selection(sel_path)
        if sel["target"] != target:
            raise CompatibilityError(f"{args.approach} needs features selected for {target}, "
                                     f"{sel_path} was selected for {sel['target']}")
        X = _feature_block(fm, sel["names"], frows)
        if approach == "classify":
            res = train_approach_A(X, table.labels[trows], sel["names"], space, labeling, args.jobs,
                                   cfg.cv_folds)
        else:
            res = train_approach_B(X, table.distances[trows], sel["names"], space, labeling, args.jobs,
                                   cfg.cv_folds, cfg.label_k)
        bundle = res.bundle
        trials = res.trials
    art.write_json(cfg.path(f"bundle_{approach}.json"), bundle.to_dict(), prov)
    if trials is not None:
        path = cfg.path(f"trials_{approach}.csv")
        with art._open_write(path) as fh:
            art._write_prov(fh, prov)
            fh.write(trial_log_csv(trials))
    msg = f"trained {approach} bundle"
    if bundle.cv_score is not None:
        msg += f" (cv score {bundle.cv_score:.6g})"
    print(msg)


def _load_labeling(cfg: RunConfig) -> LabelingSummary | None:
    path = cfg.path("labeling.json")
    if not os.path.exists(path):
        return None
    doc = art.read_json(path, ["labeling"])
    try:
        return LabelingSummary(**doc["labeling"])
    except TypeError:
        raise SchemaError(path, "malformed labeling summary", column="labeling") from None


def _load_bundle(path) -> ModelBundle:
    doc = art.read_json(path, ["format_version", "approach"])
    doc.pop("provenance", None)
    try:
        return ModelBundle.from_dict(doc)
    except ValueError as exc:
        raise CompatibilityError(f"{path}: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise SchemaError(path, f"malformed bundle ({exc})") from None


def _bundle_path(cfg: RunConfig, args) -> str:
    if args.bundle:
        return args.bundle
    if not args.approach:
        raise ValueError("pass --bundle or --approach")
    return cfg.path(f"bundle_{APPROACH_NAMES[args.approach]}.json")


def _check_features(bundle: ModelBundle, fm) -> None:
    present = set(fm.column_names)
    for name in bundle.selected_features:
        if name not in present:
            raise CompatibilityError(f"feature matrix lacks bundle feature {name!r}")


def cmd_evaluate(cfg: RunConfig, args) -> None:
    bundle = _load_bundle(_bundle_path(cfg, args))
    table = _load_runs(cfg)
    fm = _load_features(cfg)
    split = _load_split(cfg)
    _check_features(bundle, fm)
    ids = split[f"{args.part}_ids"]
    frows, trows = _aligned(fm, table, ids)
    X = _feature_block(fm, bundle.selected_features, frows)
    pred = bundle.predict_labels(X)
    report = EvalReport(bundle.approach, args.part, cfg.seed, confusion(table.labels[trows], pred))
    stem = f"report_{bundle.approach}_{args.part}"
    prov = provenance("evaluate", cfg.seed)
    art.write_json(cfg.path(stem + ".json"), report.to_dict(), prov)
    table_txt = format_table([report])
    art.write_text(cfg.path(stem + ".txt"), table_txt, prov)
    print(table_txt)


def cmd_predict(cfg: RunConfig, args) -> None:
    bundle = _load_bundle(_bundle_path(cfg, args))
    fm, _ = art.read_features_csv(args.features or cfg.path("features.csv"))
    _check_features(bundle, fm)
    X = _feature_block(fm, bundle.selected_features, range(len(fm.run_ids)))
    labels = bundle.predict_labels(X)
    raw = bundle.predict_raw(X)
    rows = [[rid, int(lab), "" if raw is None else repr(float(raw[i]))]
            for i, (rid, lab) in enumerate(zip(fm.run_ids, labels))]
    path = args.predictions or cfg.path(f"predictions_{bundle.approach}.csv")
    art.write_rows_csv(path, art.PREDICTIONS_HEADER, rows, provenance("predict", cfg.seed))
    print(f"wrote {len(rows)} predictions to {path}")


_REPORT_ORDER = {"classify": 0, "regress_threshold": 1, "naive": 2}


def cmd_report(cfg: RunConfig, args) -> None:
    paths = sorted(glob.glob(cfg.path(f"report_*_{args.part}.json")))
    if not paths:
        raise ArtifactError(f"no report_*_{args.part}.json files in {cfg.out}")
    reports = []
    for p in paths:
        doc = art.read_json(p, ["approach", "dataset", "seed", "confusion"])
        try:
            reports.append(EvalReport.from_dict(doc))
        except (TypeError, ValueError) as exc:
            raise SchemaError(p, f"malformed report ({exc})") from None
    reports.sort(key=lambda r: _REPORT_ORDER.get(r.approach, 9))
    prov = provenance("report", cfg.seed)
    art.write_json(cfg.path("report.json"), {"reports": [r.to_dict() for r in reports]}, prov)
    txt = format_table(reports)
    art.write_text(cfg.path("report.txt"), txt, prov)
    print(txt)


def cmd_reproduce(cfg: RunConfig, args) -> None:
    ns = argparse.Namespace(**vars(args))
    ns.n = args.n
    cmd_simulate(cfg, ns)
    cmd_extract(cfg, ns)
    cmd_split(cfg, ns)
    for target in ("opening_distance", "quality_class"):
        cmd_select(cfg, argparse.Namespace(**{**vars(ns), "target": target}))
    for approach in ("regress-threshold", "classify", "naive"):
        a = argparse.Namespace(**{**vars(ns), "approach": approach, "selection": None, "bundle": None})
        cmd_train(cfg, a)
        cmd_evaluate(cfg, a)
    cmd_report(cfg, ns)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--seed", type=int, help="global seed; every stage seed derives from it")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--out", help="artifact directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    g = _global_flags()
    parser = argparse.ArgumentParser(prog="moldqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[g], help="simulate and label moulding runs")
    p.add_argument("--n", type=int, help="number of runs (default from config: 3147)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", parents=[g], help="extract time-series features")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("select", parents=[g], help="keep the top-k correlated features")
    p.add_argument("--target", choices=["opening_distance", "quality_class"])
    p.add_argument("--k", type=int)
    p.add_argument("--leakage-mode", choices=["whole_dataset", "train_only"])
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("split", parents=[g], help="stratified train/test/holdout split")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[g], help="train an approach on the training part")
    p.add_argument("--approach", required=True, choices=list(APPROACH_NAMES))
    p.add_argument("--selection", help="selection JSON (default: the one matching the approach)")
    p.add_argument("--n-draws", type=int, help="random-search draws")
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (("evaluate", cmd_evaluate, "score a bundle on a split part"),
                              ("predict", cmd_predict, "per-run verdicts from a bundle")):
        p = sub.add_parser(name, parents=[g], help=help_)
        p.add_argument("--bundle", help="bundle JSON")
        p.add_argument("--approach", choices=list(APPROACH_NAMES), help="use bundle_<approach>.json in --out")
        if name == "evaluate":
            p.add_argument("--part", choices=["test", "holdout"], default="test")
        else:
            p.add_argument("--features", help="feature CSV (default: features.csv in --out)")
            p.add_argument("--predictions", help="output CSV path")
        p.set_defaults(func=func)

    p = sub.add_parser("report", parents=[g], help="table of all evaluated approaches")
    p.add_argument("--part", choices=["test", "holdout"], default="test")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reproduce", parents=[g], help="run every stage end to end")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--leakage-mode", choices=["whole_dataset", "train_only"])
    p.add_argument("--n-draws", type=int)
    p.add_argument("--part", choices=["test", "holdout"], default="test")
    p.set_defaults(func=cmd_reproduce)
    return parser


def load_config(args) -> RunConfig:
    if args.config:
        doc = art.read_json(args.config)
        doc.pop("provenance", None)
        try:
            cfg = RunConfig.from_dict(doc)
        except (TypeError, ValueError) as exc:
            raise SchemaError(args.config, str(exc)) from None
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.jobs < 1:
        print("moldqc: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args)
        args.func(cfg, args)
    except ArtifactError as exc:
        print(f"moldqc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"moldqc: error: {exc}", file=sys.stderr)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
