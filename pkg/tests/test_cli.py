import csv
import filecmp
import json
import os

import numpy as np
import pytest

from cli_helpers import N_RUNS, run_pipeline, write_config

from moldqc import artifacts as art
from moldqc.cli import main


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    tmp = str(tmp_path_factory.mktemp("cli"))
    config = write_config(tmp)
    out = os.path.join(tmp, "a")
    run_pipeline(out, config)
    return tmp, config, out


def _files(d):
    return sorted(os.listdir(d))


def _read_csv_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_artifacts_present_with_provenance(pipeline):
    _, _, out = pipeline
    expected = {"runs.csv", "timeseries.csv", "labeling.json", "features.csv", "catalog.json",
                "split.json", "selection_opening_distance.json", "selection_quality_class.json",
                "bundle_classify.json", "bundle_regress_threshold.json", "bundle_naive.json",
                "trials_classify.csv", "trials_regress_threshold.csv", "report.json", "report.txt"}
    assert expected <= set(_files(out))
    for name in _files(out):
        path = os.path.join(out, name)
        if name.endswith(".json"):
            prov = json.load(open(path))["provenance"]
        else:
            first = open(path).readline()
            assert first.startswith("# provenance: "), name
            prov = json.loads(first[len("# provenance: "):])
        assert prov["seed"] == 3 and prov["format_version"] == 1 and prov["command"]


def test_stage_outputs(pipeline):
    _, _, out = pipeline
    table = art.read_runs_csv(os.path.join(out, "runs.csv"))
    assert len(table.run_ids) == N_RUNS
    fm, _ = art.read_features_csv(os.path.join(out, "features.csv"))
    catalog = json.load(open(os.path.join(out, "catalog.json")))
    assert fm.values.shape == (N_RUNS, 3 * catalog["columns_per_series"])
    sel = json.load(open(os.path.join(out, "selection_opening_distance.json")))
    assert len(sel["features"]) == 300
    split = json.load(open(os.path.join(out, "split.json")))
    parts = split["train_ids"] + split["test_ids"] + split["holdout_ids"]
    assert sorted(parts) == list(range(N_RUNS))


def test_regress_threshold_uses_training_rows(pipeline):
    _, _, out = pipeline
    table = art.read_runs_csv(os.path.join(out, "runs.csv"))
    split = json.load(open(os.path.join(out, "split.json")))
    b = json.load(open(os.path.join(out, "bundle_regress_threshold.json")))
    d = table.distances[[table.index()[r] for r in split["train_ids"]]]
    assert b["threshold"]["x_bar"] == float(np.mean(d))
    assert b["threshold"]["s"] == float(np.std(d, ddof=1))


def test_naive_accuracy_equals_majority_fraction(pipeline):
    _, _, out = pipeline
    rep = json.load(open(os.path.join(out, "report_naive_test.json")))
    c = rep["confusion"]
    n = sum(c.values())
    assert c["tp"] == 0 and c["fp"] == 0
    assert rep["accuracy"] == c["tn"] / n
    if c["fn"] > 0:
        assert rep["sensitivity"] == 0.0


def test_predict_agrees_with_evaluate(pipeline):
    _, _, out = pipeline
    split = json.load(open(os.path.join(out, "split.json")))
    table = art.read_runs_csv(os.path.join(out, "runs.csv"))
    truth = dict(zip(table.run_ids, table.labels.tolist()))
    for approach in ("classify", "regress_threshold", "naive"):
        rows = {int(r["run_id"]): int(r["predicted_label"])
                for r in _read_csv_rows(os.path.join(out, f"predictions_{approach}.csv"))}
        counts = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
        for rid in split["test_ids"]:
            t, p = truth[rid], rows[rid]
            counts[("t" if t == p else "f") + ("p" if p else "n")] += 1
        rep = json.load(open(os.path.join(out, f"report_{approach}_test.json")))
        assert rep["confusion"] == counts


def test_byte_identical_rerun(pipeline):
    tmp, config, out = pipeline
    again = os.path.join(tmp, "b")
    run_pipeline(again, config)
    assert _files(again) == _files(out)
    _, mismatch, errors = filecmp.cmpfiles(out, again, _files(out), shallow=False)
    assert mismatch == [] and errors == []


def test_jobs_do_not_change_results(pipeline):
    tmp, config, out = pipeline
    par = os.path.join(tmp, "j8")
    run_pipeline(par, config, jobs=8)
    _, mismatch, errors = filecmp.cmpfiles(out, par, _files(out), shallow=False)
    assert mismatch == [] and errors == []


def test_different_seed_changes_data(pipeline, tmp_path):
    _, config, out = pipeline
    assert main(["simulate", "--config", config, "--seed", "4", "--out", str(tmp_path), "--n", "20"]) == 0
    a = art.read_runs_csv(os.path.join(out, "runs.csv"))
    b = art.read_runs_csv(str(tmp_path / "runs.csv"))
    assert a.distances[0] != b.distances[0]


def test_simulate_needs_two_runs(tmp_path):
    assert main(["simulate", "--n", "1", "--out", str(tmp_path)]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--n", "5", "--out", str(blocker / "sub")]) == 2


def test_missing_input_is_io_error(tmp_path):
    assert main(["extract", "--out", str(tmp_path)]) == 2


def test_bad_arguments(tmp_path):
    assert main(["train", "--approach", "bogus", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--jobs", "0", "--out", str(tmp_path)]) == 2


def test_schema_error_names_file_row_column(pipeline, tmp_path, capsys):
    _, _, out = pipeline
    lines = open(os.path.join(out, "runs.csv")).read().splitlines()
    fields = lines[5].split(",")
    fields[2] = "hot"
    lines[5] = ",".join(fields)
    (tmp_path / "runs.csv").write_text("\n".join(lines) + "\n")
    code = main(["split", "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 3
    assert "runs.csv" in err and "melt_temp_K" in err and "6" in err


def test_feature_schema_error(pipeline, tmp_path):
    _, _, out = pipeline
    with open(os.path.join(out, "features.csv")) as fh:
        lines = fh.read().splitlines()
    row = lines[3].split(",")
    row[4] = "oops"
    lines[3] = ",".join(row)
    (tmp_path / "features.csv").write_text("\n".join(lines) + "\n")
    for name in ("runs.csv",):
        (tmp_path / name).write_bytes(open(os.path.join(out, name), "rb").read())
    assert main(["select", "--out", str(tmp_path)]) == 3


def test_target_mismatch_is_compatibility_error(pipeline):
    _, config, out = pipeline
    sel = os.path.join(out, "selection_opening_distance.json")
    scratch = os.path.join(out, "..", "mismatch")
    os.makedirs(scratch, exist_ok=True)
    for name in ("runs.csv", "features.csv", "split.json", "labeling.json"):
        with open(os.path.join(out, name), "rb") as src, open(os.path.join(scratch, name), "wb") as dst:
            dst.write(src.read())
    code = main(["train", "--approach", "classify", "--selection", sel, "--config", config,
                 "--out", scratch])
    assert code == 4


def test_feature_mismatch_is_compatibility_error(pipeline, tmp_path, capsys):
    _, _, out = pipeline
    bundle = json.load(open(os.path.join(out, "bundle_classify.json")))
    bundle["selected_features"][0] = "injection_pressure__nonexistent__none"
    path = tmp_path / "bundle.json"
    path.write_text(json.dumps(bundle))
    code = main(["predict", "--bundle", str(path), "--features", os.path.join(out, "features.csv"),
                 "--out", str(tmp_path)])
    assert code == 4
    assert "nonexistent" in capsys.readouterr().err


def test_bundle_version_mismatch(pipeline, tmp_path):
    _, _, out = pipeline
    bundle = json.load(open(os.path.join(out, "bundle_naive.json")))
    bundle["format_version"] = 2
    path = tmp_path / "bundle.json"
    path.write_text(json.dumps(bundle))
    code = main(["predict", "--bundle", str(path), "--features", os.path.join(out, "features.csv"),
                 "--out", str(tmp_path)])
    assert code == 4


def test_report_table(pipeline):
    _, _, out = pipeline
    txt = open(os.path.join(out, "report.txt")).read()
    assert "Accuracy" in txt and "Specificity" in txt and "Sensitivity" in txt
    doc = json.load(open(os.path.join(out, "report.json")))
    assert [r["approach"] for r in doc["reports"]] == ["classify", "regress_threshold", "naive"]


def test_holdout_not_evaluated_by_default(pipeline):
    _, _, out = pipeline
    assert not any("holdout" in f for f in _files(out))
