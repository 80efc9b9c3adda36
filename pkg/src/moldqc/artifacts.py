"""Reading and writing pipeline artifacts (CSV and JSON) with schema checks.

Every artifact carries provenance ``{format_version, command, seed}``: JSON
files under a ``provenance`` key, CSV files as a leading ``# provenance:``
comment line above the header. Floats are written in shortest round-trip form
so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Iterable, Sequence

import numpy as np

from .simcore import PARAM_NAMES, SERIES_NAMES, MouldingRun, ProcessParams
from .tsfeat import FeatureMatrix

FORMAT_VERSION = 1
RUNS_HEADER = ["run_id", "cool_temp_K", "melt_temp_K", "flowrate_cm3s", "pack_pressure_bar",
               "power_law_n", "d1_Pas", "opening_distance_mm", "label"]
TIMESERIES_HEADER = ["run_id", "series", "t_s", "value"]
PREDICTIONS_HEADER = ["run_id", "predicted_label", "score"]
_PROV_PREFIX = "# provenance: "


class ArtifactError(Exception):
    exit_code = 2


class SchemaError(ArtifactError):
    exit_code = 3

    def __init__(self, path: str, message: str, row: int | None = None, column: str | None = None):
        where = os.fspath(path)
        if row is not None:
            where += f", row {row}"
        if column is not None:
            where += f", column {column!r}"
        super().__init__(f"{where}: {message}")


class CompatibilityError(ArtifactError):
    exit_code = 4


def provenance(command: str, seed: int) -> dict:
    return {"format_version": FORMAT_VERSION, "command": command, "seed": int(seed)}


def _num(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def _open_write(path):
    d = os.path.dirname(os.fspath(path))
    try:
        if d:
            os.makedirs(d, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc.strerror}") from exc


def _open_read(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def write_json(path, payload: dict, prov: dict) -> None:
    doc = {"provenance": prov, **payload}
    with _open_write(path) as fh:
        json.dump(doc, fh, indent=1, allow_nan=False)
        fh.write("\n")


def read_json(path, required: Sequence[str] = ()) -> dict:
    with _open_read(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(path, f"invalid JSON ({exc.msg})", row=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise SchemaError(path, "top level must be an object")
    for key in required:
        if key not in doc:
            raise SchemaError(path, "missing field", column=key)
    return doc


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def _write_prov(fh, prov: dict) -> None:
    fh.write(_PROV_PREFIX + json.dumps(prov) + "\n")


def _read_header(path, fh, expected: Sequence[str] | None) -> tuple[dict | None, list[str], int]:
    """Consume the provenance line and header; returns (prov, header, header line number)."""
    first = fh.readline()
    prov = None
    line_no = 1
    if first.startswith(_PROV_PREFIX):
        try:
            prov = json.loads(first[len(_PROV_PREFIX):])
        except json.JSONDecodeError:
            raise SchemaError(path, "malformed provenance line", row=1)
        first = fh.readline()
        line_no = 2
    header = next(csv.reader([first]), [])
    if expected is not None and header != list(expected):
        raise SchemaError(path, f"header must be {','.join(expected)}", row=line_no)
    return prov, header, line_no


def _parse_float(path, text: str, row: int, column: str, allow_nan: bool = False) -> float:
    if text == "" and allow_nan:
        return math.nan
    try:
        v = float(text)
    except ValueError:
        raise SchemaError(path, f"not a number: {text!r}", row=row, column=column) from None
    if not math.isfinite(v):
        raise SchemaError(path, f"non-finite value {text!r}", row=row, column=column)
    return v


def _parse_int(path, text: str, row: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise SchemaError(path, f"not an integer: {text!r}", row=row, column=column) from None


# ---------------------------------------------------------------------------
# runs summary
# ---------------------------------------------------------------------------

def write_runs_csv(path, runs: Sequence[MouldingRun], prov: dict) -> None:
    with _open_write(path) as fh:
        _write_prov(fh, prov)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        for r in runs:
            w.writerow([r.run_id, *[_num(v) for v in r.params.as_tuple()],
                        _num(r.opening_distance), "" if r.label is None else r.label])


class RunsTable:
    def __init__(self, run_ids, params, distances, labels, prov=None):
        self.run_ids = list(run_ids)
        self.params = list(params)
        self.distances = np.asarray(distances, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.provenance = prov

    def index(self) -> dict[int, int]:
        return {r: i for i, r in enumerate(self.run_ids)}


def read_runs_csv(path) -> RunsTable:
    with _open_read(path) as fh:
        prov, _, line_no = _read_header(path, fh, RUNS_HEADER)
        ids, params, dist, labels = [], [], [], []
        seen = set()
        for i, row in enumerate(csv.reader(fh), start=line_no + 1):
            if len(row) != len(RUNS_HEADER):
                raise SchemaError(path, f"expected {len(RUNS_HEADER)} fields, got {len(row)}", row=i)
            rid = _parse_int(path, row[0], i, "run_id")
            if rid in seen:
                raise SchemaError(path, f"duplicate run_id {rid}", row=i, column="run_id")
            seen.add(rid)
            vals = [_parse_float(path, row[j + 1], i, RUNS_HEADER[j + 1]) for j in range(len(PARAM_NAMES))]
            try:
                p = ProcessParams(*vals)
            except ValueError as exc:
                raise SchemaError(path, str(exc), row=i) from None
            d = _parse_float(path, row[7], i, "opening_distance_mm")
            if row[8] not in ("0", "1"):
                raise SchemaError(path, f"label must be 0 or 1, got {row[8]!r}", row=i, column="label")
            ids.append(rid)
            params.append(p)
            dist.append(d)
            labels.append(int(row[8]))
    if not ids:
        raise SchemaError(path, "no runs")
    return RunsTable(ids, params, dist, labels, prov)


# ---------------------------------------------------------------------------
# long-format time series
# ---------------------------------------------------------------------------

def write_timeseries_csv(path, runs: Sequence[MouldingRun], t: np.ndarray, prov: dict) -> None:
    t_txt = [repr(float(v)) for v in t]
    with _open_write(path) as fh:
        _write_prov(fh, prov)
        fh.write(",".join(TIMESERIES_HEADER) + "\n")
        for r in runs:
            for name in SERIES_NAMES:
                vals = r.series(name)
                prefix = f"{r.run_id},{name},"
                fh.write("".join(f"{prefix}{tt},{v!r}\n" for tt, v in zip(t_txt, vals.tolist())))


def read_timeseries_csv(path, runs: RunsTable) -> list[MouldingRun]:
    """Rebuild runs (in ``runs`` order) from the long-format file."""
    import pandas as pd

    with _open_read(path) as fh:
        prov, _, line_no = _read_header(path, fh, TIMESERIES_HEADER)
        try:
            df = pd.read_csv(fh, header=None, names=TIMESERIES_HEADER, dtype={"series": str},
                             float_precision="round_trip", keep_default_na=False,
                             na_values=[], low_memory=False)
        except (ValueError, pd.errors.ParserError) as exc:
            raise SchemaError(path, f"unparseable CSV ({exc})") from None
    first_data = line_no + 1
    for col in ("run_id", "t_s", "value"):
        num = pd.to_numeric(df[col], errors="coerce")
        bad = np.flatnonzero(~np.isfinite(num.to_numpy(dtype=np.float64)))
        if len(bad):
            i = int(bad[0])
            raise SchemaError(path, f"invalid value {df[col].iloc[i]!r}", row=first_data + i, column=col)
        df[col] = num
    if (df["run_id"] != np.round(df["run_id"])).any():
        i = int(np.flatnonzero((df["run_id"] != np.round(df["run_id"])).to_numpy())[0])
        raise SchemaError(path, "run_id must be an integer", row=first_data + i, column="run_id")
    bad_series = ~df["series"].isin(SERIES_NAMES)
    if bad_series.any():
        i = int(np.flatnonzero(bad_series.to_numpy())[0])
        raise SchemaError(path, f"unknown series {df['series'].iloc[i]!r}", row=first_data + i, column="series")

    run_col = df["run_id"].to_numpy(dtype=np.int64)
    ser_col = df["series"].to_numpy()
    t_col = df["t_s"].to_numpy(dtype=np.float64)
    val_col = df["value"].to_numpy(dtype=np.float64)
    # rows are grouped by (run, series); locate contiguous blocks
    key_change = np.flatnonzero((run_col[1:] != run_col[:-1]) | (ser_col[1:] != ser_col[:-1])) + 1
    starts = np.concatenate([[0], key_change])
    ends = np.concatenate([key_change, [len(df)]])
    blocks: dict[tuple[int, str], tuple[int, int]] = {}
    for s, e in zip(starts.tolist(), ends.tolist()):
        key = (int(run_col[s]), str(ser_col[s]))
        if key in blocks:
            raise SchemaError(path, f"rows for run {key[0]} series {key[1]} are not contiguous",
                              row=first_data + s)
        blocks[key] = (s, e)
        if np.any(np.diff(t_col[s:e]) <= 0):
            i = s + int(np.flatnonzero(np.diff(t_col[s:e]) <= 0)[0]) + 1
            raise SchemaError(path, "t_s must increase within a series", row=first_data + i, column="t_s")

    out = []
    for rid, p, d, lab in zip(runs.run_ids, runs.params, runs.distances, runs.labels):
        series = {}
        for name in SERIES_NAMES:
            if (rid, name) not in blocks:
                raise SchemaError(path, f"run {rid} has no {name} series", column="series")
            s, e = blocks[(rid, name)]
            series[name] = val_col[s:e].copy()
        out.append(MouldingRun(rid, p, series["injection_pressure"], series["cavity_pressure"],
                               series["ram_position"], float(d), int(lab)))
    extra = {k[0] for k in blocks} - set(runs.run_ids)
    if extra:
        raise SchemaError(path, f"run_id {min(extra)} is not in the runs summary", column="run_id")
    return out


# ---------------------------------------------------------------------------
# feature matrix
# ---------------------------------------------------------------------------

def write_features_csv(path, fm: FeatureMatrix, prov: dict) -> None:
    with _open_write(path) as fh:
        _write_prov(fh, prov)
        fh.write(",".join(["run_id", *fm.column_names]) + "\n")
        for rid, row in zip(fm.run_ids, fm.values.tolist()):
            fh.write(str(rid) + "," + ",".join("" if v != v else repr(v) for v in row) + "\n")


def read_features_csv(path) -> tuple[FeatureMatrix, dict | None]:
    import pandas as pd

    with _open_read(path) as fh:
        prov, header, line_no = _read_header(path, fh, None)
        if not header or header[0] != "run_id":
            raise SchemaError(path, "first column must be run_id", row=line_no)
        if len(set(header)) != len(header):
            raise SchemaError(path, "duplicate column names", row=line_no)
        try:
            df = pd.read_csv(fh, header=None, names=header, float_precision="round_trip",
                             keep_default_na=False, na_values=[""], low_memory=False)
        except (ValueError, pd.errors.ParserError) as exc:
            raise SchemaError(path, f"unparseable CSV ({exc})") from None
    values = np.empty((len(df), len(header) - 1))
    for j, name in enumerate(header):
        col = pd.to_numeric(df[name], errors="coerce").to_numpy(dtype=np.float64)
        raw_missing = df[name].isna().to_numpy()
        bad = np.flatnonzero((np.isnan(col) & ~raw_missing) | np.isinf(col))
        if name == "run_id":
            bad = np.flatnonzero(raw_missing | np.isnan(col) | (col != np.round(col)))
        if len(bad):
            i = int(bad[0])
            raise SchemaError(path, f"invalid value {df[name].iloc[i]!r}", row=line_no + 1 + i, column=name)
        if j == 0:
            run_ids = [int(v) for v in col]
        else:
            values[:, j - 1] = col
    if len(set(run_ids)) != len(run_ids):
        raise SchemaError(path, "duplicate run_id", column="run_id")
    return FeatureMatrix(header[1:], values, run_ids), prov


# ---------------------------------------------------------------------------
# small tables
# ---------------------------------------------------------------------------

def write_rows_csv(path, header: Sequence[str], rows: Iterable[Sequence], prov: dict) -> None:
    with _open_write(path) as fh:
        _write_prov(fh, prov)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_text(path, text: str, prov: dict) -> None:
    with _open_write(path) as fh:
        _write_prov(fh, prov)
        fh.write(text if text.endswith("\n") else text + "\n")
