"""Tidy CSV exports for plotting amplitude, absition and velocity figures."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from snakedc.errors import ExportError
from snakedc.harness.comparison import REPORT_COLUMNS, ComparisonReport, read_report_csv, write_report_csv
from snakedc.harness.scenarios import ScenarioLog

AMPLITUDE_COLUMNS = ["source", "plane", "window", "time", "amplitude", "running_mean", "mode"]
ABSITION_COLUMNS = ["source", "plane", "window", "time", "absition", "thresh_lower", "thresh_upper"]
EVENT_COLUMNS = ["source", "time", "plane", "slot", "window_id", "from", "to"]
VELOCITY_COLUMNS = REPORT_COLUMNS


def _f(x) -> str:
    return repr(float(x))


def _write(path: Path, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    return path


def amplitude_rows(log: ScenarioLog):
    for plane, tr in log.planes.items():
        amp, mean, mode = tr["amplitude"], tr["running_mean"], tr["mode"]
        for j in range(amp.shape[1]):
            for k, t in enumerate(log.time):
                yield [log.name, plane, j, _f(t), _f(amp[k, j]), _f(mean[k, j]), int(mode[k, j])]


def absition_rows(log: ScenarioLog, thresh_lower: float, thresh_upper: float):
    for plane, tr in log.planes.items():
        ab = tr["absition"]
        for j in range(ab.shape[1]):
            for k, t in enumerate(log.time):
                yield [log.name, plane, j, _f(t), _f(ab[k, j]), _f(thresh_lower), _f(thresh_upper)]


def event_rows(source: str, events):
    for e in events:
        yield [source, _f(e["time"]), e["plane"], e["slot"], e["window_id"], e["from"], e["to"]]


def export_log(log: ScenarioLog, out_dir, thresholds=(None, None)) -> dict:
    """Write ``<name>_amplitude.csv``, ``<name>_absition.csv`` and ``<name>_events.csv``.

    Threshold columns default to plus and minus twice the log's nominal
    amplitude when it is recorded, otherwise NaN.
    """
    out = Path(out_dir)
    amp0 = log.meta.get("nominal_amplitude")
    lower, upper = thresholds
    if lower is None:
        lower = -2.0 * amp0 if amp0 is not None else float("nan")
    if upper is None:
        upper = 2.0 * amp0 if amp0 is not None else float("nan")
    return {
        "amplitude": _write(out / f"{log.name}_amplitude.csv", AMPLITUDE_COLUMNS, amplitude_rows(log)),
        "absition": _write(out / f"{log.name}_absition.csv", ABSITION_COLUMNS, absition_rows(log, lower, upper)),
        "events": _write(out / f"{log.name}_events.csv", EVENT_COLUMNS, event_rows(log.name, log.events)),
    }


def export_velocity_bars(report, out_dir) -> Path:
    """Per-pose bars and per-variant summary rows for the velocity figure."""
    path = Path(out_dir) / "velocity_bars.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(report, ComparisonReport):
        write_report_csv(report, path)
        return path
    src = Path(report)
    if not src.exists():
        raise ExportError(f"report not found: {src}")
    rows = read_report_csv(src)
    return _write(path, VELOCITY_COLUMNS, ([r[c] for c in VELOCITY_COLUMNS] for r in rows))


def read_trace_csv(path) -> dict:
    """Re-read an amplitude or absition export as ``{(plane, window): {column: array}}``."""
    out: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["plane"], int(row["window"]))
            cols = out.setdefault(key, {})
            for name, value in row.items():
                if name in ("source", "plane", "window"):
                    continue
                cols.setdefault(name, []).append(int(value) if name == "mode" else float(value))
    return {k: {c: np.array(v) for c, v in cols.items()} for k, cols in out.items()}


def export_plot_data(logs, out_dir) -> dict:
    """Export every log (paths or in-memory logs/reports) to tidy CSVs under ``out_dir``.

    JSONL paths are read as scenario logs or trial telemetry; CSV paths are
    taken as comparison reports. Returns ``{source name: {kind: path}}``.
    """
    written = {}
    for item in logs:
        if isinstance(item, ComparisonReport):
            written["velocity_bars"] = {"velocity": export_velocity_bars(item, out_dir)}
            continue
        if isinstance(item, ScenarioLog):
            written[item.name] = export_log(item, out_dir)
            continue
        path = Path(item)
        if not path.exists():
            raise ExportError(f"log not found: {path}")
        if path.suffix == ".csv":
            written["velocity_bars"] = {"velocity": export_velocity_bars(path, out_dir)}
        else:
            written[path.stem] = export_log(ScenarioLog.read_jsonl(path), out_dir)
    return written
