"""Controller-variant comparison across seeded poses and trials."""

from __future__ import annotations

import csv
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from snakedc.harness.config import ExperimentConfig, dump_config
from snakedc.harness.trial import TrialRecord, run_trial, trial_name

log = logging.getLogger(__name__)

TRIAL_COLUMNS = [
    "variant", "pose", "trial", "seed", "x0", "y0", "heading0", "duration_s", "simulated_s",
    "displacement_bl", "total_displacement_bl", "velocity_bl_per_min", "pdc_events", "ndc_events",
    "nc_events", "aborted", "abort_reason",
]
REPORT_COLUMNS = ["variant", "row", "pose", "n_trials", "mean_velocity", "std_velocity", "n_aborted"]


@dataclass
class VariantSummary:
    variant: str
    pose_means: list
    grand_mean: float
    std: float
    n_trials: int
    n_aborted: int


@dataclass
class ComparisonReport:
    records: list
    summaries: dict = field(default_factory=dict)
    crashed: list = field(default_factory=list)  # (trial name, traceback) of trials that raised

    @property
    def any_aborted(self) -> bool:
        return any(r.aborted for r in self.records)

    def summary(self, variant: str) -> VariantSummary:
        return self.summaries[variant]


def _fmt(value: float) -> str:
    return repr(float(value))


def summarize(records: list, variants, n_poses: int) -> dict:
    out = {}
    for v in variants:
        rows = [r for r in records if r.variant == v]
        if not rows:
            continue
        vel = np.array([r.velocity for r in rows])
        pose_means = [
            float(np.mean([r.velocity for r in rows if r.pose_index == p]))
            for p in range(n_poses)
            if any(r.pose_index == p for r in rows)
        ]
        out[v] = VariantSummary(
            variant=v,
            pose_means=pose_means,
            grand_mean=float(vel.mean()),
            std=float(vel.std(ddof=1)) if vel.size > 1 else 0.0,
            n_trials=int(vel.size),
            n_aborted=sum(r.aborted for r in rows),
        )
    return out


def _run_one(args):
    config, variant, pose, trial, telemetry_dir = args
    try:
        return run_trial(config, pose, trial, variant=variant, telemetry_dir=telemetry_dir)
    except Exception:  # a bug, not a diverged simulation (those come back as aborted records)
        return (trial_name(variant, pose, trial), traceback.format_exc())


def run_comparison(config: ExperimentConfig, out_dir=None, workers: int = 1, variants=None) -> ComparisonReport:
    """Run every (variant, pose, trial) and aggregate.

    With ``out_dir`` set, writes ``trials.csv``, ``report.csv``, the resolved
    config and per-trial telemetry under ``telemetry/``.
    """
    variants = tuple(variants or config.variants)
    out = Path(out_dir) if out_dir is not None else None
    telemetry_dir = out / "telemetry" if out is not None and config.output.telemetry else None
    jobs = [
        (config, v, p, t, telemetry_dir)
        for v in variants
        for p in range(config.n_poses)
        for t in range(config.trials_per_pose)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = []
        for job in jobs:
            res = _run_one(job)
            if isinstance(res, TrialRecord):
                log.info("%s velocity %.3f BL/min%s", res.name, res.velocity, " (aborted)" if res.aborted else "")
            results.append(res)
    records = [r for r in results if isinstance(r, TrialRecord)]
    crashed = [r for r in results if not isinstance(r, TrialRecord)]
    for name, tb in crashed:
        log.error("trial %s crashed:\n%s", name, tb)
    report = ComparisonReport(records=records, summaries=summarize(records, variants, config.n_poses),
                              crashed=crashed)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_trials_csv(records, out / "trials.csv")
        write_report_csv(report, out / "report.csv")
        dump_config(config, out / "config.yaml")
    return report


def write_trials_csv(records: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            w.writerow([
                r.variant, r.pose_index, r.trial_index, r.seed, _fmt(r.pose.x), _fmt(r.pose.y),
                _fmt(r.pose.heading), _fmt(r.duration), _fmt(r.simulated), _fmt(r.displacement),
                _fmt(r.total_displacement), _fmt(r.velocity), r.count("PDC"), r.count("NDC"),
                r.count("NC"), int(r.aborted), r.abort_reason,
            ])


def write_report_csv(report: ComparisonReport, path) -> None:
    """Per-pose means followed by one summary row per variant."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for v, s in report.summaries.items():
            for p, mean in enumerate(s.pose_means):
                rows = [r for r in report.records if r.variant == v and r.pose_index == p]
                vel = np.array([r.velocity for r in rows])
                std = float(vel.std(ddof=1)) if vel.size > 1 else 0.0
                w.writerow([v, "pose", p, len(rows), _fmt(mean), _fmt(std), sum(r.aborted for r in rows)])
        for v, s in report.summaries.items():
            w.writerow([v, "all", "", s.n_trials, _fmt(s.grand_mean), _fmt(s.std), s.n_aborted])


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
