"""Command line entry point: run scenarios, sweep variants, calibrate, replay logs."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from snakedc.errors import ConfigurationError, ExportError
from snakedc.harness.comparison import run_comparison
from snakedc.harness.config import ExperimentConfig, load_config
from snakedc.harness.export import export_plot_data
from snakedc.harness.scenarios import SCENARIOS, ScenarioLog, run_scenario
from snakedc.harness.trial import absition_drift, friction_offsets

log = logging.getLogger("snakedc")


def _config(path) -> ExperimentConfig:
    return load_config(path) if path else ExperimentConfig()


def cmd_run(args) -> int:
    config = _config(args.config)
    out = Path(args.out or config.output.directory) / f"{args.scenario}.jsonl"
    scenario_log = run_scenario(args.scenario, config, out_path=out)
    print(f"{args.scenario}: {scenario_log.time.size} steps, {len(scenario_log.events)} events -> {out}")
    return 0


def cmd_sweep(args) -> int:
    config = _config(args.config)
    out = Path(args.out or config.output.directory)
    report = run_comparison(config, out_dir=out, workers=args.workers)
    for v, s in report.summaries.items():
        print(f"{v:4s} mean {s.grand_mean:7.3f} BL/min  std {s.std:6.3f}  trials {s.n_trials}  aborted {s.n_aborted}")
    print(f"wrote {out / 'trials.csv'} and {out / 'report.csv'}")
    if report.crashed:
        for name, _ in report.crashed:
            print(f"crashed: {name}", file=sys.stderr)
        return 1
    return 0


def cmd_calibrate(args) -> int:
    config = _config(args.config)
    offsets = friction_offsets(config)
    amp0 = config.gait.nominal_amplitude
    with np.printoptions(precision=6, suppress=True):
        print("friction offsets per window slot (rad):", offsets)
        print("open-ground drift per cycle / A0, calibrated:  ", absition_drift(config, offsets) / amp0)
        print("open-ground drift per cycle / A0, uncalibrated:", absition_drift(config) / amp0)
    return 0


def cmd_replay(args) -> int:
    path = Path(args.log)
    if not path.exists():
        raise ExportError(f"log not found: {path}")
    if path.suffix == ".csv":
        written = export_plot_data([path], args.export or path.parent)
        print(f"wrote {written['velocity_bars']['velocity']}")
        return 0
    replay = ScenarioLog.read_jsonl(path)
    print(f"{replay.name}: {replay.time.size} records over {replay.time[-1] if replay.time.size else 0:.2f} s")
    for plane, traces in replay.planes.items():
        amp = traces["amplitude"]
        print(f"  {plane}: amplitude range [{amp.min():.3f}, {amp.max():.3f}] rad, "
              f"peak |absition| {np.abs(traces['absition']).max():.3f} rad s")
    for e in replay.events:
        print(f"  t={e['time']:8.3f} {e['plane']} slot {e['slot']} window {e['window_id']}: {e['from']} -> {e['to']}")
    if args.export:
        for kind, p in export_plot_data([replay], args.export)[replay.name].items():
            print(f"wrote {kind}: {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snakedc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scripted scenario and write its JSONL log")
    p.add_argument("--config", help="YAML config (defaults when omitted)")
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every variant over all poses and trials")
    p.add_argument("--config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="print the calibrated friction offsets")
    p.add_argument("--config")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("replay", help="summarize a scenario log, telemetry file or report.csv")
    p.add_argument("--log", required=True)
    p.add_argument("--export", help="directory for tidy plotting CSVs")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
