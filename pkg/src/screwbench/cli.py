"""Command-line entry point.

Subcommands:
  simulate   run a scenario closed-loop, write a 100 Hz CSV log + report
  analyze    force/torque ratio, regrasp frequency, peaks and envelope of a log
  compare    Mann-Whitney U test of per-log ratios between two directories
  calibrate  least-squares force calibration from (pot_reading, ref_force) CSV

Validation failures exit nonzero; physical outcomes (fault, timeout) are
recorded in the report and exit zero. Bare scenario names are resolved
against --scenario-dir, the SCREWBENCH_SCENARIO_DIR environment variable,
or ./scenarios, in that order.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, control, logio, runner
from .errors import ScrewbenchError
from .scenario import load_scenario

SCENARIO_DIR_ENV = "SCREWBENCH_SCENARIO_DIR"

# Slip flags in analyze reports use the controller's detection defaults.
SLIP_DROP_FRACTION = 0.5
SLIP_WINDOW = 30
SLIP_NOISE_FLOOR = 0.01


def _resolve_scenario(name: str, scenario_dir: str | None) -> Path:
    path = Path(name)
    if path.exists():
        return path
    base = scenario_dir or os.environ.get(SCENARIO_DIR_ENV, "scenarios")
    candidate = Path(base) / name
    if candidate.exists():
        return candidate
    with_ext = candidate.with_suffix(".yaml")
    if with_ext.exists():
        return with_ext
    raise ScrewbenchError(f"scenario not found: {name}")


def cmd_simulate(args) -> int:
    scenario_path = _resolve_scenario(args.scenario, args.scenario_dir)
    scenario = load_scenario(scenario_path)
    if args.seed is not None:
        scenario.seed = args.seed
        scenario.sim.seed = args.seed
    result = runner.run_scenario(scenario)
    logio.write_log(args.out, result.samples)
    report = result.report(scenario)
    report["engaged_depth_final"] = float(result.world.engaged_depth)
    logio.write_report(args.report, report)
    print(f"outcome: {result.outcome.value}  "
          f"slip_events: {len(result.slip_times)}  "
          f"log: {args.out}  report: {args.report}")
    return 0


def _count_slip_flags(mz: np.ndarray) -> int:
    """Torque drops below SLIP_DROP_FRACTION of the trailing-window max."""
    events = 0
    flagged = False
    for i in range(1, len(mz)):
        lo = max(0, i - SLIP_WINDOW + 1)
        peak = float(np.max(mz[lo:i + 1]))
        drop = peak > SLIP_NOISE_FLOOR and mz[i] < SLIP_DROP_FRACTION * peak
        if drop and not flagged:
            events += 1
        flagged = drop
    return events


def cmd_analyze(args) -> int:
    series = logio.read_log(args.log)
    est = analysis.estimate_nu(series)
    report = {
        "n": est.n,
        "nu": est.nu,
        "intercept": est.intercept,
        "r": est.r,
    }
    peaks = analysis.local_maxima(
        series, "mz",
        min_prominence=3.0 * analysis.DEFAULT_NOISE_STD["mz"],
        min_separation=args.min_separation)
    report["peak_count"] = len(peaks)
    report["peak_times"] = [float(t) for t in peaks.times]
    report["peak_values"] = [float(v) for v in peaks.values]
    try:
        report["regrasp_frequency_hz"] = analysis.regrasp_frequency(
            series, "mz")
    except ScrewbenchError:
        report["regrasp_frequency_hz"] = None
    if len(peaks) >= 2:
        env = analysis.fit_envelope(peaks)
        grid = np.linspace(env.t_min, env.t_max, args.envelope_points)
        report["envelope_t"] = [float(t) for t in grid]
        report["envelope_mz"] = [float(v) for v in env(grid)]
    report["slip_events"] = _count_slip_flags(series.channel("mz"))
    text = logio.format_report(report)
    if args.report:
        Path(args.report).write_text(text)
    sys.stdout.write(text)
    return 0


def _group_nus(directory: Path) -> list:
    logs = sorted(directory.glob("*.csv"))
    if not logs:
        raise ScrewbenchError(f"no CSV logs in {directory}")
    nus = []
    for log in logs:
        series = logio.read_log(log)
        nus.append(analysis.estimate_nu(series).nu)
    return nus


def cmd_compare(args) -> int:
    nus_a = _group_nus(Path(args.group_a))
    nus_b = _group_nus(Path(args.group_b))
    result = analysis.mann_whitney_u(nus_a, nus_b)
    summaries = analysis.summarize_conditions(
        {"group_a": nus_a, "group_b": nus_b})
    report = {
        "u": float(result.u),
        "p": float(result.p),
        "method": result.method.value,
    }
    for label, s in summaries.items():
        report[label] = {
            "n": len(nus_a if label == "group_a" else nus_b),
            "median": s.median, "q1": s.q1, "q3": s.q3,
            "whisker_low": s.whisker_low, "whisker_high": s.whisker_high,
            "outliers": s.outliers,
        }
    sys.stdout.write(logio.format_report(report))
    return 0


def cmd_calibrate(args) -> int:
    path = Path(args.pairs)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ScrewbenchError(f"cannot read {path}: {exc}") from exc
    pairs = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ScrewbenchError(
                f"{path}:{lineno}: expected 2 comma-separated values")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if lineno == 1:
                continue  # header row
            raise ScrewbenchError(
                f"{path}:{lineno}: non-numeric pair {line!r}") from None
    result = control.calibrate_force(pairs)
    sys.stdout.write(logio.format_report({
        "gain": result.gain,
        "offset": result.offset,
        "residual_rms": result.residual_rms,
        "n": len(pairs),
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screwbench",
        description="screw fastening/unfastening simulation workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario closed-loop")
    p_sim.add_argument("scenario", help="scenario file or bare name")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_sim.add_argument("--out", default="run.csv", help="output CSV log")
    p_sim.add_argument("--report", default="report.yaml",
                       help="output run report")
    p_sim.add_argument("--scenario-dir", default=None,
                       help=f"scenario directory (default ${SCENARIO_DIR_ENV}"
                            " or ./scenarios)")
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="analyze a CSV log")
    p_an.add_argument("log")
    p_an.add_argument("--report", default=None, help="also write the report")
    p_an.add_argument("--min-separation", type=float, default=0.2,
                      help="minimum peak separation in seconds")
    p_an.add_argument("--envelope-points", type=int, default=50)
    p_an.set_defaults(func=cmd_analyze)

    p_cmp = sub.add_parser("compare",
                           help="compare nu between two log directories")
    p_cmp.add_argument("group_a")
    p_cmp.add_argument("group_b")
    p_cmp.set_defaults(func=cmd_compare)

    p_cal = sub.add_parser("calibrate",
                           help="fit a force calibration line")
    p_cal.add_argument("pairs", help="CSV of pot_reading,ref_force pairs")
    p_cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScrewbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
