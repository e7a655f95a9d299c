"""Command-line front end.

Subcommands::

    asv-inekf montecarlo  --config cfg.yaml --out DIR
    asv-inekf convergence --config cfg.yaml --out DIR
    asv-inekf replay      --log log.csv --config cfg.yaml --out DIR
    asv-inekf simulate    --config cfg.yaml --out DIR [--run K] [--mode MODE]
    asv-inekf horizon     --segments segs.csv --config cfg.yaml --out DIR
    asv-inekf config      --out DIR

``--config`` is optional everywhere; without it the built-in defaults apply.
Every command writes ``effective_config.yaml`` next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, dump_config, load_config, split_variant
from .errors import ConfigError, LogFormatError
from .sim.logio import infer_mode, read_log, write_log
from .sim.montecarlo import (
    METRIC_COLUMNS,
    RunMetrics,
    build_events,
    converged,
    euler_angles,
    run_filter,
    run_monte_carlo,
    simulate_run,
    summarize,
    truth_trace,
)

log = logging.getLogger("asv_inekf")

STATE_COLUMNS = ("roll", "pitch", "yaw", "x", "y", "z")


def _fmt(x) -> str:
    return repr(float(x))


def _slug(variant: str) -> str:
    return variant.replace(":", "_")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_metrics_csv(path: Path, metrics: list[RunMetrics]) -> None:
    header = ["run"] + [c for c, _ in METRIC_COLUMNS] + ["diverged"]
    rows = [[m.run] + [_fmt(m.mean(name)) for _, name in METRIC_COLUMNS] + [int(m.diverged)] for m in metrics]
    _write_csv(path, header, rows)


def write_summary_csv(path: Path, results: dict[str, list[RunMetrics]]) -> None:
    header = ["variant", "filter", "mode", "n_runs", "n_diverged", "skipped_updates", "metric",
              "mean", "median", "q1", "q3"]
    rows = []
    for variant, metrics in results.items():
        filt, mode = split_variant(variant)
        s = summarize(metrics)
        for column, _ in METRIC_COLUMNS:
            st = s[column]
            rows.append([variant, filt, mode, s.n_runs, s.n_diverged, s.skipped_updates, column,
                         _fmt(st.mean), _fmt(st.median), _fmt(st.q1), _fmt(st.q3)])
    _write_csv(path, header, rows)


def _prepare(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if overrides:
        try:
            cfg = dataclasses.replace(cfg, **overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.yaml").write_text(dump_config(cfg))
    return cfg, out


def _section(cfg: ExperimentConfig, name: str, args):
    section = getattr(cfg, name)
    overrides = {}
    if getattr(args, "runs", None) is not None:
        overrides["n_runs"] = args.runs
    if getattr(args, "duration", None) is not None:
        overrides["duration"] = args.duration
    if overrides:
        try:
            section = dataclasses.replace(section, **overrides)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    return section


def _run_variants(cfg, section) -> dict[str, list[RunMetrics]]:
    mc = cfg.run_config(section)
    results = {}
    for variant in section.variants:
        filt, mode = split_variant(variant)
        log.info("running %s (%d runs, %.1f s)", variant, mc.n_runs, mc.duration)
        results[variant] = run_monte_carlo(mc, filt, mode)
        n_div = sum(m.diverged for m in results[variant])
        log.info("  %s: %d diverged", variant, n_div)
    return results


def cmd_montecarlo(args) -> int:
    cfg, out = _prepare(args)
    section = _section(cfg, "montecarlo", args)
    if not section.variants:
        raise ConfigError("montecarlo.variants is empty")
    results = _run_variants(cfg, section)
    for variant, metrics in results.items():
        write_metrics_csv(out / f"metrics_{_slug(variant)}.csv", metrics)
    write_summary_csv(out / "summary.csv", results)
    if not args.no_figures:
        from .plotting import error_boxplots

        error_boxplots(results, out / "errors_boxplot.png")
    log.info("wrote results to %s", out)
    return 0


def cmd_convergence(args) -> int:
    cfg, out = _prepare(args)
    section = _section(cfg, "convergence", args)
    if not section.variants:
        raise ConfigError("convergence.variants is empty")
    if section.record_stride == 0:
        section = dataclasses.replace(section, record_stride=1)
    results = _run_variants(cfg, section)
    mc = cfg.run_config(section)
    truth = truth_trace(mc)
    _write_csv(out / "truth.csv", ["t", *STATE_COLUMNS],
               [[_fmt(truth["t"][i])] + [_fmt(truth[c][i]) for c in STATE_COLUMNS] for i in range(len(truth["t"]))])
    div_rows = []
    for variant, metrics in results.items():
        filt, mode = split_variant(variant)
        rows = []
        for m in metrics:
            tr = m.trace
            for i in range(len(tr["t"])):
                rows.append([m.run, _fmt(tr["t"][i])] + [_fmt(tr[c][i]) for c in STATE_COLUMNS])
        _write_csv(out / f"trajectories_{_slug(variant)}.csv", ["run", "t", *STATE_COLUMNS], rows)
        write_metrics_csv(out / f"metrics_{_slug(variant)}.csv", metrics)
        s = summarize(metrics)
        n_conv = sum(converged(m, mc.duration) for m in metrics)
        div_rows.append([variant, filt, mode, s.n_runs, s.n_diverged, n_conv])
    _write_csv(out / "divergence.csv", ["variant", "filter", "mode", "n_runs", "n_diverged", "n_converged"], div_rows)
    if not args.no_figures:
        from .plotting import convergence_grid

        convergence_grid(results, truth, out / "convergence.png")
    log.info("wrote results to %s", out)
    return 0


def _estimate_rows(estimates):
    rows = []
    for t, r, v, p in estimates:
        roll, pitch, yaw = euler_angles(r)
        rows.append([_fmt(t), _fmt(roll), _fmt(pitch), _fmt(yaw), *map(_fmt, v), *map(_fmt, p)])
    return rows


ESTIMATE_HEADER = ["t", "roll", "pitch", "yaw", "vx", "vy", "vz", "x", "y", "z"]


def replay_log(cfg: ExperimentConfig, log_path) -> tuple[str, list]:
    """Run the configured replay filter over a log; returns the mode used and the estimates."""
    stream, x0 = read_log(log_path)
    if x0 is None:
        raise LogFormatError(f"{log_path}: log has no init row")
    mode = cfg.replay.mode or infer_mode(stream)
    mc = cfg.run_config(cfg.montecarlo, init_noise=cfg.replay.init_noise)
    events = build_events(stream, mode, pairing_window=cfg.pairing_window)
    _, estimates = run_filter(cfg.replay.filter, x0, stream, events, mc)
    return mode, estimates


def cmd_replay(args) -> int:
    cfg, out = _prepare(args)
    mode, estimates = replay_log(cfg, args.log)
    log.info("replayed %s with %s in %s mode", args.log, cfg.replay.filter, mode)
    _write_csv(out / "estimates.csv", ESTIMATE_HEADER, _estimate_rows(estimates))
    return 0


def simulate_log(cfg: ExperimentConfig, mode: str, run_index: int, duration: float | None = None):
    """Sensor stream and perturbed initial guess for one run, as the replay path would see them."""
    mc = cfg.run_config(cfg.montecarlo, init_noise=cfg.replay.init_noise)
    if duration is not None:
        mc = dataclasses.replace(mc, duration=duration)
    truth, x0, stream, events = simulate_run(mc, mode, run_index)
    return mc, truth, x0, stream, events


def cmd_simulate(args) -> int:
    cfg, out = _prepare(args)
    mc, truth, x0, stream, _ = simulate_log(cfg, args.mode, args.run, args.duration)
    write_log(out / "sensor_log.csv", stream, x0)
    rows = []
    for t in stream.imu_t:
        s = truth.state_at(t)
        rows.append([_fmt(t), *map(_fmt, s.euler), *map(_fmt, s.pose.v), *map(_fmt, s.pose.p)])
    _write_csv(out / "truth.csv", ESTIMATE_HEADER, rows)
    log.info("wrote %s and truth.csv to %s", "sensor_log.csv", out)
    return 0


def read_segments(path) -> list[tuple[float, list]]:
    """Group a ``t,x0,y0,x1,y1`` CSV into ``(t, [Segment, ...])`` frames, in file order."""
    from .horizon import Segment

    frames: dict[float, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header[:5] != ["t", "x0", "y0", "x1", "y1"]:
            raise LogFormatError(f"{path}:1: header must be 't,x0,y0,x1,y1'")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t, x0, y0, x1, y1 = (float(c) for c in row[:5])
                seg = Segment((x0, y0), (x1, y1))
            except ValueError as exc:
                raise LogFormatError(f"{path}:{line_no}: {exc}") from None
            frames.setdefault(t, []).append(seg)
    return list(frames.items())


def cmd_horizon(args) -> int:
    from .errors import NoHorizonError
    from .horizon import horizon_to_reading

    cfg, out = _prepare(args)
    sigma = np.radians(cfg.sensors.rollpitch_std_deg)
    rows, missing = [], 0
    for t, segs in read_segments(args.segments):
        try:
            r = horizon_to_reading(segs, cfg.camera, cfg.horizon, sigma, t, args.vertical_cutoff)
        except (NoHorizonError, ValueError):
            missing += 1
            continue
        rows.append([_fmt(t), _fmt(r.phi), _fmt(r.theta)])
    _write_csv(out / "rollpitch.csv", ["t", "phi", "theta"], rows)
    log.info("%d frames with a horizon, %d without", len(rows), missing)
    return 0


def cmd_config(args) -> int:
    _prepare(args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment configuration")
    common.add_argument("--out", help="output directory (default: output_dir from the config)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--runs", type=int, help="override the number of Monte-Carlo runs")
    runs.add_argument("--duration", type=float, help="override the simulated duration in seconds")
    runs.add_argument("--workers", type=int, help="worker processes for independent runs")
    runs.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    parser = argparse.ArgumentParser(prog="asv-inekf", description="Invariant EKF benchmarks for surface vessels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("montecarlo", parents=[common, runs], help="average-error comparison across variants")
    p.set_defaults(func=cmd_montecarlo)
    p = sub.add_parser("convergence", parents=[common, runs], help="per-timestep trajectories under large initial error")
    p.set_defaults(func=cmd_convergence)
    p = sub.add_parser("replay", parents=[common], help="run a filter over a recorded sensor log")
    p.add_argument("--log", required=True, help="sensor log CSV")
    p.set_defaults(func=cmd_replay)
    p = sub.add_parser("simulate", parents=[common], help="export one simulated run as a sensor log")
    p.add_argument("--run", type=int, default=0, help="run index (default 0)")
    p.add_argument("--mode", default="partial-30Hz", help="measurement mode (default partial-30Hz)")
    p.add_argument("--duration", type=float, help="override the simulated duration in seconds")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("horizon", parents=[common], help="roll/pitch readings from detected horizon segments")
    p.add_argument("--segments", required=True, help="CSV with columns t,x0,y0,x1,y1")
    p.add_argument("--vertical-cutoff", type=float, default=45.0, help="degrees (default 45)")
    p.set_defaults(func=cmd_horizon)
    p = sub.add_parser("config", parents=[common], help="write the effective configuration and exit")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except (ConfigError, LogFormatError) as exc:
        log.error("error: %s", exc)
        return 2
    except ValueError as exc:
        log.error("error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
