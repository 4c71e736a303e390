"""Command-line front end.

Every command reads one config file (defaults fill whatever it omits),
writes its outputs under the output directory and is a pure function of
(config, seed): reruns produce byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import eval as ev
from .config import DEFAULT_CONFIG, RunConfig, load_config
from .controllers import closed_loop_pid
from .errors import AnnctlError, ConfigError, OutputError
from .export import write_columns, write_csv, write_svg
from .mrc import simulate_closed_loop_ann
from .pipeline import evaluation_reference, load_system, save_system, train_system
from .plant import simulate

log = logging.getLogger("annctl")

COMMANDS = ("plant-step", "pid", "ann-train", "ann-run", "sweep", "compare")


def _metrics_text(m: ev.StepMetrics) -> str:
    return "".join(f"{k} = {ev.format_metric(v)}\n" for k, v in m.as_dict().items())


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _plot(path: Path, x, series, title):
    # plots never fail a command
    try:
        write_svg(path, x, series, title)
    except (OSError, ValueError) as exc:
        log.warning("plot %s skipped: %s", path, exc)


def cmd_plant_step(cfg: RunConfig, out: Path) -> list[Path]:
    traj = simulate(cfg.plant, cfg.plant_step_voltage, cfg.dt, cfg.t_end)
    cols = {"t": traj.t, "voltage": traj.control, "current": traj.extra["current"],
            "theta": traj.output, "omega": traj.extra["omega"]}
    csv = write_columns(out / "plant_step.csv", cols, cfg.csv_every)
    _plot(out / "plant_step.svg", traj.t, {"theta": traj.output, "omega": traj.extra["omega"]}, "open-loop step")
    return [csv]


def cmd_pid(cfg: RunConfig, out: Path) -> list[Path]:
    traj = closed_loop_pid(cfg.plant, cfg.pid, cfg.pid_setpoint, cfg.dt, cfg.t_end, cfg.limits, cfg.derivative_tau)
    cols = {"t": traj.t, "reference": traj.reference, "u": traj.control, "theta": traj.output,
            "error": traj.extra["error"]}
    csv = write_columns(out / "pid.csv", cols, cfg.csv_every)
    metrics = _write_text(out / "pid_metrics.txt", _metrics_text(ev.step_metrics(traj, cfg.pid_setpoint)))
    _plot(out / "pid.svg", traj.t, {"reference": traj.reference, "theta": traj.output}, "PID step response")
    return [csv, metrics]


def cmd_ann_train(cfg: RunConfig, out: Path, model_dir: Path) -> list[Path]:
    system, report = train_system(cfg)
    save_system(system, model_dir, report.seeds)
    rep = _write_text(out / "training_report.txt", report.to_text())
    return [model_dir, rep]


def _require_model(model_dir: Path):
    if not (model_dir / "manifest.txt").is_file():
        raise OutputError(f"no trained system in {model_dir} (run ann-train first)")
    return load_system(model_dir)


def cmd_ann_run(cfg: RunConfig, out: Path, model_dir: Path) -> list[Path]:
    system = _require_model(model_dir)
    r, levels = evaluation_reference(cfg)
    traj = simulate_closed_loop_ann(system, cfg.plant, r, len(r) * cfg.control_dt)
    summary = ev.tracking_summary(traj, levels, cfg.reference.hold)
    cols = {"t": traj.t, "reference": traj.reference, "u": traj.control, "theta": traj.output,
            "y_ref": traj.extra["y_ref"], "error": traj.extra["error"]}
    csv = write_columns(out / "ann_run.csv", cols, cfg.csv_every)
    lines = [f"tracking_mse = {summary.mse!r}", f"worst_error_ratio = {summary.worst_ratio!r}"]
    lines += [f"step_{j}.level = {lv!r}\nstep_{j}.steady_state_error = {e!r}"
              for j, (lv, e) in enumerate(zip(levels.tolist(), summary.step_errors.tolist()))]
    metrics = _write_text(out / "ann_metrics.txt", "\n".join(lines) + "\n")
    _plot(out / "ann_run.svg", traj.t, {"reference": traj.reference, "y_ref": traj.extra["y_ref"],
                                        "theta": traj.output}, "ANN tracking")
    return [csv, metrics]


def cmd_sweep(cfg: RunConfig, out: Path) -> list[Path]:
    res = ev.network_size_sweep(cfg, cfg.sweep_sizes, cfg.sweep_epochs, cfg.sweep_seeds)
    main = write_csv(out / "sweep.csv", ["hidden_size", "epochs", "mse"], res.csv_rows())
    per_seed = []
    for row in res.rows:
        for seed, mse in zip(res.seeds, row.per_seed):
            status = "diverged" if not np.isfinite(mse) else "ok"
            per_seed.append((seed, row.hidden_size, row.epochs, mse, status))
    seeds = write_csv(out / "sweep_seeds.csv", ["seed", "hidden_size", "epochs", "mse", "status"], per_seed)
    return [main, seeds]


def cmd_compare(cfg: RunConfig, out: Path, model_dir: Path) -> list[Path]:
    system = _require_model(model_dir)
    if system.sim_dt != cfg.dt:
        raise ConfigError("simulation.dt", f"trained system uses sim_dt {system.sim_dt!r}, config has {cfg.dt!r}")
    pid = closed_loop_pid(cfg.plant, cfg.pid, cfg.pid_setpoint, cfg.dt, cfg.t_end, cfg.limits, cfg.derivative_tau)
    ann = simulate_closed_loop_ann(system, cfg.plant, cfg.pid_setpoint, cfg.t_end)
    report = ev.compare(pid, ann, cfg.pid_setpoint)
    csv = write_columns(out / "compare.csv", report.columns, cfg.csv_every)
    summary = _write_text(out / "compare_summary.txt", "\n".join(report.summary_lines()) + "\n")
    c = report.columns
    _plot(out / "compare.svg", c["t"], {"reference": c["reference"], "pid": c["pid_y"], "ann": c["ann_y"]},
          "PID vs ANN")
    return [csv, summary]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="annctl", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="config file (INI); omitted keys take their defaults")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--seed", type=int, help="master seed (overrides seed.master)")
    p.add_argument("--model-dir", help="trained system directory (default: <out>/model)")
    p.add_argument("--print-defaults", action="store_true", help="print the full default config and exit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def run(args: argparse.Namespace) -> list[Path]:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed.master", f"must be >= 0, got {args.seed}")
        cfg = replace(cfg, master_seed=args.seed)
    out = Path(args.out if args.out is not None else cfg.output_dir)
    model_dir = Path(args.model_dir) if args.model_dir else out / "model"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out}: {exc.strerror}") from None
    cmd = args.command
    if cmd == "plant-step":
        return cmd_plant_step(cfg, out)
    if cmd == "pid":
        return cmd_pid(cfg, out)
    if cmd == "ann-train":
        return cmd_ann_train(cfg, out, model_dir)
    if cmd == "ann-run":
        return cmd_ann_run(cfg, out, model_dir)
    if cmd == "sweep":
        return cmd_sweep(cfg, out)
    return cmd_compare(cfg, out, model_dir)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        sys.stdout.write(DEFAULT_CONFIG)
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("annctl: error: a command is required\n")
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        paths = run(args)
    except AnnctlError as exc:
        sys.stderr.write(f"annctl: error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"annctl: error: {exc}\n")
        return OutputError.exit_code
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
