"""Step-response metrics, PID/ANN comparison and the network-size sweep."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .errors import AnnctlError
from .mrc import MrcSystem, simulate_closed_loop_ann
from .pipeline import evaluation_reference, identify, train_system
from .plant import Trajectory, n_steps

log = logging.getLogger(__name__)

METRIC_KEYS = ("rise_time", "overshoot", "settling_time", "steady_state_error")


@dataclass(frozen=True)
class StepMetrics:
    rise_time: float | None  # s, 10% -> 90%; None if never reached
    overshoot: float  # percent of the step
    settling_time: float | None  # s, +-2% band; None if it never settles
    steady_state_error: float  # rad, mean of the last 10% minus the setpoint

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_KEYS}


def _first_crossing(t, z, level):
    above = np.nonzero(z >= level)[0]
    if len(above) == 0:
        return None
    j = above[0]
    if j == 0:
        return float(t[0])
    # linear interpolation between the bracketing samples
    frac = (level - z[j - 1]) / (z[j] - z[j - 1])
    return float(t[j - 1] + frac * (t[j] - t[j - 1]))


def step_metrics(traj: Trajectory, step_amplitude: float, band: float = 0.02,
                 tail_fraction: float = 0.1) -> StepMetrics:
    """Metrics of a response to a step from 0 to ``step_amplitude`` applied at t = 0."""
    if step_amplitude == 0:
        raise ValueError("step amplitude must be nonzero")
    y = traj.output
    t = traj.t
    z = y / step_amplitude
    t10 = _first_crossing(t, z, 0.1)
    t90 = _first_crossing(t, z, 0.9)
    rise = None if t10 is None or t90 is None else t90 - t10
    overshoot = max(0.0, float(z.max()) - 1.0) * 100.0
    dev = np.abs(z - 1.0)
    outside = np.nonzero(dev > band)[0]
    if len(outside) == 0:
        settling = 0.0
    elif outside[-1] == len(z) - 1:
        settling = None
    else:
        j = outside[-1]
        frac = (dev[j] - band) / (dev[j] - dev[j + 1])
        settling = float(t[j] + frac * (t[j + 1] - t[j]))
    n_tail = max(1, int(math.ceil(tail_fraction * len(y))))
    sse = float(np.mean(y[-n_tail:]) - step_amplitude)
    return StepMetrics(rise, overshoot, settling, sse)


@dataclass
class TrackingSummary:
    mse: float  # vs. reference-model output
    step_errors: np.ndarray  # steady-state error per hold (rad)
    step_sizes: np.ndarray  # level change per hold (rad)

    @property
    def error_ratios(self) -> np.ndarray:
        return np.abs(self.step_errors) / np.abs(self.step_sizes)

    @property
    def worst_ratio(self) -> float:
        return float(self.error_ratios.max())


def tracking_summary(traj: Trajectory, levels: Sequence[float], hold: float,
                     tail_fraction: float = 0.1) -> TrackingSummary:
    """Steady-state errors over each hold of a step sequence that starts at 0."""
    per = n_steps(hold, traj.dt)
    levels = np.asarray(levels, dtype=float)
    n_tail = max(1, int(math.ceil(tail_fraction * per)))
    errs = np.empty(len(levels))
    for j, level in enumerate(levels):
        seg = traj.output[j * per:(j + 1) * per]
        errs[j] = np.mean(seg[-n_tail:]) - level
    sizes = np.diff(np.concatenate([[0.0], levels]))
    err = traj.extra.get("error")
    mse = float(np.mean(err ** 2)) if err is not None else float("nan")
    return TrackingSummary(mse, errs, sizes)


def evaluate_system(system: MrcSystem, cfg: RunConfig) -> tuple[Trajectory, TrackingSummary]:
    r, levels = evaluation_reference(cfg)
    traj = simulate_closed_loop_ann(system, cfg.plant, r, len(r) * cfg.control_dt)
    return traj, tracking_summary(traj, levels, cfg.reference.hold)


@dataclass
class SweepRow:
    hidden_size: int
    epochs: int
    mse: float  # median over seeds; inf counts a divergent run
    per_seed: list[float] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    seeds: list[int]

    def csv_rows(self):
        return [(r.hidden_size, r.epochs, r.mse) for r in self.rows]


def network_size_sweep(cfg: RunConfig, sizes: Sequence[int], epochs: int, seeds: int = 1) -> SweepResult:
    """Closed-loop tracking MSE for each controller hidden size.

    For each seed the plant is identified once and shared by every size.
    All runs are scored on the same held-out reference sequence.
    """
    if not sizes:
        raise ValueError("sizes must be nonempty")
    masters = [cfg.master_seed + i for i in range(seeds)]
    r, levels = evaluation_reference(cfg)
    per_size = {s: [] for s in sizes}
    errors = {s: [] for s in sizes}
    for master in masters:
        ident = identify(cfg, master)
        for size in sizes:
            try:
                system, _ = train_system(cfg, master, controller_hidden=size, controller_epochs=epochs, ident=ident)
                traj = simulate_closed_loop_ann(system, cfg.plant, r, len(r) * cfg.control_dt)
                mse = float(np.mean(traj.extra["error"] ** 2))
            except AnnctlError as exc:
                errors[size].append(f"seed {master}: {exc}")
                mse = math.inf
            log.info("sweep seed %d size %d: mse %.4g", master, size, mse)
            per_size[size].append(mse)
    rows = [SweepRow(s, epochs, float(np.median(per_size[s])), per_size[s], errors[s]) for s in sorted(sizes)]
    return SweepResult(rows, masters)


@dataclass
class Comparison:
    pid: StepMetrics
    ann: StepMetrics
    pid_mse: float
    ann_mse: float
    columns: dict

    def summary_lines(self) -> list[str]:
        lines = []
        for name, m, mse in (("pid", self.pid, self.pid_mse), ("ann", self.ann, self.ann_mse)):
            for k, v in m.as_dict().items():
                lines.append(f"{name}.{k} = {format_metric(v)}")
            lines.append(f"{name}.mse = {mse!r}")
        return lines


def format_metric(v) -> str:
    return "not-reached" if v is None else repr(float(v))


def compare(pid_traj: Trajectory, ann_traj: Trajectory, step_amplitude: float | None = None) -> Comparison:
    """Side-by-side metrics of two runs on the same grid and reference."""
    if pid_traj.dt != ann_traj.dt or len(pid_traj) != len(ann_traj):
        raise ValueError("trajectories must share dt and length")
    if not np.allclose(pid_traj.reference, ann_traj.reference, rtol=0, atol=1e-12):
        raise ValueError("trajectories must share the reference signal")
    amp = float(pid_traj.reference[-1]) if step_amplitude is None else step_amplitude
    cols = {
        "t": pid_traj.t,
        "reference": pid_traj.reference,
        "pid_u": pid_traj.control,
        "pid_y": pid_traj.output,
        "ann_u": ann_traj.control,
        "ann_y": ann_traj.output,
    }
    mse = lambda tr: float(np.mean((tr.reference - tr.output) ** 2))
    return Comparison(step_metrics(pid_traj, amp), step_metrics(ann_traj, amp), mse(pid_traj), mse(ann_traj), cols)
