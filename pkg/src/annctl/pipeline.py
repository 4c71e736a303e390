"""End-to-end ANN workflow: data -> plant identification -> controller training.

Also handles persistence of a trained system as a directory holding two
network files and a flat ``key = value`` manifest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nn
from .config import RunConfig, stage_seed
from .controllers import ReferenceModel
from .errors import AnnctlError, ConfigError
from .mrc import (Affine, IdentResult, MrcSystem, Scaling, WindowSpec, build_system, collect_id_data,
                  generate_excitation, identify_plant, step_sequence, train_controller)
from .nn import TrainConfig

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class PipelineError(AnnctlError):
    """A workflow stage failed; the message starts with the stage name."""

    exit_code = 3


@dataclass
class TrainReport:
    ident_mse: float
    ident_variance: float
    ident_history: list[float]
    controller_history: list[float]
    retries: int
    seeds: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"identification_validation_mse = {self.ident_mse!r}",
            f"identification_validation_variance = {self.ident_variance!r}",
            f"identification_final_train_mse = {self.ident_history[-1]!r}",
            f"regeneration_retries = {self.retries}",
            f"controller_epochs = {len(self.controller_history)}",
            f"controller_initial_loss = {self.controller_history[0]!r}" if self.controller_history else
            "controller_initial_loss = nan",
            f"controller_final_loss = {self.controller_history[-1]!r}" if self.controller_history else
            "controller_final_loss = nan",
        ]
        lines += [f"seed_{k} = {v}" for k, v in sorted(self.seeds.items())]
        lines.append("controller_loss_history = " + " ".join(repr(v) for v in self.controller_history))
        return "\n".join(lines) + "\n"


def u_bound(cfg: RunConfig) -> float:
    return max(abs(cfg.excitation.amp_min), abs(cfg.excitation.amp_max))


def identify(cfg: RunConfig, master: int) -> tuple[IdentResult, int, dict]:
    """Plant identification with the regeneration rule.

    When the held-out MSE exceeds ``cfg.mse_threshold`` the excitation is
    regenerated from the next derived seed, at most ``cfg.max_retries`` times.
    """
    last = None
    for attempt in range(cfg.max_retries + 1):
        exc_seed = stage_seed(master, "excitation", attempt)
        init_seed = stage_seed(master, "plant_init", attempt)
        signal = generate_excitation(replace(cfg.excitation, rng_seed=exc_seed))
        data = collect_id_data(cfg.plant, signal, cfg.control_dt, cfg.excitation.duration, cfg.dt)
        train_cfg = replace(cfg.ident_train, rng_seed=init_seed)
        try:
            res = identify_plant(data, cfg.window, cfg.plant_hidden, train_cfg, cfg.activation_slope,
                                 cfg.increment_form, u_bound(cfg), cfg.holdout)
        except AnnctlError as exc:
            raise PipelineError(f"identification: {exc}") from None
        log.info("identification attempt %d: held-out mse %.3g", attempt, res.validation_mse)
        last = res
        if res.validation_mse <= cfg.mse_threshold:
            return res, attempt, {"excitation": exc_seed, "plant_init": init_seed}
    raise PipelineError(f"identification: held-out mse {last.validation_mse:.3g} above threshold "
                        f"{cfg.mse_threshold:g} after {cfg.max_retries} regenerations")


def train_system(cfg: RunConfig, master: int | None = None, controller_hidden: int | None = None,
                 controller_epochs: int | None = None,
                 ident: tuple[IdentResult, int, dict] | None = None) -> tuple[MrcSystem, TrainReport]:
    """Run the full training workflow; ``ident`` reuses a previous identification."""
    master = cfg.master_seed if master is None else master
    hidden = cfg.controller_hidden if controller_hidden is None else controller_hidden
    ident_res, retries, seeds = ident if ident is not None else identify(cfg, master)
    seeds = dict(seeds)
    seeds["controller_init"] = stage_seed(master, "controller_init")
    seeds["controller_train"] = stage_seed(master, "controller_train")
    system = build_system(ident_res, cfg.window, hidden, cfg.ref_model, cfg.control_dt, u_bound(cfg),
                          cfg.reference, seeds["controller_init"], cfg.activation_slope, cfg.increment_form,
                          cfg.dt)
    ctrl_cfg = replace(cfg.ctrl_train, rng_seed=seeds["controller_train"])
    if controller_epochs is not None:
        ctrl_cfg = replace(ctrl_cfg, epochs=controller_epochs)
    try:
        res = train_controller(system, ctrl_cfg, cfg.horizon, cfg.episodes, cfg.reference)
    except AnnctlError as exc:
        raise PipelineError(f"controller training: {exc}") from None
    system = replace(system, controller=res.net)
    report = TrainReport(ident_res.validation_mse, ident_res.validation_variance, ident_res.history,
                         res.mse_history, retries, seeds)
    return system, report


def evaluation_reference(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    """Held-out step sequence on the control grid, fixed by the master seed."""
    return step_sequence(cfg.reference, cfg.eval_steps, cfg.control_dt, stage_seed(cfg.master_seed, "evaluation"))


# --------------------------------------------------------------------------
# Persistence

CONTROLLER_FILE = "controller.net"
PLANT_FILE = "plant_model.net"
MANIFEST_FILE = "manifest.txt"


def _vec(a) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(a))


def _unvec(s: str) -> np.ndarray:
    return np.array([float(v) for v in s.split()])


def save_system(system: MrcSystem, directory: str | Path, seeds: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nn.save(system.controller, d / CONTROLLER_FILE)
    nn.save(system.plant_model, d / PLANT_FILE)
    sc = system.scaling
    entries = {
        "format": f"annctl-system {MANIFEST_VERSION}",
        "controller_file": CONTROLLER_FILE,
        "plant_model_file": PLANT_FILE,
        "window.n_r": system.window.n_r,
        "window.n_y": system.window.n_y,
        "window.n_u": system.window.n_u,
        "control_dt": repr(system.dt),
        "sim_dt": repr(system.sim_dt),
        "increment_form": str(system.relative).lower(),
        "reference_model.omega_n": repr(system.ref_model.omega_n),
        "reference_model.zeta": repr(system.ref_model.zeta),
        "scaling.controller_in.offset": _vec(sc.controller_in.offset),
        "scaling.controller_in.scale": _vec(sc.controller_in.scale),
        "scaling.controller_out.offset": _vec(sc.controller_out.offset),
        "scaling.controller_out.scale": _vec(sc.controller_out.scale),
        "scaling.plant_in.offset": _vec(sc.plant_in.offset),
        "scaling.plant_in.scale": _vec(sc.plant_in.scale),
        "scaling.plant_out.offset": _vec(sc.plant_out.offset),
        "scaling.plant_out.scale": _vec(sc.plant_out.scale),
    }
    for k, v in sorted((seeds or {}).items()):
        entries[f"seed.{k}"] = v
    (d / MANIFEST_FILE).write_text("".join(f"{k} = {v}\n" for k, v in entries.items()))
    return d


def load_system(directory: str | Path) -> MrcSystem:
    d = Path(directory)
    text = (d / MANIFEST_FILE).read_text()
    m = {}
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            key, _, value = line.partition("=")
            m[key.strip()] = value.strip()
    if m.get("format") != f"annctl-system {MANIFEST_VERSION}":
        raise ConfigError("manifest.format", f"unsupported system manifest {m.get('format')!r}")
    try:
        aff = lambda name: Affine(_unvec(m[f"scaling.{name}.offset"]), _unvec(m[f"scaling.{name}.scale"]))
        scaling = Scaling(aff("controller_in"), aff("controller_out"), aff("plant_in"), aff("plant_out"))
        window = WindowSpec(int(m["window.n_r"]), int(m["window.n_y"]), int(m["window.n_u"]))
        ref = ReferenceModel(float(m["reference_model.omega_n"]), float(m["reference_model.zeta"]))
        return MrcSystem(nn.load(d / m["controller_file"]), nn.load(d / m["plant_model_file"]), window, ref,
                         float(m["control_dt"]), scaling, m["increment_form"] == "true", float(m["sim_dt"]))
    except KeyError as exc:
        raise ConfigError(f"manifest.{exc.args[0]}", "missing entry") from None
