"""Run configuration: sectioned ``key = value`` text with ``#`` comments.

Every field has a default, so an empty file is a valid configuration.
Values are validated when the component objects are built; errors carry
the ``section.key`` path of the offending field.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controllers import PidGains, PidLimits, ReferenceModel
from .errors import ConfigError, OutputError
from .mrc import ExcitationSpec, ReferenceSpec, WindowSpec
from .nn import TrainConfig
from .plant import MotorParams

DEFAULT_CONFIG = """\
# annctl run configuration. Units are SI (ohm, H, kg*m^2, rad, s, V).

[plant]
r_armature = 1.0
l_armature = 0.5
k_motor = 0.01
j_inertia = 0.01
b_friction = 0.1
load_torque = 0.0

[pid]
kp = 25.0
ki = 17.0
kd = 11.0
# empty = unbounded actuator
u_min =
u_max =
# derivative low-pass time constant, 0 = off
derivative_tau = 0.0

[reference_model]
omega_n = 2.0
zeta = 1.0

[window]
n_r = 2
n_y = 2
n_u = 2

[net]
controller_hidden = 10
plant_hidden = 10
activation_slope = 1.0
# angles enter the networks relative to the latest measurement
increment_form = true

[identification]
epochs = 500
learning_rate = 0.05
batch_mode = sample
holdout = 0.2
# regenerate the excitation when the held-out MSE (rad^2) is above this
mse_threshold = 1e-4
max_retries = 3

[controller]
epochs = 500
learning_rate = 0.05
batch_mode = full
horizon = 50
episodes = 32

[excitation]
amp_min = -20.0
amp_max = 20.0
hold_min = 0.25
hold_max = 1.0
duration = 200.0

[reference]
level_max = 1.0
min_step = 0.25
hold = 5.0
eval_steps = 20

[simulation]
dt = 0.001
control_dt = 0.1
t_end = 10.0
plant_step_voltage = 1.0
pid_setpoint = 1.0

[sweep]
sizes = 5, 10, 15
epochs = 500
seeds = 5

[output]
directory = out
# write every n-th sample of 1 ms trajectories to CSV
csv_every = 10

[seed]
master = 0
"""


@dataclass
class RunConfig:
    plant: MotorParams = field(default_factory=MotorParams)
    pid: PidGains = field(default_factory=PidGains)
    limits: PidLimits = field(default_factory=PidLimits)
    derivative_tau: float = 0.0
    ref_model: ReferenceModel = field(default_factory=ReferenceModel)
    window: WindowSpec = field(default_factory=WindowSpec)
    controller_hidden: int = 10
    plant_hidden: int = 10
    activation_slope: float = 1.0
    increment_form: bool = True
    ident_train: TrainConfig = field(default_factory=lambda: TrainConfig(500, 0.05, "sample"))
    holdout: float = 0.2
    mse_threshold: float = 1e-4
    max_retries: int = 3
    ctrl_train: TrainConfig = field(default_factory=lambda: TrainConfig(500, 0.05, "full"))
    horizon: int = 50
    episodes: int = 32
    excitation: ExcitationSpec = field(default_factory=ExcitationSpec)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    eval_steps: int = 20
    dt: float = 1e-3
    control_dt: float = 0.1
    t_end: float = 10.0
    plant_step_voltage: float = 1.0
    pid_setpoint: float = 1.0
    sweep_sizes: tuple[int, ...] = (5, 10, 15)
    sweep_epochs: int = 500
    sweep_seeds: int = 5
    output_dir: str = "out"
    csv_every: int = 10
    master_seed: int = 0


class _Section:
    def __init__(self, parser, name):
        self.name = name
        self.data = parser[name] if parser.has_section(name) else {}

    def _raw(self, key, default):
        return self.data.get(key, default)

    def float(self, key, default, *, positive=False, minimum=None):
        raw = self._raw(key, None)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}", f"expected a number, got {raw!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{self.name}.{key}", f"must be finite, got {raw!r}")
        if positive and not value > 0:
            raise ConfigError(f"{self.name}.{key}", f"must be > 0, got {raw!r}")
        if minimum is not None and value < minimum:
            raise ConfigError(f"{self.name}.{key}", f"must be >= {minimum}, got {raw!r}")
        return value

    def optional_float(self, key):
        raw = self._raw(key, "")
        if raw is None or not raw.strip():
            return None
        return self.float(key, None)

    def int(self, key, default, minimum=None):
        raw = self._raw(key, None)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}", f"expected an integer, got {raw!r}") from None
        if minimum is not None and value < minimum:
            raise ConfigError(f"{self.name}.{key}", f"must be >= {minimum}, got {raw!r}")
        return value

    def bool(self, key, default):
        raw = self._raw(key, None)
        if raw is None:
            return default
        lowered = raw.strip().lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{self.name}.{key}", f"expected true/false, got {raw!r}")

    def str(self, key, default):
        raw = self._raw(key, None)
        return default if raw is None else raw.strip()

    def int_list(self, key, default):
        raw = self._raw(key, None)
        if raw is None:
            return default
        try:
            values = tuple(int(v) for v in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"{self.name}.{key}", f"expected a list of integers, got {raw!r}") from None
        if not values or any(v < 1 for v in values):
            raise ConfigError(f"{self.name}.{key}", "must be a nonempty list of integers >= 1")
        return values


def _prefixed(section: str, exc: ConfigError) -> ConfigError:
    # Component validators name their own field; re-anchor it at the config section.
    leaf = exc.path.split(".")[-1]
    return ConfigError(f"{section}.{leaf}", str(exc).split(": ", 1)[-1])


def _build(section, factory, **kw):
    try:
        return factory(**kw)
    except ConfigError as exc:
        raise _prefixed(section, exc) from None


KNOWN_SECTIONS = {
    "plant", "pid", "reference_model", "window", "net", "identification", "controller",
    "excitation", "reference", "simulation", "sweep", "output", "seed",
}


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"unparseable config: {exc}") from None
    defaults = configparser.ConfigParser(interpolation=None)
    defaults.read_string(DEFAULT_CONFIG)
    for name in parser.sections():
        if name not in KNOWN_SECTIONS:
            raise ConfigError(name, "unknown section")
        for key in parser[name]:
            if key not in defaults[name]:
                raise ConfigError(f"{name}.{key}", "unknown key")

    d = RunConfig()
    s = _Section(parser, "plant")
    p = d.plant
    plant = _build("plant", MotorParams,
                   r_armature=s.float("r_armature", p.r_armature), l_armature=s.float("l_armature", p.l_armature),
                   k_motor=s.float("k_motor", p.k_motor), j_inertia=s.float("j_inertia", p.j_inertia),
                   b_friction=s.float("b_friction", p.b_friction), load_torque=s.float("load_torque", 0.0))

    s = _Section(parser, "pid")
    pid = _build("pid", PidGains, kp=s.float("kp", d.pid.kp), ki=s.float("ki", d.pid.ki), kd=s.float("kd", d.pid.kd))
    limits = _build("pid", PidLimits, u_min=s.optional_float("u_min"), u_max=s.optional_float("u_max"))
    derivative_tau = s.float("derivative_tau", 0.0, minimum=0.0)

    s = _Section(parser, "reference_model")
    ref_model = _build("reference_model", ReferenceModel,
                       omega_n=s.float("omega_n", d.ref_model.omega_n), zeta=s.float("zeta", d.ref_model.zeta))

    s = _Section(parser, "window")
    window = _build("window", WindowSpec, n_r=s.int("n_r", 2), n_y=s.int("n_y", 2), n_u=s.int("n_u", 2))

    s = _Section(parser, "net")
    controller_hidden = s.int("controller_hidden", d.controller_hidden, minimum=1)
    plant_hidden = s.int("plant_hidden", d.plant_hidden, minimum=1)
    activation_slope = s.float("activation_slope", 1.0, positive=True)
    increment_form = s.bool("increment_form", True)

    s = _Section(parser, "identification")
    ident_train = _build("identification", TrainConfig, epochs=s.int("epochs", 500, minimum=1),
                         learning_rate=s.float("learning_rate", 0.05, positive=True),
                         batch_mode=s.str("batch_mode", "sample"))
    holdout = s.float("holdout", 0.2, positive=True)
    if holdout >= 1:
        raise ConfigError("identification.holdout", "must be < 1")
    mse_threshold = s.float("mse_threshold", 1e-4, positive=True)
    max_retries = s.int("max_retries", 3, minimum=0)

    s = _Section(parser, "controller")
    ctrl_train = _build("controller", TrainConfig, epochs=s.int("epochs", 500, minimum=1),
                        learning_rate=s.float("learning_rate", 0.05, positive=True),
                        batch_mode=s.str("batch_mode", "full"))
    horizon = s.int("horizon", 50, minimum=1)
    episodes = s.int("episodes", 32, minimum=1)

    s = _Section(parser, "excitation")
    e = d.excitation
    excitation = _build("excitation", ExcitationSpec,
                        amp_min=s.float("amp_min", e.amp_min), amp_max=s.float("amp_max", e.amp_max),
                        hold_min=s.float("hold_min", e.hold_min), hold_max=s.float("hold_max", e.hold_max),
                        duration=s.float("duration", e.duration))

    s = _Section(parser, "reference")
    reference = _build("reference", ReferenceSpec, level_max=s.float("level_max", 1.0),
                       min_step=s.float("min_step", 0.25), hold=s.float("hold", 5.0))
    eval_steps = s.int("eval_steps", 20, minimum=1)

    s = _Section(parser, "simulation")
    dt = s.float("dt", 1e-3, positive=True)
    control_dt = s.float("control_dt", 0.1, positive=True)
    t_end = s.float("t_end", 10.0, positive=True)
    if t_end < dt:
        raise ConfigError("simulation.t_end", "must be >= simulation.dt")
    sub = round(control_dt / dt)
    if sub < 1 or abs(sub * dt - control_dt) > 1e-9 * control_dt:
        raise ConfigError("simulation.control_dt", "must be a whole multiple of simulation.dt")
    if reference.hold < 10 * control_dt:
        raise ConfigError("reference.hold", "must span at least 10 control periods")
    plant_step_voltage = s.float("plant_step_voltage", 1.0)
    pid_setpoint = s.float("pid_setpoint", 1.0)

    s = _Section(parser, "sweep")
    sweep_sizes = s.int_list("sizes", (5, 10, 15))
    sweep_epochs = s.int("epochs", 500, minimum=0)
    sweep_seeds = s.int("seeds", 5, minimum=1)

    s = _Section(parser, "output")
    output_dir = s.str("directory", "out")
    csv_every = s.int("csv_every", 10, minimum=1)

    s = _Section(parser, "seed")
    master_seed = s.int("master", 0, minimum=0)

    return RunConfig(plant, pid, limits, derivative_tau, ref_model, window, controller_hidden, plant_hidden,
                     activation_slope, increment_form, ident_train, holdout, mse_threshold, max_retries,
                     ctrl_train, horizon, episodes, excitation, reference, eval_steps, dt, control_dt, t_end,
                     plant_step_voltage, pid_setpoint, sweep_sizes, sweep_epochs, sweep_seeds, output_dir,
                     csv_every, master_seed)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config("")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# Per-stage seeds: entropy (master, stage, attempt) through numpy's SeedSequence.
STAGES = {
    "excitation": 1,
    "plant_init": 2,
    "controller_init": 3,
    "controller_train": 4,
    "evaluation": 5,
}


def stage_seed(master: int, stage: str, attempt: int = 0) -> int:
    ss = np.random.SeedSequence([master, STAGES[stage], attempt])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
