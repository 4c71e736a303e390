"""Continuous-time DC motor model and its fixed-step integrator.

Armature circuit and shaft mechanics::

    v = R*i + L*di/dt + K*omega
    K*i = J*domega/dt + b*omega (+ load torque)

with a single motor constant ``K`` acting both as torque constant and
back-emf constant. The state is ``(current, theta, omega)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigError, DivergenceError


@dataclass(frozen=True)
class MotorParams:
    r_armature: float = 1.0  # ohm
    l_armature: float = 0.5  # H
    k_motor: float = 0.01  # N*m/A == V*s/rad
    j_inertia: float = 0.01  # kg*m^2
    b_friction: float = 0.1  # N*m*s/rad
    load_torque: float = 0.0  # N*m, opposes positive rotation

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ConfigError(f"plant.{f.name}", f"must be finite, got {value!r}")
            if f.name != "load_torque" and value <= 0:
                raise ConfigError(f"plant.{f.name}", f"must be > 0, got {value!r}")

    def steady_state_speed(self, v: float) -> float:
        """Shaft speed reached under a constant voltage (no load torque)."""
        R, K, b = self.r_armature, self.k_motor, self.b_friction
        return K * v / (R * b + K * K)

    @property
    def time_constants(self) -> tuple[float, float]:
        return self.l_armature / self.r_armature, self.j_inertia / self.b_friction


@dataclass(frozen=True)
class PlantState:
    current: float = 0.0
    theta: float = 0.0
    omega: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.current, self.theta, self.omega)


def derivatives(state: PlantState, v: float, params: MotorParams) -> PlantState:
    """Time derivatives ``(di/dt, dtheta/dt, domega/dt)`` packed as a PlantState."""
    di, dth, dw = _rates(state.current, state.omega, v, params)
    return PlantState(di, dth, dw)


def _rates(i, w, v, p):
    di = (v - p.r_armature * i - p.k_motor * w) / p.l_armature
    dw = (p.k_motor * i - p.b_friction * w - p.load_torque) / p.j_inertia
    return di, w, dw


def _rk4(i, th, w, v, p, dt):
    # theta never feeds back into the rates, so only (i, omega) are staged.
    a_i, a_th, a_w = _rates(i, w, v, p)
    h = 0.5 * dt
    b_i, b_th, b_w = _rates(i + h * a_i, w + h * a_w, v, p)
    c_i, c_th, c_w = _rates(i + h * b_i, w + h * b_w, v, p)
    d_i, d_th, d_w = _rates(i + dt * c_i, w + dt * c_w, v, p)
    s = dt / 6.0
    return (
        i + s * (a_i + 2.0 * b_i + 2.0 * c_i + d_i),
        th + s * (a_th + 2.0 * b_th + 2.0 * c_th + d_th),
        w + s * (a_w + 2.0 * b_w + 2.0 * c_w + d_w),
    )


def step_rk4(state: PlantState, v: float, params: MotorParams, dt: float, t: float = 0.0) -> PlantState:
    """Advance one classical RK4 step with ``v`` held constant over the step.

    ``t`` is only used to label a divergence error.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    nxt = _rk4(state.current, state.theta, state.omega, v, params, dt)
    _check_finite(nxt, t + dt)
    return PlantState(*nxt)


def _check_finite(values, t):
    if not all(math.isfinite(x) for x in values):
        raise DivergenceError(f"plant integration diverged at t={t:.6g} s")


class Integrator:
    """Mutable RK4 stepper used inside control loops (avoids dataclass churn)."""

    def __init__(self, params: MotorParams, dt: float, state: PlantState | None = None):
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt!r}")
        self.params = params
        self.dt = dt
        s = state or PlantState()
        self.i, self.theta, self.omega = s.as_tuple()
        self.t = 0.0
        self.steps = 0

    def step(self, v: float, n: int = 1) -> float:
        p, dt = self.params, self.dt
        i, th, w = self.i, self.theta, self.omega
        for _ in range(n):
            i, th, w = _rk4(i, th, w, v, p, dt)
        self.steps += n
        self.t = self.steps * dt
        _check_finite((i, th, w), self.t)
        self.i, self.theta, self.omega = i, th, w
        return th

    @property
    def state(self) -> PlantState:
        return PlantState(self.i, self.theta, self.omega)


def n_steps(t_end: float, dt: float) -> int:
    """Number of whole ``dt`` periods in ``t_end`` (tolerant of float round-off)."""
    return int(math.floor(t_end / dt + 1e-9))


@dataclass
class Trajectory:
    """Uniformly sampled record of one run.

    ``control[k]`` is the voltage applied from ``t[k]`` until ``t[k+1]``.
    ``extra`` holds optional aligned columns (plant states, tracking error...).
    """

    dt: float
    reference: np.ndarray
    control: np.ndarray
    output: np.ndarray
    extra: dict = None

    def __post_init__(self):
        self.reference = np.asarray(self.reference, dtype=float)
        self.control = np.asarray(self.control, dtype=float)
        self.output = np.asarray(self.output, dtype=float)
        if self.extra is None:
            self.extra = {}
        n = len(self.output)
        if n == 0:
            raise ValueError("trajectory must be nonempty")
        if not self.dt > 0:
            raise ValueError("trajectory dt must be > 0")
        for name, col in [("reference", self.reference), ("control", self.control), *self.extra.items()]:
            if len(col) != n:
                raise ValueError(f"column {name!r} has length {len(col)}, expected {n}")

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.output)) * self.dt

    def __len__(self):
        return len(self.output)

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.t, "reference": self.reference, "control": self.control, "output": self.output}
        cols.update(self.extra)
        return cols


Signal = Union[Callable[[int], float], Sequence[float], np.ndarray, float]


def as_signal(sig: Signal) -> Callable[[int], float]:
    """Normalize a signal given as a callable of the sample index, an array, or a constant."""
    if callable(sig):
        return sig
    if np.isscalar(sig):
        c = float(sig)
        return lambda k: c
    arr = np.asarray(sig, dtype=float)

    def lookup(k):
        # Past the end, hold the last value.
        return float(arr[min(k, len(arr) - 1)])

    return lookup


def simulate(params: MotorParams, voltage: Signal, dt: float, t_end: float,
             state: PlantState | None = None) -> Trajectory:
    """Open-loop run from rest (or ``state``) under a sampled voltage signal.

    The returned trajectory holds ``n_steps(t_end, dt) + 1`` samples, the
    first being the initial state at ``t = 0``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    if t_end < dt * (1 - 1e-9):
        raise ValueError(f"t_end must be >= dt ({t_end!r} < {dt!r})")
    n = n_steps(t_end, dt)
    sig = as_signal(voltage)
    u = np.array([sig(k) for k in range(n + 1)], dtype=float)
    out = np.empty((n + 1, 3))
    i, th, w = (state or PlantState()).as_tuple()
    out[0] = (i, th, w)
    p = params
    volts = u.tolist()  # plain floats: overflow becomes inf without warnings
    for k in range(n):
        i, th, w = _rk4(i, th, w, volts[k], p, dt)
        if not (math.isfinite(i) and math.isfinite(th) and math.isfinite(w)):
            raise DivergenceError(f"plant integration diverged at t={(k + 1) * dt:.6g} s")
        out[k + 1] = (i, th, w)
    return Trajectory(
        dt=dt,
        reference=np.zeros(n + 1),
        control=u,
        output=out[:, 1].copy(),
        extra={"current": out[:, 0].copy(), "omega": out[:, 2].copy()},
    )


def transfer_function(params: MotorParams) -> tuple[list[float], list[float]]:
    """theta(s)/V(s) = K / (s*((J s + b)(L s + R) + K^2)), descending powers of s."""
    R, L, K, J, b = (params.r_armature, params.l_armature, params.k_motor,
                     params.j_inertia, params.b_friction)
    return [K], [J * L, J * R + b * L, b * R + K * K, 0.0]
