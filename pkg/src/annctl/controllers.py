"""Discrete PID position controller and the second-order reference model."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .plant import Integrator, MotorParams, Signal, Trajectory, as_signal, n_steps


@dataclass(frozen=True)
class PidGains:
    kp: float = 25.0
    ki: float = 17.0
    kd: float = 11.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"pid.{name}", f"must be finite and >= 0, got {value!r}")

    def scaled(self, alpha: float) -> "PidGains":
        return PidGains(self.kp * alpha, self.ki * alpha, self.kd * alpha)


@dataclass(frozen=True)
class PidLimits:
    u_min: float | None = None
    u_max: float | None = None
    anti_windup: bool = True

    def __post_init__(self):
        if self.u_min is not None and self.u_max is not None and not self.u_min < self.u_max:
            raise ConfigError("pid.u_min", f"must be < u_max ({self.u_min!r} >= {self.u_max!r})")

    def clamp(self, u: float) -> float:
        if self.u_max is not None and u > self.u_max:
            return self.u_max
        if self.u_min is not None and u < self.u_min:
            return self.u_min
        return u


NO_LIMITS = PidLimits()


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    # Filtered derivative; only used when a derivative filter is configured.
    derivative: float = 0.0


def pid_step(gains: PidGains, state: PidState, setpoint: float, measurement: float, dt: float,
             limits: PidLimits = NO_LIMITS, derivative_tau: float = 0.0) -> tuple[float, PidState]:
    """One sample of the parallel-form discrete PID law.

    Backward-Euler integral, backward-difference derivative on the error.
    With ``derivative_tau > 0`` the derivative passes through a first-order
    low-pass with that time constant. Anti-windup is conditional
    integration: while the unclamped output is beyond a limit and the error
    pushes it further out, the integral is frozen.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    e = setpoint - measurement
    integral = state.integral + e * dt
    raw_d = (e - state.prev_error) / dt
    if derivative_tau > 0:
        alpha = dt / (derivative_tau + dt)
        d = state.derivative + alpha * (raw_d - state.derivative)
    else:
        d = raw_d
    u_raw = gains.kp * e + gains.ki * integral + gains.kd * d
    pushing_out = (limits.u_max is not None and u_raw > limits.u_max and e > 0) or (
        limits.u_min is not None and u_raw < limits.u_min and e < 0)
    if limits.anti_windup and pushing_out:
        integral = state.integral
        u_raw = gains.kp * e + gains.ki * integral + gains.kd * d
    return limits.clamp(u_raw), PidState(integral, e, d)


def closed_loop_pid(params: MotorParams, gains: PidGains, setpoint: Signal, dt: float, t_end: float,
                    limits: PidLimits = NO_LIMITS, derivative_tau: float = 0.0) -> Trajectory:
    """Unity negative-feedback loop: PID on ``r - theta`` driving the motor.

    Controller and plant share the sample grid; the voltage computed at
    sample k is held over the following integration step.
    """
    n = n_steps(t_end, dt)
    r_sig = as_signal(setpoint)
    plant = Integrator(params, dt)
    st = PidState()
    ref = np.empty(n + 1)
    u = np.empty(n + 1)
    y = np.empty(n + 1)
    integ = np.empty(n + 1)
    for k in range(n + 1):
        r = r_sig(k)
        y[k] = plant.theta
        ref[k] = r
        u[k], st = pid_step(gains, st, r, y[k], dt, limits, derivative_tau)
        integ[k] = st.integral
        if k < n:
            plant.step(u[k])
    return Trajectory(dt, ref, u, y, extra={"error": ref - y, "integral": integ})


@dataclass(frozen=True)
class ReferenceModel:
    """Unit-DC-gain second-order system ``y'' = wn^2 (r - y) - 2 zeta wn y'``."""

    omega_n: float = 2.0
    zeta: float = 1.0
    y: float = 0.0
    dy: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.omega_n) and self.omega_n > 0):
            raise ConfigError("reference_model.omega_n", f"must be > 0, got {self.omega_n!r}")
        if not (math.isfinite(self.zeta) and self.zeta > 0):
            raise ConfigError("reference_model.zeta", f"must be > 0, got {self.zeta!r}")

    def at_rest(self, y0: float = 0.0) -> "ReferenceModel":
        return replace(self, y=y0, dy=0.0)


def _ref_rates(y, dy, r, wn2, c):
    return dy, wn2 * (r - y) - c * dy


def ref_model_step(model: ReferenceModel, r: float, dt: float) -> tuple[float, ReferenceModel]:
    """RK4 advance of the reference model by ``dt`` with ``r`` held; returns the new output."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    wn2 = model.omega_n ** 2
    c = 2.0 * model.zeta * model.omega_n
    y, dy = model.y, model.dy
    k1 = _ref_rates(y, dy, r, wn2, c)
    k2 = _ref_rates(y + 0.5 * dt * k1[0], dy + 0.5 * dt * k1[1], r, wn2, c)
    k3 = _ref_rates(y + 0.5 * dt * k2[0], dy + 0.5 * dt * k2[1], r, wn2, c)
    k4 = _ref_rates(y + dt * k3[0], dy + dt * k3[1], r, wn2, c)
    y += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    dy += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return y, replace(model, y=y, dy=dy)


def ref_model_response(model: ReferenceModel, reference, dt: float, substeps: int = 1) -> np.ndarray:
    """Reference-model output sampled on the same grid as ``reference``.

    ``out[k]`` is the state at sample k; ``reference[k]`` is held from sample
    k to k+1. ``substeps`` subdivides each period for integration accuracy.
    """
    r = np.asarray(reference, dtype=float)
    out = np.empty(len(r))
    m = model
    h = dt / substeps
    for k in range(len(r)):
        out[k] = m.y
        for _ in range(substeps):
            _, m = ref_model_step(m, r[k], h)
    return out
