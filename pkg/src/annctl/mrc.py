"""Two-unit neural control scheme: an NN plant model and an NN controller.

Pipeline:

1. drive the motor open loop with a random staircase voltage and record
   ``(u[k], y[k])`` at the control period;
2. fit the plant model, a one-step-ahead predictor on tapped-delay windows;
3. freeze the plant model and train the controller by backpropagation
   through time so the unrolled (controller -> plant model) loop follows a
   second-order reference model;
4. run the trained controller against the true motor.

Angle signals enter the networks either raw or, by default, in increment
form: reference samples relative to the newest measured angle, outputs as
successive differences, and the plant model predicting the next increment.
The motor equations never involve the absolute angle, so increment form
makes both networks independent of where the shaft happens to be.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import nn
from .controllers import ReferenceModel, ref_model_response
from .errors import ConfigError, DivergenceError, InsufficientDataError
from .nn import Mlp, TrainConfig, TrainResult
from .plant import Integrator, MotorParams, Signal, Trajectory, as_signal, n_steps, simulate


@dataclass(frozen=True)
class WindowSpec:
    n_r: int = 2
    n_y: int = 2
    n_u: int = 2

    def __post_init__(self):
        for name in ("n_r", "n_y", "n_u"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"window.{name}", f"must be an integer >= 1, got {v!r}")

    @property
    def controller_inputs(self) -> int:
        return self.n_r + self.n_y

    @property
    def plant_inputs(self) -> int:
        return self.n_u + self.n_y

    @property
    def max_lag(self) -> int:
        return max(self.n_r, self.n_y + 1, self.n_u)


# --------------------------------------------------------------------------
# Excitation


@dataclass(frozen=True)
class ExcitationSpec:
    amp_min: float = -20.0
    amp_max: float = 20.0
    hold_min: float = 0.25
    hold_max: float = 1.0
    duration: float = 200.0
    rng_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.amp_min) and math.isfinite(self.amp_max) and self.amp_min <= self.amp_max):
            raise ConfigError("excitation.amp_min", "amplitude range must be finite with amp_min <= amp_max")
        if not (0 < self.hold_min <= self.hold_max):
            raise ConfigError("excitation.hold_min", "hold range must satisfy 0 < hold_min <= hold_max")
        if not self.duration >= 50 * self.hold_max:
            raise ConfigError("excitation.duration", f"must cover at least 50 holds "
                                                     f"(>= {50 * self.hold_max:g} s)")


@dataclass(frozen=True)
class StepSignal:
    """Piecewise-constant signal: ``levels[j]`` holds on ``[starts[j], starts[j+1])``."""

    starts: np.ndarray
    levels: np.ndarray

    def __call__(self, t: float) -> float:
        j = int(np.searchsorted(self.starts, t + 1e-12, side="right")) - 1
        return float(self.levels[max(j, 0)])

    def sample(self, dt: float, n: int) -> np.ndarray:
        t = np.arange(n) * dt
        j = np.searchsorted(self.starts, t + 1e-12, side="right") - 1
        return self.levels[np.maximum(j, 0)].astype(float)

    @property
    def end(self) -> float:
        return float(self.starts[-1])


def generate_excitation(spec: ExcitationSpec) -> StepSignal:
    """Random staircase: uniform levels, uniform hold times, seeded.

    The last entry of ``starts`` marks the end of the final hold.
    """
    rng = np.random.default_rng(spec.rng_seed)
    starts, levels = [0.0], []
    while starts[-1] < spec.duration:
        levels.append(rng.uniform(spec.amp_min, spec.amp_max))
        starts.append(starts[-1] + rng.uniform(spec.hold_min, spec.hold_max))
    levels.append(levels[-1])
    return StepSignal(np.array(starts), np.array(levels))


# --------------------------------------------------------------------------
# Identification data


@dataclass
class IdDataset:
    dt: float
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.u.shape != self.y.shape or self.u.ndim != 1:
            raise ValueError("u and y must be 1-D and equally long")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.y))):
            raise ValueError("identification data contains non-finite values")

    def __len__(self):
        return len(self.u)


def collect_id_data(params: MotorParams, signal, dt: float, t_end: float, sim_dt: float = 1e-3) -> IdDataset:
    """Open-loop run sampled every ``dt``; ``y[k+1]`` follows ``u[k]``.

    ``signal`` is a StepSignal (a function of time) or anything accepted as
    a signal of the sample index. Integration uses ``sim_dt`` substeps with
    the sampled voltage held over each period.
    """
    n = n_steps(t_end, dt)
    sub = substeps_for(dt, sim_dt)
    if isinstance(signal, StepSignal):
        u = signal.sample(dt, n)
    else:
        sig = as_signal(signal)
        u = np.array([sig(k) for k in range(n)], dtype=float)
    fine = simulate(params, np.repeat(u, sub), dt / sub, n * dt)
    y = fine.output[::sub][:n]
    return IdDataset(dt, u, y.copy())


def substeps_for(dt: float, sim_dt: float) -> int:
    sub = max(1, int(round(dt / sim_dt)))
    if abs(sub * sim_dt - dt) > 1e-9 * dt:
        raise ConfigError("mrc.control_dt", f"control period {dt!r} must be a multiple of sim dt {sim_dt!r}")
    return sub


# --------------------------------------------------------------------------
# Tapped-delay features
#
# Each network input is a linear combination of lagged samples of the
# signals r, y, u: a list of (signal, lag, coefficient) terms, lag counted
# back from the current control sample k.

Term = tuple[str, int, float]


def controller_terms(window: WindowSpec, relative: bool) -> list[list[Term]]:
    if relative:
        terms = [[("r", j, 1.0), ("y", 0, -1.0)] for j in range(window.n_r)]
        terms += [[("y", j, 1.0), ("y", j + 1, -1.0)] for j in range(window.n_y)]
    else:
        terms = [[("r", j, 1.0)] for j in range(window.n_r)]
        terms += [[("y", j, 1.0)] for j in range(window.n_y)]
    return terms


def plant_terms(window: WindowSpec, relative: bool) -> list[list[Term]]:
    terms = [[("u", j, 1.0)] for j in range(window.n_u)]
    if relative:
        terms += [[("y", j, 1.0), ("y", j + 1, -1.0)] for j in range(window.n_y)]
    else:
        terms += [[("y", j, 1.0)] for j in range(window.n_y)]
    return terms


def _eval_terms(terms: list[list[Term]], sig: dict, k: int) -> np.ndarray:
    # sig values are (..., time) arrays; k indexes the last axis.
    return np.stack([sum(c * sig[s][..., k - lag] for s, lag, c in feat) for feat in terms], axis=-1)


@dataclass
class Affine:
    """Elementwise map ``scaled = (x - offset) / scale``."""

    offset: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Affine":
        """Map the observed range of each column onto [-1, 1]."""
        x = np.atleast_2d(x)
        lo, hi = x.min(axis=0), x.max(axis=0)
        half = (hi - lo) / 2.0
        half = np.where(half > 0, half, 1.0)
        return cls((hi + lo) / 2.0, half)

    @classmethod
    def symmetric(cls, bound) -> "Affine":
        bound = np.atleast_1d(np.asarray(bound, dtype=float))
        return cls(np.zeros_like(bound), np.where(bound > 0, bound, 1.0))

    def __call__(self, x):
        return (x - self.offset) / self.scale

    def inverse(self, z):
        return z * self.scale + self.offset


@dataclass
class Scaling:
    controller_in: Affine
    controller_out: Affine
    plant_in: Affine
    plant_out: Affine


# --------------------------------------------------------------------------
# System


@dataclass
class MrcSystem:
    controller: Mlp
    plant_model: Mlp
    window: WindowSpec
    ref_model: ReferenceModel
    dt: float
    scaling: Scaling
    relative: bool = True
    sim_dt: float = 1e-3

    def __post_init__(self):
        if self.controller.n_inputs != self.window.controller_inputs or self.controller.n_outputs != 1:
            raise ConfigError("mrc.controller", f"controller sizes {self.controller.sizes} do not match "
                                                f"window ({self.window.controller_inputs} inputs, 1 output)")
        if self.plant_model.n_inputs != self.window.plant_inputs or self.plant_model.n_outputs != 1:
            raise ConfigError("mrc.plant_model", f"plant model sizes {self.plant_model.sizes} do not match "
                                                 f"window ({self.window.plant_inputs} inputs, 1 output)")

    @property
    def c_terms(self):
        return controller_terms(self.window, self.relative)

    @property
    def p_terms(self):
        return plant_terms(self.window, self.relative)

    def control(self, r_hist, y_hist, k) -> np.ndarray:
        """Controller voltage at sample k from signal histories indexed by sample."""
        x = _eval_terms(self.c_terms, {"r": r_hist, "y": y_hist}, k)
        return self.scaling.controller_out.inverse(self.controller(self.scaling.controller_in(x)))[..., 0]

    def predict(self, u_hist, y_hist, k) -> np.ndarray:
        """Plant-model estimate of y[k+1]."""
        x = _eval_terms(self.p_terms, {"u": u_hist, "y": y_hist}, k)
        out = self.scaling.plant_out.inverse(self.plant_model(self.scaling.plant_in(x)))[..., 0]
        return y_hist[..., k] + out if self.relative else out


# --------------------------------------------------------------------------
# Plant identification


@dataclass
class IdentResult:
    net: Mlp
    plant_in: Affine
    plant_out: Affine
    history: list[float]
    validation_mse: float  # rad^2, one step ahead on the held-out tail
    validation_variance: float  # variance of y over the held-out tail


def plant_regression(data: IdDataset, window: WindowSpec, relative: bool = True):
    """Regressor matrix and one-step targets for every valid window.

    Returns ``(X, next_y, base, ks)``: the model must predict
    ``next_y - base`` where ``base`` is ``y[k]`` in increment form and 0
    otherwise. ``ks`` lists the sample index k of each row.
    """
    lag = window.max_lag
    ks = np.arange(lag, len(data) - 1)
    if len(ks) < 10:
        raise InsufficientDataError(f"need more than {lag + 11} samples for window {window}, got {len(data)}")
    sig = {"u": data.u, "y": data.y}
    X = np.stack([_eval_terms(plant_terms(window, relative), sig, k) for k in ks])
    next_y = data.y[ks + 1]
    base = data.y[ks] if relative else np.zeros(len(ks))
    return X, next_y, base, ks


def identify_plant(data: IdDataset, window: WindowSpec, hidden: int | Sequence[int], cfg: TrainConfig,
                   activation_slope: float = 1.0, relative: bool = True, u_bound: float | None = None,
                   holdout: float = 0.2, pin_rest: bool = True) -> IdentResult:
    """Fit the one-step-ahead plant model on the first 80% of the windows.

    Scaling maps are fitted on the training part; ``u_bound`` pins the
    voltage scaling to a symmetric bound shared with the controller output.
    With ``pin_rest`` (increment form only) the output bias is shifted
    after training so a resting motor with zero voltage stays at rest.
    """
    X, next_y, base, _ = plant_regression(data, window, relative)
    n_train = int(round(len(X) * (1.0 - holdout)))
    if n_train < 1 or n_train >= len(X):
        raise InsufficientDataError("holdout split leaves an empty part")
    target = (next_y - base)[:, None]
    p_in = Affine.fit(X[:n_train])
    if u_bound is not None:
        p_in.offset[:window.n_u] = 0.0
        p_in.scale[:window.n_u] = u_bound
    p_out = Affine.fit(target[:n_train])
    if relative:
        # Keep zero increment at zero so a resting plant stays at rest.
        p_out = Affine.symmetric(np.abs(target[:n_train]).max(axis=0))
    hidden = [hidden] if isinstance(hidden, int) else list(hidden)
    init_seq, shuffle_seq = np.random.SeedSequence(cfg.rng_seed).spawn(2)
    net = nn.init_mlp([window.plant_inputs, *hidden, 1], np.random.default_rng(init_seq), activation_slope)
    ds = nn.Dataset(p_in(X[:n_train]), p_out(target[:n_train]))
    shuffle_seed = int(shuffle_seq.generate_state(1, dtype=np.uint32)[0])
    res = nn.train(net, ds, replace(cfg, rng_seed=shuffle_seed))
    if relative and pin_rest:
        # Zero voltage and zero motion must predict zero increment exactly.
        res.net.layers[-1].biases -= res.net(p_in(np.zeros(X.shape[1])))
    pred = p_out.inverse(res.net(p_in(X[n_train:])))[:, 0] + base[n_train:]
    val_mse = nn.mse(pred, next_y[n_train:])
    return IdentResult(res.net, p_in, p_out, res.mse_history, val_mse, float(np.var(next_y[n_train:])))


def rollout_plant_model(system: MrcSystem, u: np.ndarray, y_init: np.ndarray) -> np.ndarray:
    """Free-run the plant model from measured initial samples.

    ``y_init`` seeds the first ``window.max_lag`` outputs; from there on the
    model consumes its own predictions. Returns y for every sample of ``u``.
    """
    lag = system.window.max_lag
    y = np.zeros(len(u))
    y[:lag] = y_init[:lag]
    for k in range(lag - 1, len(u) - 1):
        y[k + 1] = system.predict(u, y, k)
    return y


# --------------------------------------------------------------------------
# Reference episodes


@dataclass(frozen=True)
class ReferenceSpec:
    """Distribution of reference step sequences (training and evaluation)."""

    level_max: float = 1.0  # levels in [-level_max, level_max] rad
    min_step: float = 0.25  # rad, smallest level change
    hold: float = 5.0  # s per level

    def __post_init__(self):
        if not self.level_max > 0:
            raise ConfigError("reference.level_max", "must be > 0")
        if not 0 < self.min_step <= self.level_max:
            raise ConfigError("reference.min_step", "must satisfy 0 < min_step <= level_max")
        if not self.hold > 0:
            raise ConfigError("reference.hold", "must be > 0")

    def levels(self, n: int, rng: np.random.Generator, start: float = 0.0) -> np.ndarray:
        out, prev = [], start
        while len(out) < n:
            v = rng.uniform(-self.level_max, self.level_max)
            if abs(v - prev) >= self.min_step:
                out.append(v)
                prev = v
        return np.array(out)


def step_sequence(spec: ReferenceSpec, n_steps_: int, dt: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Reference sampled every ``dt`` holding ``n_steps_`` random levels.

    Returns ``(r, levels)``; the plant is assumed to start at rest at 0.
    """
    levels = spec.levels(n_steps_, np.random.default_rng(seed))
    per = n_steps(spec.hold, dt)
    return np.repeat(levels, per), levels


@dataclass
class Episodes:
    r: np.ndarray  # (B, lag + H) reference, history included
    y0: np.ndarray  # (B,) resting output before the episode
    y_ref: np.ndarray  # (B, H + 1) reference-model output, y_ref[:, 0] == y0
    lag: int

    @property
    def horizon(self) -> int:
        return self.y_ref.shape[1] - 1


def make_episodes(system: MrcSystem, spec: ReferenceSpec, horizon: int, count: int, seed) -> Episodes:
    """Single-step episodes starting at rest on a level and jumping to another."""
    rng = np.random.default_rng(seed)
    lag = system.window.max_lag
    r = np.empty((count, lag + horizon))
    y0 = np.empty(count)
    sub = substeps_for(system.dt, system.sim_dt)
    y_ref = np.empty((count, horizon + 1))
    for b in range(count):
        start = rng.uniform(-spec.level_max, spec.level_max)
        target = spec.levels(1, rng, start)[0]
        y0[b] = start
        r[b, :lag] = start
        r[b, lag:] = target
        rm = system.ref_model.at_rest(start)
        y_ref[b] = ref_model_response(rm, np.full(horizon + 1, target), system.dt, sub)
    return Episodes(r, y0, y_ref, lag)


# --------------------------------------------------------------------------
# Backpropagation through time


def episode_loss(system: MrcSystem, ep: Episodes, with_grad: bool = True):
    """Mean over episodes and steps of ``(y_ref - y_hat)^2`` for the unrolled loop.

    The controller drives the frozen plant model for ``ep.horizon`` steps.
    Returns ``(loss, grads)`` where ``grads`` is the controller gradient as
    a list of layers (or None without ``with_grad``).
    """
    ctrl, plant, sc = system.controller, system.plant_model, system.scaling
    c_terms, p_terms = system.c_terms, system.p_terms
    B, H, L = len(ep.y0), ep.horizon, ep.lag
    sig = {
        "r": ep.r,
        "y": np.repeat(ep.y0[:, None], L + H + 1, axis=1),
        "u": np.zeros((B, L + H)),
    }
    c_cache, p_cache = [], []
    for k in range(H):
        p = L + k
        xc = sc.controller_in(_eval_terms(c_terms, sig, p))
        oc, ac = nn.forward(ctrl, xc)
        sig["u"][:, p] = sc.controller_out.inverse(oc)[:, 0]
        xp = sc.plant_in(_eval_terms(p_terms, sig, p))
        op, ap = nn.forward(plant, xp)
        step = sc.plant_out.inverse(op)[:, 0]
        sig["y"][:, p + 1] = sig["y"][:, p] + step if system.relative else step
        c_cache.append(ac)
        p_cache.append(ap)
    y_hat = sig["y"][:, L:L + H + 1]
    resid = y_hat[:, 1:] - ep.y_ref[:, 1:]
    loss = float(np.mean(resid ** 2))
    if not math.isfinite(loss):
        raise DivergenceError("non-finite episode loss")
    if not with_grad:
        return loss, None

    gy = np.zeros_like(sig["y"])
    gu = np.zeros_like(sig["u"])
    gy[:, L + 1:L + H + 1] = 2.0 * resid / resid.size
    grads = [nn.Layer(np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in ctrl.layers]
    g_sink = {"y": gy, "u": gu}
    for k in range(H - 1, -1, -1):
        p = L + k
        # plant model: y[p+1] = (y[p] +) unscale(P(scale(x_p)))
        g_next = gy[:, p + 1]
        if system.relative:
            gy[:, p] += g_next
        d_out = (g_next * sc.plant_out.scale[0])[:, None]
        _, gx = nn.backward(plant, p_cache[k], d_out)
        gx = gx / sc.plant_in.scale
        for f, feat in enumerate(p_terms):
            for s, lag, c in feat:
                g_sink[s][:, p - lag] += c * gx[:, f]
        # controller: u[p] = unscale(C(scale(x_c)))
        d_u = (gu[:, p] * sc.controller_out.scale[0])[:, None]
        g_c, gx = nn.backward(ctrl, c_cache[k], d_u)
        for acc, g in zip(grads, g_c):
            acc.weights += g.weights
            acc.biases += g.biases
        gx = gx / sc.controller_in.scale
        for f, feat in enumerate(c_terms):
            for s, lag, c in feat:
                if s == "y":
                    gy[:, p - lag] += c * gx[:, f]
    return loss, grads


def train_controller(system: MrcSystem, cfg: TrainConfig, horizon: int, episodes: int,
                     spec: ReferenceSpec = ReferenceSpec(), pin_rest: bool = True) -> TrainResult:
    """Gradient descent on the controller through the frozen plant model.

    A fixed set of ``episodes`` reference steps is drawn from
    ``cfg.rng_seed``. Full-batch mode updates once per epoch on the whole
    set; per-sample mode updates per episode in a shuffled order.
    ``system`` is not modified; the trained controller is returned.
    With ``pin_rest`` (increment form only) the output bias is shifted after
    training so zero tracking error and zero motion give exactly zero volts.
    """
    if horizon < 1:
        raise ConfigError("controller.horizon", "must be >= 1")
    if episodes < 1:
        raise ConfigError("controller.episodes", "must be >= 1")
    ss = np.random.SeedSequence(cfg.rng_seed)
    ep_seed, shuffle_seed = ss.spawn(2)
    sys_ = replace(system, controller=system.controller.copy())
    ep = make_episodes(sys_, spec, horizon, episodes, ep_seed)
    rng = np.random.default_rng(shuffle_seed)
    history = []
    for epoch in range(cfg.epochs):
        try:
            if cfg.batch_mode == "full":
                _, grads = episode_loss(sys_, ep)
                _step(sys_.controller, grads, cfg.learning_rate)
            else:
                for b in rng.permutation(episodes):
                    one = Episodes(ep.r[b:b + 1], ep.y0[b:b + 1], ep.y_ref[b:b + 1], ep.lag)
                    _, grads = episode_loss(sys_, one)
                    _step(sys_.controller, grads, cfg.learning_rate)
            loss, _ = episode_loss(sys_, ep, with_grad=False)
            if not all(np.all(np.isfinite(l.weights)) for l in sys_.controller.layers):
                raise DivergenceError("non-finite controller parameters")
        except DivergenceError as exc:
            raise DivergenceError(f"controller training diverged at epoch {epoch + 1} "
                                  f"(learning_rate={cfg.learning_rate:g}): {exc}; "
                                  f"try a smaller learning rate") from None
        history.append(loss)
    ctrl = sys_.controller
    if system.relative and pin_rest:
        ctrl.layers[-1].biases -= ctrl(system.scaling.controller_in(np.zeros(ctrl.n_inputs)))
    return TrainResult(ctrl, history)


def _step(net: Mlp, grads, lr):
    for layer, g in zip(net.layers, grads):
        layer.weights -= lr * g.weights
        layer.biases -= lr * g.biases


# --------------------------------------------------------------------------
# Closed loop with the true motor


def simulate_closed_loop_ann(system: MrcSystem, params: MotorParams, reference: Signal,
                             t_end: float) -> Trajectory:
    """Trained controller driving the real motor, sampled at ``system.sim_dt``.

    The controller runs every ``system.dt`` on the measured shaft angle and
    the reference (a signal of the control-sample index); its voltage is
    held in between. Starts at rest with zero history. The trajectory holds
    the tracking error against the reference model in ``extra['error']``
    and the model output in ``extra['y_ref']``.
    """
    dt = system.dt
    sub = substeps_for(dt, system.sim_dt)
    n_ctrl = n_steps(t_end, dt)
    r_sig = as_signal(reference)
    lag = system.window.max_lag
    r_hist = np.zeros(lag + n_ctrl + 1)
    y_hist = np.zeros(lag + n_ctrl + 1)
    plant = Integrator(params, system.sim_dt)
    n_fine = n_ctrl * sub + 1
    ref = np.empty(n_fine)
    u = np.empty(n_fine)
    y = np.empty(n_fine)
    y[0] = 0.0
    for k in range(n_ctrl + 1):
        p = lag + k
        r_hist[p] = r_sig(k)
        y_hist[p] = plant.theta
        uk = float(system.control(r_hist, y_hist, p))
        if not math.isfinite(uk):
            raise DivergenceError(f"controller output non-finite at t={k * dt:.6g} s")
        lo, hi = k * sub, min((k + 1) * sub, n_fine)
        ref[lo:hi] = r_hist[p]
        u[lo:hi] = uk
        if k == n_ctrl:
            break
        for j in range(lo + 1, hi + 1):
            y[j] = plant.step(uk)
    y_ref = ref_model_response(system.ref_model.at_rest(0.0), ref, system.sim_dt)
    return Trajectory(system.sim_dt, ref, u, y, extra={"y_ref": y_ref, "error": y_ref - y})


def build_system(ident: IdentResult, window: WindowSpec, hidden: int | Sequence[int], ref_model: ReferenceModel,
                 dt: float, u_bound: float, spec: ReferenceSpec, seed, activation_slope: float = 1.0,
                 relative: bool = True, sim_dt: float = 1e-3) -> MrcSystem:
    """Assemble a system around an identified plant model with a fresh controller.

    The controller's final layer starts at zero, so the untrained loop
    applies no voltage.
    """
    hidden = [hidden] if isinstance(hidden, int) else list(hidden)
    ctrl = nn.init_mlp([window.controller_inputs, *hidden, 1], seed, activation_slope, zero_output=True)
    span = 2.0 * spec.level_max
    if relative:
        c_in = Affine(np.zeros(window.controller_inputs), np.full(window.controller_inputs, span))
        c_in.offset[window.n_r:] = ident.plant_in.offset[window.n_u:]
        c_in.scale[window.n_r:] = ident.plant_in.scale[window.n_u:]
    else:
        c_in = Affine(np.zeros(window.controller_inputs), np.full(window.controller_inputs, spec.level_max))
        c_in.offset[window.n_r:] = ident.plant_in.offset[window.n_u:]
        c_in.scale[window.n_r:] = ident.plant_in.scale[window.n_u:]
    scaling = Scaling(c_in, Affine.symmetric(u_bound), ident.plant_in, ident.plant_out)
    return MrcSystem(ctrl, ident.net, window, ref_model, dt, scaling, relative, sim_dt)
