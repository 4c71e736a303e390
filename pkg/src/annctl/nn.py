"""Feedforward network with sigmoid hidden layers, trained by backpropagation.

Hidden units use ``f(x) = 1 / (1 + exp(-a*x))`` with a configurable slope
``a``; the output layer is affine so the network can emit unbounded
voltages and angles. Every routine accepts a single sample ``(n_in,)`` or a
batch ``(n_samples, n_in)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DivergenceError

FORMAT_TAG = "annctl-mlp"
FORMAT_VERSION = 1


def sigmoid(x, a: float = 1.0):
    """Logistic function with slope ``a``, overflow-free for any finite ``x``."""
    z = a * np.asarray(x, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def sigmoid_grad(x, a: float = 1.0):
    f = sigmoid(x, a)
    return a * f * (1.0 - f)


@dataclass
class Layer:
    weights: np.ndarray  # (n_out, n_in)
    biases: np.ndarray  # (n_out,)


@dataclass
class Mlp:
    layers: list[Layer]
    activation_slope: float = 1.0

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ConfigError("net.layers", "need at least one hidden layer")
        if not (math.isfinite(self.activation_slope) and self.activation_slope > 0):
            raise ConfigError("net.activation_slope", f"must be > 0, got {self.activation_slope!r}")
        for k, layer in enumerate(self.layers):
            w, b = layer.weights, layer.biases
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigError(f"net.layers[{k}]", f"bad shapes W{w.shape} b{b.shape}")
            if k and w.shape[1] != self.layers[k - 1].weights.shape[0]:
                raise ConfigError(f"net.layers[{k}]", "input width does not match previous layer")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ConfigError(f"net.layers[{k}]", "non-finite parameters")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.layers[0].weights.shape[1],) + tuple(l.weights.shape[0] for l in self.layers)

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.sizes[-1]

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.weights.copy(), l.biases.copy()) for l in self.layers], self.activation_slope)

    def __call__(self, x):
        return forward(self, x)[0]

    # Flat parameter vector, layer by layer, W (row-major) then b.
    def get_params(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weights.ravel(), l.biases]) for l in self.layers])

    def set_params(self, theta: np.ndarray) -> None:
        pos = 0
        for l in self.layers:
            nw, nb = l.weights.size, l.biases.size
            l.weights[...] = theta[pos:pos + nw].reshape(l.weights.shape)
            l.biases[...] = theta[pos + nw:pos + nw + nb]
            pos += nw + nb

    def equals(self, other: "Mlp") -> bool:
        """Bit-exact equality of structure and parameters."""
        return (self.sizes == other.sizes and self.activation_slope == other.activation_slope
                and all(np.array_equal(a.weights, b.weights) and np.array_equal(a.biases, b.biases)
                        for a, b in zip(self.layers, other.layers)))


def init_mlp(sizes: Sequence[int], rng: np.random.Generator | int, activation_slope: float = 1.0,
             zero_output: bool = False) -> Mlp:
    """Uniform init in +-1/sqrt(fan_in) for weights and biases.

    ``zero_output`` zeroes the final layer so the fresh network outputs 0.
    """
    if len(sizes) < 3:
        raise ConfigError("net.sizes", f"need input, hidden and output sizes, got {list(sizes)}")
    if any(int(s) < 1 for s in sizes):
        raise ConfigError("net.sizes", f"all sizes must be >= 1, got {list(sizes)}")
    rng = np.random.default_rng(rng)
    layers = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        lim = 1.0 / math.sqrt(n_in)
        w = rng.uniform(-lim, lim, size=(n_out, n_in))
        b = rng.uniform(-lim, lim, size=n_out)
        layers.append(Layer(w, b))
    if zero_output:
        layers[-1].weights[...] = 0.0
        layers[-1].biases[...] = 0.0
    return Mlp(layers, activation_slope)


def forward(net: Mlp, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Evaluate the network; also returns the activation of every layer.

    ``activations[0]`` is the input, ``activations[-1]`` the output.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.n_inputs:
        raise ConfigError("net.input", f"expected {net.n_inputs} inputs, got {x.shape[-1]}")
    acts = [x]
    h = x
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        z = h @ layer.weights.T + layer.biases
        h = z if k == last else sigmoid(z, net.activation_slope)
        acts.append(h)
    return h, acts


def backward(net: Mlp, acts: list[np.ndarray], grad_out: np.ndarray) -> tuple[list[Layer], np.ndarray]:
    """Vector-Jacobian product through a cached forward pass.

    Given dL/d(output) returns dL/d(parameters) (summed over a batch) and
    dL/d(input).
    """
    a = net.activation_slope
    delta = np.asarray(grad_out, dtype=float)
    grads: list[Layer] = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        h_in = acts[k]
        if delta.ndim == 1:
            gw = np.outer(delta, h_in)
            gb = delta.copy()
        else:
            gw = delta.T @ h_in
            gb = delta.sum(axis=0)
        grads[k] = Layer(gw, gb)
        delta = delta @ net.layers[k].weights
        if k > 0:
            f = acts[k]
            delta = delta * (a * f * (1.0 - f))
    return grads, delta


def backprop(net: Mlp, x, target) -> list[Layer]:
    """Gradient of ``0.5 * ||forward(x) - target||^2`` (summed over a batch)."""
    y, acts = forward(net, x)
    target = np.asarray(target, dtype=float)
    if target.shape != y.shape:
        raise ConfigError("net.target", f"target shape {target.shape} does not match output {y.shape}")
    grads, _ = backward(net, acts, y - target)
    return grads


def flatten_grads(grads: list[Layer]) -> np.ndarray:
    return np.concatenate([np.concatenate([g.weights.ravel(), g.biases]) for g in grads])


def mse(predictions, targets) -> float:
    """Mean over samples of the squared error summed over output dimensions."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mse of an empty sequence")
    with np.errstate(over="ignore", invalid="ignore"):
        sq = (p - t) ** 2
    if sq.ndim > 1:
        sq = sq.reshape(len(sq), -1).sum(axis=1)
    return float(np.mean(sq))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.05
    batch_mode: str = "full"  # "full" | "sample"
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ConfigError("train.epochs", f"must be an integer >= 0, got {self.epochs!r}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigError("train.learning_rate", f"must be >= 0, got {self.learning_rate!r}")
        if self.batch_mode not in ("full", "sample"):
            raise ConfigError("train.batch_mode", f"must be 'full' or 'sample', got {self.batch_mode!r}")


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, n_in)
    targets: np.ndarray  # (n, n_out)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if len(self.inputs) == 0 or len(self.inputs) != len(self.targets):
            raise ValueError("dataset must be nonempty with one target per input")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite values")

    def __len__(self):
        return len(self.inputs)


@dataclass
class TrainResult:
    net: Mlp
    mse_history: list[float] = field(default_factory=list)


def _apply(net: Mlp, grads: list[Layer], lr: float) -> None:
    for layer, g in zip(net.layers, grads):
        layer.weights -= lr * g.weights
        layer.biases -= lr * g.biases


def train(net: Mlp, data: Dataset, cfg: TrainConfig) -> TrainResult:
    """Plain gradient descent for exactly ``cfg.epochs`` epochs on a copy of ``net``.

    Full-batch mode takes one step per epoch on the mean loss; per-sample
    mode visits the samples in a fresh seeded shuffle every epoch. The
    history records the dataset MSE after each epoch.
    """
    if data.inputs.shape[1] != net.n_inputs or data.targets.shape[1] != net.n_outputs:
        raise ConfigError("train.data", f"dataset widths {data.inputs.shape[1]}->{data.targets.shape[1]} "
                                        f"do not match network {net.sizes}")
    net = net.copy()
    rng = np.random.default_rng(cfg.rng_seed)
    n = len(data)
    history = []
    for epoch in range(cfg.epochs):
        if cfg.batch_mode == "full":
            y, acts = forward(net, data.inputs)
            grads, _ = backward(net, acts, (y - data.targets) / n)
            _apply(net, grads, cfg.learning_rate)
        else:
            for j in rng.permutation(n):
                _apply(net, backprop(net, data.inputs[j], data.targets[j]), cfg.learning_rate)
        with np.errstate(over="ignore", invalid="ignore"):
            loss = mse(net(data.inputs), data.targets)
        if not math.isfinite(loss):
            raise DivergenceError(f"training diverged at epoch {epoch + 1} "
                                  f"(learning_rate={cfg.learning_rate:g}); try a smaller learning rate")
        history.append(loss)
    return TrainResult(net, history)


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps(net: Mlp) -> str:
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}",
             "sizes " + " ".join(str(s) for s in net.sizes),
             f"activation_slope {net.activation_slope!r}"]
    for k, layer in enumerate(net.layers):
        n_out, n_in = layer.weights.shape
        lines.append(f"layer {k} {n_out} {n_in}")
        lines.extend(_fmt(row) for row in layer.weights)
        lines.append("bias " + _fmt(layer.biases))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Mlp:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        tag, version = lines[0].split()
        if tag != FORMAT_TAG or int(version) != FORMAT_VERSION:
            raise ValueError(f"unsupported network format {lines[0]!r}")
        sizes = [int(s) for s in lines[1].split()[1:]]
        slope = float(lines[2].split()[1])
        pos = 3
        layers = []
        for k in range(len(sizes) - 1):
            head = lines[pos].split()
            if head[0] != "layer" or int(head[1]) != k:
                raise ValueError(f"expected layer {k} header, got {lines[pos]!r}")
            n_out, n_in = int(head[2]), int(head[3])
            w = np.array([[float(v) for v in lines[pos + 1 + r].split()] for r in range(n_out)])
            bias = lines[pos + 1 + n_out].split()
            if bias[0] != "bias":
                raise ValueError("missing bias row")
            b = np.array([float(v) for v in bias[1:]])
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ValueError(f"layer {k} has wrong dimensions")
            layers.append(Layer(w, b))
            pos += n_out + 2
    except (IndexError, ValueError) as exc:
        raise ConfigError("net.file", f"malformed network file: {exc}") from exc
    net = Mlp(layers, slope)
    if list(net.sizes) != sizes:
        raise ConfigError("net.file", f"header sizes {sizes} do not match layers {net.sizes}")
    return net


def save(net: Mlp, path: str | Path) -> None:
    Path(path).write_text(dumps(net))


def load(path: str | Path) -> Mlp:
    return loads(Path(path).read_text())
