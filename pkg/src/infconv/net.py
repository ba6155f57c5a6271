"""Small dense feed-forward networks with hand-written backpropagation.

Scalar-in scalar-out networks evaluated on batches.  All arithmetic is
float64; forward and backward are pure functions of the stored parameters, so
two identical calls give bit-identical results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .sampling import RngSeed, make_generator

__all__ = [
    "ACTIVATIONS",
    "Mlp",
    "GradientBuffer",
    "init_mlp",
    "forward",
    "backward",
    "param_count",
    "param_list",
    "grad_list",
    "set_params",
    "mlp_to_json",
    "mlp_from_json",
]

ACTIVATIONS = ("linear", "relu", "tanh")


@dataclass
class Mlp:
    """Alternating affine maps and activations; no activation after the last map.

    weights[i] has shape (widths[i+1], widths[i]); biases[i] has shape
    (widths[i+1],).  Forward and backward never mutate the arrays; updates
    replace the lists wholesale and need exclusive access.
    """

    widths: tuple[int, ...]
    activation: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("need at least one affine map (two widths)")
        if any(w < 1 for w in widths):
            raise ValueError(f"widths must be positive, got {widths}")
        if widths[0] != 1 or widths[-1] != 1:
            raise ValueError("networks map scalars to scalars: first and last width must be 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ValueError("parameter lists must hold one entry per affine map")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[i + 1], widths[i]) or b.shape != (widths[i + 1],):
                raise ValueError(f"parameter shapes do not match widths at layer {i}")
        object.__setattr__(self, "widths", widths)

    @property
    def num_layers(self) -> int:
        return len(self.weights)


@dataclass
class GradientBuffer:
    """Per-parameter gradients, shaped exactly like the network parameters."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_mlp(widths: tuple[int, ...], activation: str, rng: RngSeed) -> Mlp:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    gen = make_generator(rng)
    widths = tuple(int(w) for w in widths)
    weights = []
    biases = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(gen.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(widths=widths, activation=activation, weights=weights, biases=biases)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "linear":
        return z
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_prime(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "linear":
        return np.ones_like(z)
    if activation == "relu":
        return (z > 0.0).astype(np.float64)  # derivative at 0 is 0
    t = np.tanh(z)
    return 1.0 - t * t


def _check_batch(xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 1:
        raise ValueError("input batch must be 1-d")
    if not np.all(np.isfinite(xs)):
        raise ValueError("input batch must be finite")
    return xs


def forward(mlp: Mlp, xs: np.ndarray) -> np.ndarray:
    """Evaluate the network on a batch of scalars."""
    a = _check_batch(xs)[:, None]
    last = mlp.num_layers - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        a = z if i == last else _activate(z, mlp.activation)
    return a.ravel()


def backward(mlp: Mlp, xs: np.ndarray, upstream: np.ndarray) -> GradientBuffer:
    """Gradients of sum_i upstream[i] * forward(mlp, xs)[i] w.r.t. parameters."""
    xs = _check_batch(xs)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != xs.shape:
        raise ValueError("upstream weights must match the input batch shape")

    # forward pass, caching inputs and pre-activations of every layer
    a = xs[:, None]
    inputs = [a]
    pre = []
    last = mlp.num_layers - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else _activate(z, mlp.activation)
        inputs.append(a)

    grad_w: list[np.ndarray] = [np.empty(0)] * mlp.num_layers
    grad_b: list[np.ndarray] = [np.empty(0)] * mlp.num_layers
    delta = upstream[:, None]
    for i in range(last, -1, -1):
        grad_w[i] = delta.T @ inputs[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ mlp.weights[i]) * _activate_prime(pre[i - 1], mlp.activation)
    return GradientBuffer(weights=grad_w, biases=grad_b)


def param_count(mlp: Mlp) -> int:
    return int(sum(w.size for w in mlp.weights) + sum(b.size for b in mlp.biases))


def param_list(mlp: Mlp) -> list[np.ndarray]:
    """Flat parameter list in a fixed order (W0, b0, W1, b1, ...)."""
    out: list[np.ndarray] = []
    for w, b in zip(mlp.weights, mlp.biases):
        out.append(w)
        out.append(b)
    return out


def grad_list(buf: GradientBuffer) -> list[np.ndarray]:
    """Gradient arrays in the same order as param_list."""
    out: list[np.ndarray] = []
    for w, b in zip(buf.weights, buf.biases):
        out.append(w)
        out.append(b)
    return out


def set_params(mlp: Mlp, params: list[np.ndarray]) -> None:
    """Install parameters produced by an optimizer step (param_list order)."""
    if len(params) != 2 * mlp.num_layers:
        raise ValueError("wrong number of parameter arrays")
    mlp.weights = [params[2 * i] for i in range(mlp.num_layers)]
    mlp.biases = [params[2 * i + 1] for i in range(mlp.num_layers)]


def mlp_to_json(mlp: Mlp) -> str:
    """Flat JSON holding widths, activation and row-major parameters.

    Floats are written with the shortest round-trip representation, so a
    load reproduces the parameters bit for bit.
    """
    payload = {
        "widths": list(mlp.widths),
        "activation": mlp.activation,
        "weights": [w.ravel().tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }
    return json.dumps(payload, sort_keys=True)


def mlp_from_json(text: str) -> Mlp:
    payload = json.loads(text)
    try:
        widths = tuple(int(w) for w in payload["widths"])
        activation = str(payload["activation"])
        weights = [
            np.asarray(flat, dtype=np.float64).reshape(widths[i + 1], widths[i])
            for i, flat in enumerate(payload["weights"])
        ]
        biases = [np.asarray(b, dtype=np.float64) for b in payload["biases"]]
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed network JSON: {exc}") from exc
    return Mlp(widths=widths, activation=activation, weights=weights, biases=biases)
