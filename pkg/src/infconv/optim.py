"""Adam with bias correction and a reduce-on-plateau learning-rate rule."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "OptimizerError",
    "AdamState",
    "init_adam",
    "adam_step",
    "PlateauState",
    "init_plateau",
    "plateau_step",
]


class OptimizerError(RuntimeError):
    """Raised on invalid gradients; the optimizer state is left unchanged."""


@dataclass
class AdamState:
    """First/second moment buffers plus the step counter and current rate."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(
    params: list[np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    if not np.isfinite(lr) or lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr!r}")
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        t=0,
        lr=float(lr),
        beta1=float(beta1),
        beta2=float(beta2),
        eps=float(eps),
    )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], AdamState]:
    """One update p <- p - lr * m_hat / (sqrt(v_hat) + eps).

    Returns fresh parameter arrays and a fresh state; raises OptimizerError on
    non-finite or mis-shaped gradients without touching the state.
    """
    if len(params) != len(state.m) or len(grads) != len(params):
        raise OptimizerError("parameter/gradient lists do not match the state")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise OptimizerError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError("non-finite gradient")

    t = state.t + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_m = []
    new_v = []
    new_p = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
    return new_p, replace(state, m=new_m, v=new_v, t=t)


@dataclass
class PlateauState:
    """Tracks the best epoch loss and how long it has not improved."""

    patience: int
    threshold: float = 1e-6
    factor: float = 0.1
    min_lr: float = 0.0
    best: float = np.inf
    bad_epochs: int = 0


def init_plateau(
    patience: int, threshold: float = 1e-6, factor: float = 0.1, min_lr: float = 0.0
) -> PlateauState:
    if patience < 0:
        raise ValueError("patience must be non-negative")
    if not 0.0 < factor < 1.0:
        raise ValueError("factor must lie in (0, 1)")
    if threshold < 0.0 or not np.isfinite(threshold):
        raise ValueError("threshold must be non-negative and finite")
    if min_lr < 0.0:
        raise ValueError("min_lr must be non-negative")
    return PlateauState(
        patience=int(patience), threshold=float(threshold), factor=float(factor),
        min_lr=float(min_lr),
    )


def plateau_step(state: PlateauState, epoch_loss: float, lr: float) -> tuple[float, PlateauState]:
    """Reduce lr by `factor` once the loss has not improved (by more than the
    absolute threshold) for more than `patience` consecutive epochs."""
    if not np.isfinite(epoch_loss):
        raise OptimizerError("non-finite epoch loss")
    if epoch_loss < state.best - state.threshold:
        return lr, replace(state, best=float(epoch_loss), bad_epochs=0)
    bad = state.bad_epochs + 1
    if bad > state.patience:
        return max(lr * state.factor, state.min_lr), replace(state, bad_epochs=0)
    return lr, replace(state, bad_epochs=bad)
