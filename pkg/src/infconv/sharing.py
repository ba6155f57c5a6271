"""Learning optimal risk-sharing allocations with small networks.

Two networks are trained jointly on an empirical sample: one proposes the
share of the pooled position kept by the first agent, the other the share
kept by the second.  The batch loss symmetrizes the pooled risk over both
consistent ways of completing each proposal, which keeps the pair honest
without a hard constraint; reported allocations are re-symmetrized so the
two shares add up to the input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .measures import (
    Combination,
    Distortion,
    EmpiricalMeasure,
    ExpectedShortfall,
    RiskMeasure,
    Spectral,
    empirical,
    eval_with_grad,
    evaluate,
)
from .net import ACTIVATIONS, Mlp, backward, forward, grad_list, init_mlp, param_list, set_params
from .optim import OptimizerError, init_adam, init_plateau, adam_step, plateau_step
from .oracle import brute_force_infconv, build_knots
from .sampling import RngSeed, make_generator, wasserstein_p

__all__ = [
    "TrainConfig",
    "TrainingError",
    "EnsembleError",
    "MemberResult",
    "EnsembleAllocation",
    "LossHistory",
    "TrainResult",
    "batch_loss_and_cotangents",
    "train_member",
    "train_ensemble",
    "pair_loss",
    "allocation_loss",
    "metric_d",
    "metric_d_mu",
    "l2_error",
    "distortion_density_norm",
    "StabilityReport",
    "spectral_stability_check",
]

# The allocation metric compares maps on growing centered windows; terms decay
# geometrically so truncating after _METRIC_TERMS windows changes the value by
# less than 2**-_METRIC_TERMS (~2.4e-4).
_METRIC_TERMS = 12
_METRIC_POINTS_PER_UNIT = 512


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one ensemble training run.

    ``hidden_widths`` lists the hidden layer sizes; input and output are
    always scalar.  Learning-rate decay is driven by the mean batch loss of
    each epoch through a reduce-on-plateau rule.
    """

    n_samples: int = 20_000
    batch_size: int = 1_000
    epochs: int = 150
    learning_rate: float = 1e-4
    ensemble_size: int = 3
    hidden_widths: tuple[int, ...] = (64, 64)
    activation: str = "relu"
    base_seed: int = 0
    patience: int = 10
    threshold: float = 1e-6
    factor: float = 0.1
    min_lr: float = 0.0

    def __post_init__(self) -> None:
        if self.n_samples < 2:
            raise ValueError("need at least two training samples")
        if not 1 <= self.batch_size <= self.n_samples:
            raise ValueError("batch size must lie in [1, n_samples]")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.ensemble_size < 1:
            raise ValueError("need at least one ensemble member")
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))

    @property
    def widths(self) -> tuple[int, ...]:
        return (1, *self.hidden_widths, 1)


class TrainingError(RuntimeError):
    """Raised when a member run produces non-finite values.

    Carries the member index, the epoch and batch where training broke down,
    and the mean losses of the completed epochs.
    """

    def __init__(self, message: str, member: int, epoch: int, batch: int, history: np.ndarray):
        super().__init__(message)
        self.member = member
        self.epoch = epoch
        self.batch = batch
        self.history = history


class EnsembleError(RuntimeError):
    """Raised when one or more ensemble members fail to train."""

    def __init__(self, message: str, failures: list[TrainingError]):
        super().__init__(message)
        self.failures = failures


def batch_loss_and_cotangents(
    spec1: RiskMeasure,
    spec2: RiskMeasure,
    xs: np.ndarray,
    first_values: np.ndarray,
    second_values: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Symmetrized pooled risk of two share proposals on one batch.

    Averages the two consistent completions (first proposal with its
    complement, complement of the second with the second) and returns the
    loss gradient with respect to each proposal's batch values.
    """
    m1 = empirical(first_values)
    m2 = empirical(second_values)
    m1c = empirical(xs - first_values)
    m2c = empirical(xs - second_values)
    r1, g1 = eval_with_grad(spec1, m1)
    r2, g2 = eval_with_grad(spec2, m2)
    r3, g3 = eval_with_grad(spec1, m2c)
    r4, g4 = eval_with_grad(spec2, m1c)
    loss = 0.5 * (r1 + r2 + r3 + r4)
    cot1 = 0.5 * (g1 - g4)
    cot2 = 0.5 * (g2 - g3)
    return loss, cot1, cot2


@dataclass(frozen=True, eq=False)
class MemberResult:
    """Trained network pair of one ensemble member plus its epoch history."""

    phi1: Mlp
    phi2: Mlp
    losses: np.ndarray  # mean batch loss per epoch
    lrs: np.ndarray  # learning rate in effect during each epoch

    def first(self, xs: np.ndarray) -> np.ndarray:
        """Feasible first share: average of proposal and complement proposal."""
        xs = np.asarray(xs, dtype=np.float64)
        return 0.5 * (forward(self.phi1, xs) + xs - forward(self.phi2, xs))

    def second(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        return xs - self.first(xs)


def train_member(
    samples: np.ndarray,
    spec1: RiskMeasure,
    spec2: RiskMeasure,
    config: TrainConfig,
    member: int = 0,
) -> MemberResult:
    """Train one network pair on a fixed sample.

    Randomness is split by stream: member k initializes its networks from
    streams 4k+1 and 4k+2 and shuffles batches from stream 4k+3, so members
    are independent while the data sample (stream 0) is shared.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size != config.n_samples:
        raise ValueError("sample vector does not match config.n_samples")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    if member < 0:
        raise ValueError("member index must be non-negative")

    phi1 = init_mlp(config.widths, config.activation, RngSeed(config.base_seed, 4 * member + 1))
    phi2 = init_mlp(config.widths, config.activation, RngSeed(config.base_seed, 4 * member + 2))
    shuffler = make_generator(RngSeed(config.base_seed, 4 * member + 3))
    adam1 = init_adam(param_list(phi1), config.learning_rate)
    adam2 = init_adam(param_list(phi2), config.learning_rate)
    plateau = init_plateau(config.patience, config.threshold, config.factor, config.min_lr)

    lr = config.learning_rate
    losses = np.empty(config.epochs)
    lrs = np.empty(config.epochs)

    for epoch in range(config.epochs):
        order = shuffler.permutation(config.n_samples)
        batch_losses = []
        for batch, start in enumerate(range(0, config.n_samples, config.batch_size)):
            xb = samples[order[start : start + config.batch_size]]
            v1 = forward(phi1, xb)
            v2 = forward(phi2, xb)
            if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
                raise TrainingError(
                    f"member {member}: non-finite network output at epoch {epoch}, batch {batch}",
                    member, epoch, batch, losses[:epoch].copy(),
                )
            loss, cot1, cot2 = batch_loss_and_cotangents(spec1, spec2, xb, v1, v2)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"member {member}: non-finite loss at epoch {epoch}, batch {batch}",
                    member, epoch, batch, losses[:epoch].copy(),
                )
            batch_losses.append(loss)
            try:
                p1, adam1 = adam_step(adam1, param_list(phi1), grad_list(backward(phi1, xb, cot1)))
                p2, adam2 = adam_step(adam2, param_list(phi2), grad_list(backward(phi2, xb, cot2)))
            except OptimizerError as exc:
                raise TrainingError(
                    f"member {member}: {exc} at epoch {epoch}, batch {batch}",
                    member, epoch, batch, losses[:epoch].copy(),
                ) from exc
            set_params(phi1, p1)
            set_params(phi2, p2)
        epoch_loss = float(np.mean(batch_losses))
        losses[epoch] = epoch_loss
        lrs[epoch] = lr
        new_lr, plateau = plateau_step(plateau, epoch_loss, lr)
        if new_lr != lr:
            lr = new_lr
            adam1 = replace(adam1, lr=lr)
            adam2 = replace(adam2, lr=lr)

    return MemberResult(phi1=phi1, phi2=phi2, losses=losses, lrs=lrs)


@dataclass(frozen=True, eq=False)
class EnsembleAllocation:
    """Pointwise average of the feasible member allocations.

    The first share is the mean of the members' symmetrized first shares and
    the second share is its exact complement, so feasibility is preserved.
    """

    members: tuple[MemberResult, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    def first(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        return np.mean([m.first(xs) for m in self.members], axis=0)

    def second(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        return xs - self.first(xs)


@dataclass(frozen=True, eq=False)
class LossHistory:
    """Per-epoch loss and learning-rate trajectories of all members."""

    member_losses: np.ndarray  # (members, epochs)
    member_lrs: np.ndarray  # (members, epochs)

    @property
    def epochs(self) -> int:
        return int(self.member_losses.shape[1])

    @property
    def mean_loss(self) -> np.ndarray:
        return self.member_losses.mean(axis=0)

    @property
    def std_loss(self) -> np.ndarray:
        return self.member_losses.std(axis=0)

    @property
    def mean_lr(self) -> np.ndarray:
        return self.member_lrs.mean(axis=0)


@dataclass(frozen=True, eq=False)
class TrainResult:
    allocation: EnsembleAllocation
    history: LossHistory


def train_ensemble(
    samples: np.ndarray,
    spec1: RiskMeasure,
    spec2: RiskMeasure,
    config: TrainConfig,
) -> TrainResult:
    """Train config.ensemble_size independent members and average them.

    All members see the same sample; failures are collected and reported
    together so one diverging member does not hide another.
    """
    members: list[MemberResult] = []
    failures: list[TrainingError] = []
    for k in range(config.ensemble_size):
        try:
            members.append(train_member(samples, spec1, spec2, config, member=k))
        except TrainingError as exc:
            failures.append(exc)
    if failures:
        which = ", ".join(str(f.member) for f in failures)
        raise EnsembleError(f"ensemble members {which} failed to train", failures)
    history = LossHistory(
        member_losses=np.stack([m.losses for m in members]),
        member_lrs=np.stack([m.lrs for m in members]),
    )
    return TrainResult(allocation=EnsembleAllocation(members=tuple(members)), history=history)


# ---------------------------------------------------------------------------
# Allocation quality
# ---------------------------------------------------------------------------


def pair_loss(
    spec1: RiskMeasure, spec2: RiskMeasure, xs: np.ndarray, first_values: np.ndarray
) -> float:
    """Pooled risk of the feasible pair (first, xs - first) on a sample."""
    xs = np.asarray(xs, dtype=np.float64)
    first_values = np.asarray(first_values, dtype=np.float64)
    if first_values.shape != xs.shape:
        raise ValueError("first share values must match the sample shape")
    return evaluate(spec1, empirical(first_values)) + evaluate(spec2, empirical(xs - first_values))


def _first_map(allocation):
    """Accept an allocation object (anything with .first) or a plain callable."""
    return allocation.first if hasattr(allocation, "first") else allocation


def allocation_loss(spec1: RiskMeasure, spec2: RiskMeasure, xs: np.ndarray, allocation) -> float:
    """Pooled risk of an allocation's feasible pair on a sample."""
    xs = np.asarray(xs, dtype=np.float64)
    return pair_loss(spec1, spec2, xs, np.asarray(_first_map(allocation)(xs), dtype=np.float64))


def metric_d(f, g, terms: int = _METRIC_TERMS, points_per_unit: int = _METRIC_POINTS_PER_UNIT) -> float:
    """Bounded metric on allocation maps: geometrically weighted window sups.

    Term h weighs min(1, sup over [-h, h] of |f - g|) by 2**-h and the series
    is truncated after ``terms`` windows, cutting off a tail of at most
    2**-terms.  Sups are approximated on a uniform grid.
    """
    if terms < 1:
        raise ValueError("need at least one window term")
    f = _first_map(f)
    g = _first_map(g)
    grid = np.linspace(-terms, terms, 2 * terms * points_per_unit + 1)
    diff = np.abs(np.asarray(f(grid), dtype=np.float64) - np.asarray(g(grid), dtype=np.float64))
    total = 0.0
    for h in range(1, terms + 1):
        sup = float(diff[np.abs(grid) <= h].max())
        total += 0.5**h * min(1.0, sup)
    return total


def metric_d_mu(f, g, m: EmpiricalMeasure, terms: int = _METRIC_TERMS) -> float:
    """Sample-supported variant of metric_d: window sups over sample points.

    Windows containing no sample contribute zero, so this never exceeds
    metric_d on the same maps (up to grid resolution).
    """
    if terms < 1:
        raise ValueError("need at least one window term")
    f = _first_map(f)
    g = _first_map(g)
    xs = m.samples if isinstance(m, EmpiricalMeasure) else np.asarray(m, dtype=np.float64)
    diff = np.abs(np.asarray(f(xs), dtype=np.float64) - np.asarray(g(xs), dtype=np.float64))
    total = 0.0
    for h in range(1, terms + 1):
        inside = diff[np.abs(xs) <= h]
        if inside.size:
            total += 0.5**h * min(1.0, float(inside.max()))
    return total


def l2_error(approx, exact, xs: np.ndarray) -> float:
    """Mean squared difference of two first-share maps over a sample."""
    f = _first_map(approx)
    g = _first_map(exact)
    xs = np.asarray(xs, dtype=np.float64)
    diff = np.asarray(f(xs), dtype=np.float64) - np.asarray(g(xs), dtype=np.float64)
    return float(np.mean(diff * diff))


# ---------------------------------------------------------------------------
# Stability of the pooled risk under sample perturbations
# ---------------------------------------------------------------------------


def _es_components(spec: RiskMeasure) -> list[tuple[float, float]] | None:
    """Flatten to weighted shortfall components, None if not of that class."""
    if isinstance(spec, ExpectedShortfall):
        return [(1.0, spec.alpha)]
    if isinstance(spec, Distortion):
        return list(spec.components)
    if isinstance(spec, Combination):
        out: list[tuple[float, float]] = []
        for weight, term in spec.terms:
            inner = _es_components(term)
            if inner is None:
                return None
            out.extend((weight * w, a) for w, a in inner)
        return out
    return None


def distortion_density_norm(spec: RiskMeasure, q: float) -> float:
    """L^q norm over [0, 1] of the measure's rank-weighting density.

    Exact for shortfall mixtures (step densities) and for grid-based spectral
    densities (piecewise linear).  Raises for measures without such a
    density, e.g. anything containing an entropic term.
    """
    if q < 1.0:
        raise ValueError("q must be at least 1")
    if isinstance(spec, Spectral):
        return _piecewise_linear_q_norm(spec.grid, spec.values, q)
    comps = _es_components(spec)
    if comps is None:
        raise ValueError(f"no rank-weighting density for {spec!r}")
    edges = np.unique(np.concatenate([[0.0, 1.0], [a for _, a in comps]]))
    mids = 0.5 * (edges[1:] + edges[:-1])
    heights = np.array([sum(w / a for w, a in comps if a >= mid) for mid in mids])
    if np.isinf(q):
        return float(heights.max())
    return float((np.sum(heights**q * np.diff(edges))) ** (1.0 / q))


def _piecewise_linear_q_norm(grid: np.ndarray, values: np.ndarray, q: float) -> float:
    if np.isinf(q):
        return float(values.max())
    a = values[:-1]
    b = values[1:]
    du = np.diff(grid)
    flat = np.isclose(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        seg = (b ** (q + 1.0) - a ** (q + 1.0)) / ((q + 1.0) * (b - a))
    seg = np.where(flat, a**q, seg)
    return float((seg @ du) ** (1.0 / q))


@dataclass(frozen=True)
class StabilityReport:
    """Pooled-risk gap between two samples against its theoretical bound."""

    value_a: float
    value_b: float
    lhs: float
    rhs: float
    wasserstein: float
    norm1: float
    norm2: float
    holds: bool


def spectral_stability_check(
    spec1: RiskMeasure,
    spec2: RiskMeasure,
    ma: EmpiricalMeasure,
    mb: EmpiricalMeasure,
    p: float = 2.0,
    segments: int = 6,
    levels: int = 4,
    slack: float = 1e-9,
) -> StabilityReport:
    """Check |pooled(A) - pooled(B)| against the transport-cost bound.

    Both pooled risks are minimized over the same piecewise-linear candidate
    family (knots from the merged sample), so the gap is controlled by the
    sum of the measures' density norms times the order-p transport distance
    between the samples.  Only measures with a rank-weighting density
    qualify.
    """
    if p < 1.0:
        raise ValueError("p must be at least 1")
    if not isinstance(ma, EmpiricalMeasure):
        ma = empirical(np.asarray(ma, dtype=np.float64))
    if not isinstance(mb, EmpiricalMeasure):
        mb = empirical(np.asarray(mb, dtype=np.float64))
    q = np.inf if p == 1.0 else p / (p - 1.0)
    norm1 = distortion_density_norm(spec1, q)
    norm2 = distortion_density_norm(spec2, q)
    knots = build_knots(np.concatenate([ma.samples, mb.samples]), segments)
    res_a = brute_force_infconv(spec1, spec2, ma, levels=levels, knots=knots)
    res_b = brute_force_infconv(spec1, spec2, mb, levels=levels, knots=knots)
    lhs = abs(res_a.value - res_b.value)
    dist = wasserstein_p(ma, mb, p)
    rhs = (norm1 + norm2) * dist
    return StabilityReport(
        value_a=res_a.value,
        value_b=res_b.value,
        lhs=lhs,
        rhs=rhs,
        wasserstein=dist,
        norm1=norm1,
        norm2=norm2,
        holds=bool(lhs <= rhs + slack),
    )
