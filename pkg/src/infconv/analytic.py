"""Distribution-level reference values and optimal-allocation descriptors.

For the measure pairs whose pooled risk has a closed form, these helpers
evaluate the combined measure against the continuous distribution by adaptive
Simpson quadrature, giving sample-free anchors for validating trained and
brute-force solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import Entropic, ExpectedShortfall, RiskMeasure
from .sampling import Distribution, pdf, quantile, support

__all__ = [
    "ProportionalAllocation",
    "CornerAllocation",
    "TailCutFamily",
    "AllocationDescriptor",
    "analytic_infconv",
    "analytic_allocation",
    "entropic_risk",
    "expected_shortfall_risk",
    "fit_tail_cut",
]

_QUAD_TOL = 1e-8
_MAX_DEPTH = 48


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    """Classic bisecting Simpson rule with Richardson acceptance test."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        x1 = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + x1)
        xr = 0.5 * (x1 + x2)
        fl = f(xl)
        fr = f(xr)
        left = simpson(x0, x1, f0, fl, f1)
        right = simpson(x1, x2, f1, fr, f2)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, x1, f0, fl, f1, left, tol / 2.0, depth - 1) + recurse(
            x1, x2, f1, fr, f2, right, tol / 2.0, depth - 1
        )

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, _MAX_DEPTH)


def entropic_risk(dist: Distribution, beta: float) -> float:
    """beta * log E[exp(-X/beta)] by quadrature against the density.

    The integrand is shifted by the upper support end so it stays >= 1, and
    normalized by its maximum so the absolute Simpson tolerance acts as a
    relative one; this keeps small beta stable.
    """
    lo, hi = support(dist)
    grid = np.linspace(lo, hi, 1025)
    raw = np.exp((hi - grid) / beta) * pdf(dist, grid)
    scale = float(raw.max())

    def integrand(x: float) -> float:
        return float(np.exp((hi - x) / beta) * pdf(dist, x)) / scale

    integral = scale * _adaptive_simpson(integrand, lo, hi, _QUAD_TOL)
    return -hi + beta * float(np.log(integral))


def expected_shortfall_risk(dist: Distribution, alpha: float) -> float:
    """(1/alpha) * integral of -quantile over (0, alpha) by quadrature."""
    integral = _adaptive_simpson(
        lambda u: -float(quantile(dist, u)), 0.0, float(alpha), _QUAD_TOL
    )
    return integral / float(alpha)


def analytic_infconv(
    spec1: RiskMeasure, spec2: RiskMeasure, dist: Distribution
) -> float | None:
    """Pooled-risk value when a closed form is known, else None.

    Two entropic measures pool into an entropic measure with the summed
    tolerance; two expected shortfalls pool into the one with the larger
    level.  Other pairs have no closed form here.
    """
    if isinstance(spec1, Entropic) and isinstance(spec2, Entropic):
        return entropic_risk(dist, spec1.beta + spec2.beta)
    if isinstance(spec1, ExpectedShortfall) and isinstance(spec2, ExpectedShortfall):
        return expected_shortfall_risk(dist, max(spec1.alpha, spec2.alpha))
    return None


@dataclass(frozen=True)
class ProportionalAllocation:
    """First agent takes ``first_share * x``; the rest goes to the second."""

    first_share: float

    def first(self, xs: np.ndarray) -> np.ndarray:
        return self.first_share * np.asarray(xs, dtype=np.float64)

    def second(self, xs: np.ndarray) -> np.ndarray:
        return (1.0 - self.first_share) * np.asarray(xs, dtype=np.float64)


@dataclass(frozen=True)
class CornerAllocation:
    """One agent absorbs the whole position, the other takes zero."""

    first_takes_all: bool

    def first(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        return xs if self.first_takes_all else np.zeros_like(xs)

    def second(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        return np.zeros_like(xs) if self.first_takes_all else xs


@dataclass(frozen=True)
class TailCutFamily:
    """Shape family min(x - k, 0) for the shortfall agent, k free.

    The tail-averaging agent takes every loss below some threshold k while the
    exponential-utility agent keeps max(x, k); the threshold itself is not
    pinned down here.  ``es_first`` says which slot holds the shortfall agent.
    """

    es_first: bool

    def member(self, k: float):
        def tail(xs: np.ndarray) -> np.ndarray:
            return np.minimum(np.asarray(xs, dtype=np.float64) - k, 0.0)

        def rest(xs: np.ndarray) -> np.ndarray:
            return np.maximum(np.asarray(xs, dtype=np.float64), k)

        return (tail, rest) if self.es_first else (rest, tail)


AllocationDescriptor = ProportionalAllocation | CornerAllocation | TailCutFamily


def analytic_allocation(
    spec1: RiskMeasure, spec2: RiskMeasure
) -> AllocationDescriptor | None:
    """Optimal-allocation descriptor for the closed-form pairs, else None."""
    if isinstance(spec1, Entropic) and isinstance(spec2, Entropic):
        return ProportionalAllocation(first_share=spec1.beta / (spec1.beta + spec2.beta))
    if isinstance(spec1, ExpectedShortfall) and isinstance(spec2, ExpectedShortfall):
        return CornerAllocation(first_takes_all=spec1.alpha >= spec2.alpha)
    if isinstance(spec1, ExpectedShortfall) and isinstance(spec2, Entropic):
        return TailCutFamily(es_first=True)
    if isinstance(spec1, Entropic) and isinstance(spec2, ExpectedShortfall):
        return TailCutFamily(es_first=False)
    return None


def fit_tail_cut(xs: np.ndarray, values: np.ndarray) -> float:
    """Least-squares threshold k for values ~ min(xs - k, 0).

    Coarse grid search over the sample range followed by a golden-section
    refinement of the best bracket.
    """
    xs = np.asarray(xs, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)

    def sse(k: float) -> float:
        resid = values - np.minimum(xs - k, 0.0)
        return float(resid @ resid)

    lo = float(xs.min()) - 0.5
    hi = float(xs.max()) + 0.5
    grid = np.linspace(lo, hi, 501)
    best = int(np.argmin([sse(k) for k in grid]))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid.size - 1)]
    ratio = 0.5 * (np.sqrt(5.0) - 1.0)
    x1 = b - ratio * (b - a)
    x2 = a + ratio * (b - a)
    f1, f2 = sse(x1), sse(x2)
    for _ in range(80):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - ratio * (b - a)
            f1 = sse(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + ratio * (b - a)
            f2 = sse(x2)
    return float(0.5 * (a + b))
