"""Seeded sampling, stratified grids, and Wasserstein convergence.

All randomness comes from counter-based generators keyed by (seed, stream),
so every number printed here is reproducible.  The Wasserstein distance
between an empirical sample and the distribution it came from shrinks like
1/sqrt(N); the stratified quantile grid converges much faster.
"""

import numpy as np

from infconv import (
    NegBeta,
    RngSeed,
    TruncNormal,
    Uniform,
    draw,
    empirical,
    pdf,
    quantile,
    stratified_sample,
    support,
    wasserstein_p,
)

distributions = {
    "uniform(-1,1)": Uniform(-1.0, 1.0),
    "truncnormal(0,1,-3,3)": TruncNormal(0.0, 1.0, -3.0, 3.0),
    "negbeta(2,5)": NegBeta(2.0, 5.0),
}

# ---------------------------------------------------------------------------
# Basic facts: support, a few quantiles, density mass.
# ---------------------------------------------------------------------------
for label, dist in distributions.items():
    lo, hi = support(dist)
    qs = quantile(dist, np.array([0.1, 0.5, 0.9]))
    grid = np.linspace(lo, hi, 20001)
    mass = np.trapezoid(pdf(dist, grid), grid)
    print(f"{label:24s} support [{lo: .2f},{hi: .2f}]  "
          f"q10/50/90 = {qs[0]: .3f} {qs[1]: .3f} {qs[2]: .3f}  "
          f"density mass = {mass:.6f}")

# ---------------------------------------------------------------------------
# Same seed, same numbers; different stream, fresh numbers.
# ---------------------------------------------------------------------------
u = Uniform(-1.0, 1.0)
again = draw(u, 4, RngSeed(42, 0))
assert np.array_equal(again, draw(u, 4, RngSeed(42, 0)))
print(f"\ndraw(seed=42, stream=0) twice -> identical: {again}")
print(f"draw(seed=42, stream=1)         -> different: {draw(u, 4, RngSeed(42, 1))}")

# ---------------------------------------------------------------------------
# Monte Carlo versus stratified: distance to a fine reference measure.
# ---------------------------------------------------------------------------
reference = empirical(stratified_sample(u, 200_001))
print("\n      N    W1(random draw, ref)   W1(stratified, ref)")
for n in (100, 1_000, 10_000):
    random_w = np.median([
        wasserstein_p(empirical(draw(u, n, RngSeed(seed, 0))), reference, 1.0)
        for seed in range(20)
    ])
    strat_w = wasserstein_p(empirical(stratified_sample(u, n)), reference, 1.0)
    print(f"  {n:5d}        {random_w:.5f}              {strat_w:.7f}")

print("\nthe random-draw column shrinks like 1/sqrt(N); the stratified grid is")
print("already within one grid cell of the distribution at every size")
