"""Brute-force reference implementations used to freeze expected values.

Everything here is computed by direct enumeration over the conditioned
outcome space with scipy's pmfs — deliberately a different code path
from the library's log-weight kernels, so agreement is evidence rather
than tautology.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

TIE_RTOL = 1e-12


def minlik_pvalues(pmf: np.ndarray) -> np.ndarray:
    """Two-sided p-value of every outcome: total mass of outcomes no
    more likely than it, with a relative tie tolerance."""
    pmf = np.asarray(pmf, dtype=np.float64)
    total = pmf.sum()
    no_more_likely = pmf[None, :] <= pmf[:, None] * (1.0 + TIE_RTOL)
    return (no_more_likely * pmf[None, :]).sum(axis=1) / total


def binomial_outcome_pvalues(n: int) -> np.ndarray:
    """Outcome p-values of the conditional test for two Poisson counts
    given their total n: Binomial(n, 1/2)."""
    return minlik_pvalues(stats.binom.pmf(np.arange(n + 1), n, 0.5))


def fisher_outcome_pvalues(r1: int, r2: int, s: int) -> tuple[int, np.ndarray]:
    """Outcome p-values of the conditional test for two binomial counts
    given margins (r1, r2) and total s: hypergeometric. Returns the
    smallest attainable outcome and the p-values from there up."""
    lo, hi = max(0, s - r2), min(r1, s)
    a = np.arange(lo, hi + 1)
    return lo, minlik_pvalues(stats.hypergeom.pmf(a, r1 + r2, r1, s))


def negbinom_outcome_pvalues(s: int, shape_total: float) -> np.ndarray:
    """Outcome p-values of the conditional test for two negative
    binomial group sums given their total s, each sum with shape
    ``shape_total``. The conditional law f(a)f(s-a)/sum is free of the
    common null mean, so any positive mean works; s/2 is used."""
    if s == 0:
        return np.array([1.0])
    a = np.arange(s + 1)
    p = shape_total / (shape_total + s / 2.0)
    f = stats.nbinom.pmf(a, shape_total, p)
    return minlik_pvalues(f * f[::-1])


def doubling_pvalues(pmf: np.ndarray) -> np.ndarray:
    """Two-sided p-values under the tail-doubling convention:
    min(1, 2 * min(lower tail, upper tail)) per outcome."""
    pmf = np.asarray(pmf, dtype=np.float64)
    total = pmf.sum()
    lower = np.cumsum(pmf) / total
    upper = np.cumsum(pmf[::-1])[::-1] / total
    return np.minimum(1.0, 2.0 * np.minimum(lower, upper))


def null_mass_at_most(pmf: np.ndarray, pvalues: np.ndarray, t: float) -> float:
    """P(p-value <= t) under the conditional null, by enumeration."""
    pmf = np.asarray(pmf, dtype=np.float64)
    return float(pmf[pvalues <= t].sum() / pmf.sum())
