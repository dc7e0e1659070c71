"""Hot numerical kernels for exact-test p-value and support enumeration.

Every two-sided p-value in this package follows the minimum-likelihood
convention: the p-value of an observed outcome is the total null
probability of all outcomes whose null probability does not exceed the
observed outcome's probability. Probability ties are detected with a
relative tolerance of ``TIE_RTOL`` so that outcomes with mathematically
equal probabilities (for example symmetric pairs computed through
floating-point log-gamma) fall into the same tie class.

The batch kernels carry a numba ``@njit`` implementation and a pure
numpy fallback with identical semantics. Dispatch is controlled by the
``DISCRETEFDR_DISABLE_NUMBA`` environment variable: when it is set to a
truthy value (``1``, ``true``, ``yes``, ``on``) the numpy path is used
and numba is never imported. Both implementations remain importable by
name (``*_numba`` / ``*_numpy``) so they can be benchmarked against
each other in one process.

Batch results use a flattened layout because supports have variable
length: ``(pvalues, support_flat, support_start, support_len)`` where
hypothesis ``i`` owns ``support_flat[support_start[i]:
support_start[i] + support_len[i]]``.

Counts are exact for conditioned totals up to a few thousand; far
beyond that, extreme-tail probabilities can underflow float64 after
the log-weight shift.
"""

from __future__ import annotations

import math
import os

import numpy as np

TIE_RTOL = 1e-12

ENV_DISABLE_NUMBA = "DISCRETEFDR_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(ENV_DISABLE_NUMBA, "").strip().lower() in {
        "1",
        "true",
        "yes",
        "on",
    }


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def outcome_pvalues_numpy(logw: np.ndarray) -> np.ndarray:
    """Minimum-likelihood p-value of every outcome of one discrete null.

    Parameters
    ----------
    logw : ndarray
        Unnormalized log-probabilities of the outcomes ``0..n``. Any
        additive constant cancels.

    Returns
    -------
    ndarray
        ``out[a]`` is the two-sided p-value of outcome ``a``. The modal
        outcome gets exactly 1.0.
    """
    w = np.exp(logw - logw.max())
    sw = np.sort(w)
    cw = np.cumsum(sw)
    total = cw[-1]
    idx = np.searchsorted(sw, w * (1.0 + TIE_RTOL), side="right") - 1
    return cw[idx] / total


def _batch_generic_numpy(logw_builder, observed_index, sizes):
    m = len(sizes)
    pvals = np.empty(m)
    start = np.empty(m, dtype=np.int64)
    length = np.empty(m, dtype=np.int64)
    flat = np.empty(int(np.sum(sizes)))
    pos = 0
    for i in range(m):
        out = outcome_pvalues_numpy(logw_builder(i))
        pvals[i] = out[observed_index(i)]
        sup = np.unique(out)
        k = sup.shape[0]
        flat[pos : pos + k] = sup
        start[i] = pos
        length[i] = k
        pos += k
    return pvals, flat[:pos].copy(), start, length


def _log_binom(n: np.ndarray | int, k: np.ndarray | int) -> np.ndarray:
    from scipy.special import gammaln

    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(k) + 1.0) - gammaln(
        np.asarray(n) - np.asarray(k) + 1.0
    )


def batch_binomial_numpy(x1: np.ndarray, x2: np.ndarray):
    """Symmetric conditional binomial test for every count pair.

    Given pair ``(x1[i], x2[i])``, conditions on ``n = x1 + x2`` and
    evaluates outcome ``a = x1`` against Binomial(n, 1/2).
    """
    x1 = np.asarray(x1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    ns = x1 + x2

    def build(i):
        n = ns[i]
        a = np.arange(n + 1)
        return _log_binom(n, a)

    return _batch_generic_numpy(build, lambda i: x1[i], ns + 1)


def batch_fisher_numpy(x1, r1, x2, r2):
    """Conditional hypergeometric test for every 2x2 table.

    Margins ``(r1[i], r2[i], s = x1 + x2)`` fix the attainable range of
    ``a = x1``; the null law of ``a`` is hypergeometric.
    """
    x1 = np.asarray(x1, dtype=np.int64)
    r1 = np.asarray(r1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    r2 = np.asarray(r2, dtype=np.int64)
    ss = x1 + x2
    lo = np.maximum(0, ss - r2)
    hi = np.minimum(r1, ss)

    def build(i):
        a = np.arange(lo[i], hi[i] + 1)
        return _log_binom(r1[i], a) + _log_binom(r2[i], ss[i] - a)

    return _batch_generic_numpy(build, lambda i: x1[i] - lo[i], hi - lo + 1)


def batch_negbinom_numpy(s1, s2, shape_total):
    """Conditional test of two negative-binomial group sums.

    Each group sum is modeled as NegBinomial with shape ``shape_total``
    (per-sample shape times samples per group) and a common mean under
    the null. Conditional on ``s = s1 + s2`` the mean cancels and the
    null weight of a split ``a`` is proportional to
    ``C(a + k - 1, a) * C(s - a + k - 1, s - a)`` with
    ``k = shape_total``.
    """
    from scipy.special import gammaln

    s1 = np.asarray(s1, dtype=np.int64)
    s2 = np.asarray(s2, dtype=np.int64)
    k = float(shape_total)
    ss = s1 + s2
    lgk = math.lgamma(k)

    def build(i):
        s = ss[i]
        a = np.arange(s + 1)
        left = gammaln(a + k) - gammaln(a + 1.0) - lgk
        return left + left[::-1]

    return _batch_generic_numpy(build, lambda i: s1[i], ss + 1)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

NUMBA_AVAILABLE = False

if not _env_disabled():
    try:
        from numba import njit

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        NUMBA_AVAILABLE = False

if NUMBA_AVAILABLE:

    @njit(cache=True, nogil=True)
    def _outcome_pvalues_nb(logw):
        n = logw.shape[0]
        mx = logw[0]
        for t in range(1, n):
            if logw[t] > mx:
                mx = logw[t]
        w = np.empty(n)
        for t in range(n):
            w[t] = math.exp(logw[t] - mx)
        sw = np.sort(w)
        cw = np.cumsum(sw)
        total = cw[n - 1]
        out = np.empty(n)
        for a in range(n):
            j = np.searchsorted(sw, w[a] * (1.0 + TIE_RTOL), side="right") - 1
            out[a] = cw[j] / total
        return out

    @njit(cache=True, nogil=True)
    def _write_unique_nb(vals, flat, pos):
        sv = np.sort(vals)
        k = 0
        prev = -1.0
        for t in range(sv.shape[0]):
            v = sv[t]
            if v != prev:
                flat[pos + k] = v
                prev = v
                k += 1
        return k

    @njit(cache=True, nogil=True)
    def batch_binomial_numba(x1, x2):
        m = x1.shape[0]
        cap = 0
        for i in range(m):
            cap += x1[i] + x2[i] + 1
        pvals = np.empty(m)
        flat = np.empty(cap)
        start = np.empty(m, dtype=np.int64)
        length = np.empty(m, dtype=np.int64)
        pos = 0
        for i in range(m):
            n = x1[i] + x2[i]
            logw = np.empty(n + 1)
            lgn = math.lgamma(n + 1.0)
            for a in range(n + 1):
                logw[a] = lgn - math.lgamma(a + 1.0) - math.lgamma(n - a + 1.0)
            out = _outcome_pvalues_nb(logw)
            pvals[i] = out[x1[i]]
            k = _write_unique_nb(out, flat, pos)
            start[i] = pos
            length[i] = k
            pos += k
        return pvals, flat[:pos].copy(), start, length

    @njit(cache=True, nogil=True)
    def batch_fisher_numba(x1, r1, x2, r2):
        m = x1.shape[0]
        cap = 0
        for i in range(m):
            s = x1[i] + x2[i]
            lo = max(0, s - r2[i])
            hi = min(r1[i], s)
            cap += hi - lo + 1
        pvals = np.empty(m)
        flat = np.empty(cap)
        start = np.empty(m, dtype=np.int64)
        length = np.empty(m, dtype=np.int64)
        pos = 0
        for i in range(m):
            s = x1[i] + x2[i]
            lo = max(0, s - r2[i])
            hi = min(r1[i], s)
            n_out = hi - lo + 1
            logw = np.empty(n_out)
            lg1 = math.lgamma(r1[i] + 1.0)
            lg2 = math.lgamma(r2[i] + 1.0)
            for t in range(n_out):
                a = lo + t
                b = s - a
                logw[t] = (
                    lg1
                    - math.lgamma(a + 1.0)
                    - math.lgamma(r1[i] - a + 1.0)
                    + lg2
                    - math.lgamma(b + 1.0)
                    - math.lgamma(r2[i] - b + 1.0)
                )
            out = _outcome_pvalues_nb(logw)
            pvals[i] = out[x1[i] - lo]
            k = _write_unique_nb(out, flat, pos)
            start[i] = pos
            length[i] = k
            pos += k
        return pvals, flat[:pos].copy(), start, length

    @njit(cache=True, nogil=True)
    def batch_negbinom_numba(s1, s2, shape_total):
        m = s1.shape[0]
        cap = 0
        for i in range(m):
            cap += s1[i] + s2[i] + 1
        k_shape = shape_total
        lgk = math.lgamma(k_shape)
        pvals = np.empty(m)
        flat = np.empty(cap)
        start = np.empty(m, dtype=np.int64)
        length = np.empty(m, dtype=np.int64)
        pos = 0
        for i in range(m):
            s = s1[i] + s2[i]
            logw = np.empty(s + 1)
            for a in range(s + 1):
                logw[a] = (
                    math.lgamma(a + k_shape)
                    - math.lgamma(a + 1.0)
                    + math.lgamma(s - a + k_shape)
                    - math.lgamma(s - a + 1.0)
                    - 2.0 * lgk
                )
            out = _outcome_pvalues_nb(logw)
            pvals[i] = out[s1[i]]
            k = _write_unique_nb(out, flat, pos)
            start[i] = pos
            length[i] = k
            pos += k
        return pvals, flat[:pos].copy(), start, length

else:
    batch_binomial_numba = None
    batch_fisher_numba = None
    batch_negbinom_numba = None


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def using_numba() -> bool:
    """True when the dispatched batch kernels are the compiled ones."""
    return NUMBA_AVAILABLE


if NUMBA_AVAILABLE:

    def batch_binomial(x1, x2):
        x1 = np.ascontiguousarray(x1, dtype=np.int64)
        x2 = np.ascontiguousarray(x2, dtype=np.int64)
        return batch_binomial_numba(x1, x2)

    def batch_fisher(x1, r1, x2, r2):
        x1 = np.ascontiguousarray(x1, dtype=np.int64)
        r1 = np.ascontiguousarray(r1, dtype=np.int64)
        x2 = np.ascontiguousarray(x2, dtype=np.int64)
        r2 = np.ascontiguousarray(r2, dtype=np.int64)
        return batch_fisher_numba(x1, r1, x2, r2)

    def batch_negbinom(s1, s2, shape_total):
        s1 = np.ascontiguousarray(s1, dtype=np.int64)
        s2 = np.ascontiguousarray(s2, dtype=np.int64)
        return batch_negbinom_numba(s1, s2, float(shape_total))

else:
    batch_binomial = batch_binomial_numpy
    batch_fisher = batch_fisher_numpy
    batch_negbinom = batch_negbinom_numpy


def warm_up() -> None:
    """Trigger JIT compilation of the batch kernels on tiny inputs.

    No-op on the numpy path. Useful before timed sections.
    """
    one = np.array([1], dtype=np.int64)
    two = np.array([2], dtype=np.int64)
    batch_binomial(one, two)
    batch_fisher(one, two, one, two)
    batch_negbinom(one, two, 3.0)
