"""Estimators of the proportion of true null hypotheses.

Five estimators are provided. ``storey_pi0`` is the classical
exceedance-count estimator for a tuning parameter ``lambda``.
``generalized_pi0`` subtracts the discreteness-induced bias term using
each hypothesis's null p-value support: a discrete null puts no mass
on the gap between ``lambda`` and the largest attainable p-value below
it, and the generalized estimator removes exactly that gap, weighted
by per-hypothesis constants ``epsilon``. ``pounds_tilde_pi0`` doubles
the mean p-value, ``pounds_hat_pi0`` rescales each p-value by its null
expectation, and ``benjamini_pi0`` uses the median order statistic.

Estimates report both the raw value and the value clipped to [0, 1].
With ``epsilon = 0``, or when every support is empty (a continuous
uniform null), ``generalized_pi0`` equals ``storey_pi0`` bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PValueProfile:
    """An observed p-value paired with its discrete null support.

    An empty support means the null distribution is continuous uniform
    on (0, 1]. A nonempty support must be strictly increasing, end at
    1, and contain the observed p-value.
    """

    pvalue: float
    support: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "support", np.asarray(self.support, dtype=np.float64)
        )


class Study:
    """A collection of p-value profiles, optionally with truth labels.

    ``truth`` marks each hypothesis as a true null (True) or a false
    null (False); it is only used by simulation oracles, never by the
    estimators themselves.
    """

    def __init__(
        self,
        pvalues: Sequence[float] | np.ndarray,
        supports: Sequence[np.ndarray],
        truth: Sequence[bool] | np.ndarray | None = None,
    ) -> None:
        self.pvalues = np.asarray(pvalues, dtype=np.float64)
        if self.pvalues.ndim != 1 or self.pvalues.shape[0] < 1:
            raise ValueError("a study needs at least one p-value")
        if len(supports) != self.pvalues.shape[0]:
            raise ValueError("supports and p-values must align")
        self.supports = [np.asarray(s, dtype=np.float64) for s in supports]
        if truth is None:
            self.truth = None
        else:
            self.truth = np.asarray(truth, dtype=bool)
            if self.truth.shape[0] != self.pvalues.shape[0]:
                raise ValueError("truth labels and p-values must align")
        self._padded: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def m(self) -> int:
        return self.pvalues.shape[0]

    @classmethod
    def from_profiles(
        cls,
        profiles: Sequence[PValueProfile],
        truth: Sequence[bool] | None = None,
    ) -> "Study":
        return cls(
            [p.pvalue for p in profiles],
            [p.support for p in profiles],
            truth,
        )

    @classmethod
    def from_batch(
        cls,
        pvalues: np.ndarray,
        support_flat: np.ndarray,
        support_start: np.ndarray,
        support_len: np.ndarray,
        truth: Sequence[bool] | np.ndarray | None = None,
    ) -> "Study":
        """Build a study from the flattened batch-kernel layout."""
        supports = [
            support_flat[support_start[i] : support_start[i] + support_len[i]]
            for i in range(pvalues.shape[0])
        ]
        return cls(pvalues, supports, truth)

    def profile(self, i: int) -> PValueProfile:
        return PValueProfile(float(self.pvalues[i]), self.supports[i])

    def _padded_supports(self) -> tuple[np.ndarray, np.ndarray]:
        """Supports padded into a matrix with +inf, plus lengths."""
        if self._padded is None:
            lens = np.array([s.shape[0] for s in self.supports], dtype=np.int64)
            width = max(int(lens.max()), 1)
            mat = np.full((self.m, width), np.inf)
            for i, s in enumerate(self.supports):
                mat[i, : s.shape[0]] = s
            self._padded = (mat, lens)
        return self._padded

    def support_floor(self, lam: float) -> np.ndarray:
        """Largest support element at most ``lam``, per hypothesis.

        Hypotheses whose support has no element at most ``lam`` get 0;
        hypotheses with an empty support (uniform null) get ``lam``.
        """
        mat, lens = self._padded_supports()
        counts = (mat <= lam).sum(axis=1)
        rows = np.arange(self.m)
        floor = np.where(
            counts > 0, mat[rows, np.maximum(counts - 1, 0)], 0.0
        )
        return np.where(lens == 0, lam, floor)


@dataclass(frozen=True)
class Pi0Estimate:
    """An estimate of the proportion of true nulls.

    ``raw`` is the pre-clipping value (it may fall outside [0, 1] and
    is infinite for the median estimator when the median p-value is
    1); ``value`` is clipped to [0, 1].
    """

    method: str
    raw: float
    value: float
    lam: float | None = None
    epsilon: float | np.ndarray | None = None

    def to_json_dict(self) -> dict:
        if self.epsilon is None:
            eps: object = None
        elif np.ndim(self.epsilon) == 0:
            eps = float(self.epsilon)
        else:
            arr = np.asarray(self.epsilon, dtype=np.float64)
            eps = {
                "min": float(arr.min()),
                "max": float(arr.max()),
                "mean": float(arr.mean()),
            }
        return {
            "method": self.method,
            "raw": self.raw,
            "value": self.value,
            "lambda": self.lam,
            "epsilon": eps,
        }


def _clip01(x: float) -> float:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


def _denominator(lam: float, m: int) -> float:
    return (1.0 - lam) * m


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")


def support_cdf(profile: PValueProfile, lam: float) -> float:
    """Null CDF of the profile's p-value evaluated at ``lam``.

    For a discrete support this is the largest support element at most
    ``lam`` (0 when no element qualifies); for an empty support the
    null is continuous uniform and the CDF is ``lam`` itself.
    """
    s = profile.support
    if s.shape[0] == 0:
        return float(lam)
    idx = int(np.searchsorted(s, lam, side="right"))
    if idx == 0:
        return 0.0
    return float(s[idx - 1])


def storey_pi0(study: Study, lam: float) -> Pi0Estimate:
    """Exceedance-count estimator: count(p > lambda) scaled.

    The raw value can exceed 1; the clipped value is in [0, 1].
    """
    _check_lambda(lam)
    count = int(np.count_nonzero(study.pvalues > lam))
    raw = count / _denominator(lam, study.m)
    return Pi0Estimate("storey", raw, _clip01(raw), lam=lam)


def generalized_pi0(
    study: Study, lam: float, epsilon: float | np.ndarray
) -> Pi0Estimate:
    """Discreteness-adjusted exceedance estimator.

    Subtracts, per hypothesis, ``epsilon_i`` times the gap between
    ``lam`` and the largest support element at most ``lam``. With
    ``epsilon = 0``, or when every support is empty, this reproduces
    :func:`storey_pi0` exactly.
    """
    _check_lambda(lam)
    eps = np.asarray(epsilon, dtype=np.float64)
    if eps.ndim == 0:
        eps_arr: np.ndarray | float = float(eps)
        if not 0.0 <= float(eps) <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
    else:
        if eps.shape[0] != study.m:
            raise ValueError("per-hypothesis epsilon must have length m")
        if np.any(eps < 0.0) or np.any(eps > 1.0):
            raise ValueError("epsilon must lie in [0, 1]")
        eps_arr = eps
    floor = study.support_floor(lam)
    indicator = (study.pvalues > lam).astype(np.float64)
    terms = indicator - eps_arr * (lam - floor)
    raw = float(np.sum(terms)) / _denominator(lam, study.m)
    return Pi0Estimate(
        "generalized", raw, _clip01(raw), lam=lam, epsilon=epsilon
    )


def pounds_tilde_pi0(study: Study) -> Pi0Estimate:
    """Twice the mean p-value, capped at 1 (two-sided p-values)."""
    raw = 2.0 * float(np.mean(study.pvalues))
    return Pi0Estimate("pounds_tilde", raw, _clip01(raw))


def null_expected_pvalue(profile: PValueProfile) -> float:
    """Expected p-value under the profile's null distribution.

    For a support ``t_1 < ... < t_K`` the null puts mass
    ``t_k - t_{k-1}`` on ``t_k`` (with ``t_0 = 0``), so the expectation
    is the sum of ``t_k * (t_k - t_{k-1})``. An empty support means a
    uniform null with expectation 1/2.
    """
    s = profile.support
    if s.shape[0] == 0:
        return 0.5
    gaps = np.diff(np.concatenate(([0.0], s)))
    return float(np.sum(s * gaps))


def pounds_hat_pi0(study: Study) -> Pi0Estimate:
    """Mean of p-values rescaled by their null expectations, capped."""
    expectations = np.array(
        [null_expected_pvalue(study.profile(i)) for i in range(study.m)]
    )
    raw = float(np.mean(study.pvalues / expectations))
    return Pi0Estimate("pounds_hat", raw, _clip01(raw))


def benjamini_pi0(study: Study) -> Pi0Estimate:
    """Median-based estimator of the proportion of true nulls.

    Uses the order statistic at rank floor(m/2). When that p-value is
    1 the formula is singular; the estimate is then set to 1, the
    maximally conservative value, since discrete p-values reach 1
    routinely.
    """
    m = study.m
    if m < 2:
        raise ValueError("the median estimator needs at least two p-values")
    k = m // 2
    pk = float(np.sort(study.pvalues)[k - 1])
    if pk >= 1.0:
        return Pi0Estimate("benjamini", math.inf, 1.0)
    raw = (m - k + 1) / (m * (1.0 - pk))
    return Pi0Estimate("benjamini", raw, _clip01(raw))
