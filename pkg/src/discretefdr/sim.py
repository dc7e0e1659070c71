"""Seeded simulation harness for the discrete-test estimators.

Three scenario families generate count data, run the matching exact
test on every hypothesis, and hand the resulting p-value profiles to
the estimators:

* ``poisson_bin``: Poisson counts per group, symmetric conditional
  binomial test. Group-1 means are Pareto(location, shape); false
  nulls scale the group-2 mean by a uniform factor.
* ``binomial_fet``: binomial counts with negative-binomial trial
  counts (shifted by an offset), hypergeometric test. False nulls
  scale the odds of success by a uniform factor; the scaled odds are
  mapped back to a probability by the configured transform.
* ``negbinom_ent``: negative-binomial counts, several samples per
  group, conditional group-sum test. Group-1 means come from a
  configuration file or a uniform range; false nulls scale the mean
  by a Pareto factor.

Reproducibility: replication ``r`` of a scenario draws everything from
the stream ``SeedSequence(seed, spawn_key=(r,))``. Within one
replication the draw order is fixed: scenario parameters first
(means, trials, effect factors, in that order), then group-1 counts,
then group-2 counts. Parallel and serial runs produce identical
summaries because results are merged by replication index.

``bias_decomposition`` computes the exact finite-sample biases of the
discreteness-adjusted estimator and the doubled-mean estimator for one
fixed parameter draw, by enumerating the conditioned outcome
distributions up to a truncation bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as _stats

from . import _kernels
from .estimators import (
    Pi0Estimate,
    Study,
    benjamini_pi0,
    generalized_pi0,
    pounds_hat_pi0,
    pounds_tilde_pi0,
    storey_pi0,
)
from .fdr import (
    FdrEstimator,
    ThresholdResult,
    adaptive_bh,
    bh_procedure,
    build_rejection_process,
    threshold,
)

SCENARIO_KINDS = ("poisson_bin", "binomial_fet", "negbinom_ent")

ODDS_TRANSFORMS = ("odds", "cap")

DEFAULT_PI0_METHODS = ("storey", "generalized", "pounds_tilde", "benjamini")
PI0_METHODS = ("storey", "generalized", "pounds_tilde", "pounds_hat", "benjamini")

DEFAULT_PROCEDURES = ("generalized", "storey", "bh", "adaptive_bh")
PROCEDURES = ("generalized", "storey", "storey_variant", "bh", "adaptive_bh")


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of one simulation scenario.

    ``alpha_levels`` are the nominal FDR levels evaluated per
    replication; ``reps`` is the replication count; ``seed`` the base
    seed. Scenario-specific parameters default to the standard setup
    of each family. ``theta2_transform`` selects how a scaled odds
    value is mapped back to a probability in the ``binomial_fet``
    family: ``odds`` re-inverts the odds (``q / (1 + q)``), ``cap``
    truncates at 1. The choice is deliberately explicit because the
    scaled odds can exceed 1.
    """

    kind: str
    m: int
    pi0: float
    alpha_levels: tuple[float, ...] = (0.05, 0.1)
    reps: int = 50
    seed: int = 0
    # poisson_bin
    pareto_location: float = 7.0
    pareto_shape: float = 7.0
    # shared effect-size range (uniform); defaults depend on kind
    rho_low: float | None = None
    rho_high: float | None = None
    # binomial_fet
    trials_size: float = 3.0
    trials_mean: float = 8.0
    trials_offset: int = 2
    theta_low: float = 0.08
    theta_high: float = 0.65
    theta2_transform: str = "odds"
    # negbinom_ent
    dispersion: float = 1.451
    reps_per_group: int = 3
    mean_low: float = 0.5
    mean_high: float = 8.0
    mean_file: str | None = None
    # negbinom_ent effect size is Pareto, not uniform
    rho_location: float = 1.5
    rho_shape: float = 1.426

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(
                f"unknown scenario kind {self.kind!r}; "
                f"choose from {SCENARIO_KINDS}"
            )
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 0.0 < self.pi0 < 1.0:
            raise ValueError("pi0 must lie in (0, 1)")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.theta2_transform not in ODDS_TRANSFORMS:
            raise ValueError(
                f"unknown theta2_transform {self.theta2_transform!r}; "
                f"choose from {ODDS_TRANSFORMS}"
            )
        if self.rho_low is None:
            object.__setattr__(
                self, "rho_low", 1.5 if self.kind != "negbinom_ent" else None
            )
        if self.rho_high is None:
            high = {"poisson_bin": 5.0, "binomial_fet": 13.0}.get(self.kind)
            object.__setattr__(self, "rho_high", high)

    @property
    def m0(self) -> int:
        return int(round(self.pi0 * self.m))


def _pareto(rng: np.random.Generator, location: float, shape: float, size: int):
    return location * (1.0 + rng.pareto(shape, size))


def _draw_parameters(spec: ScenarioSpec, rng: np.random.Generator) -> dict:
    """Draw one replication's scenario parameters, in documented order."""
    m, m0 = spec.m, spec.m0
    m1 = m - m0
    if spec.kind == "poisson_bin":
        theta1 = _pareto(rng, spec.pareto_location, spec.pareto_shape, m)
        rho = rng.uniform(spec.rho_low, spec.rho_high, m1)
        theta2 = theta1.copy()
        theta2[m0:] = rho * theta1[m0:]
        return {"theta1": theta1, "theta2": theta2}
    if spec.kind == "binomial_fet":
        p_trials = spec.trials_size / (spec.trials_size + spec.trials_mean)
        trials = rng.negative_binomial(spec.trials_size, p_trials, m)
        trials = trials + spec.trials_offset
        theta1 = rng.uniform(spec.theta_low, spec.theta_high, m)
        rho = rng.uniform(spec.rho_low, spec.rho_high, m1)
        odds = rho * theta1[m0:] / (1.0 - theta1[m0:])
        if spec.theta2_transform == "odds":
            shifted = odds / (1.0 + odds)
        else:
            shifted = np.minimum(1.0, odds)
        theta2 = theta1.copy()
        theta2[m0:] = shifted
        return {"theta1": theta1, "theta2": theta2, "trials": trials}
    # negbinom_ent
    if spec.mean_file is not None:
        loaded = np.loadtxt(spec.mean_file, dtype=np.float64, ndmin=1)
        if loaded.shape[0] < m:
            raise ValueError(
                f"mean file provides {loaded.shape[0]} values, need {m}"
            )
        theta1 = loaded[:m]
    else:
        theta1 = rng.uniform(spec.mean_low, spec.mean_high, m)
    rho = _pareto(rng, spec.rho_location, spec.rho_shape, m1)
    theta2 = theta1.copy()
    theta2[m0:] = rho * theta1[m0:]
    return {"theta1": theta1, "theta2": theta2}


def _replication_rng(spec: ScenarioSpec, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(spec.seed, spawn_key=(rep_index,))
    )


def generate_scenario(spec: ScenarioSpec, rep_index: int) -> Study:
    """Generate one replication: counts, exact tests, truth labels.

    The same ``(spec, rep_index)`` always produces the identical
    study. The first ``m0 = round(pi0 * m)`` hypotheses are the true
    nulls.
    """
    rng = _replication_rng(spec, rep_index)
    params = _draw_parameters(spec, rng)
    truth = np.zeros(spec.m, dtype=bool)
    truth[: spec.m0] = True

    if spec.kind == "poisson_bin":
        x1 = rng.poisson(params["theta1"])
        x2 = rng.poisson(params["theta2"])
        out = _kernels.batch_binomial(
            x1.astype(np.int64), x2.astype(np.int64)
        )
    elif spec.kind == "binomial_fet":
        trials = params["trials"].astype(np.int64)
        x1 = rng.binomial(trials, params["theta1"])
        x2 = rng.binomial(trials, params["theta2"])
        out = _kernels.batch_fisher(
            x1.astype(np.int64), trials, x2.astype(np.int64), trials
        )
    else:
        sigma = 1.0 / spec.dispersion
        k = spec.reps_per_group
        p1 = sigma / (sigma + params["theta1"])
        p2 = sigma / (sigma + params["theta2"])
        s1 = rng.negative_binomial(sigma, p1, size=(k, spec.m)).sum(axis=0)
        s2 = rng.negative_binomial(sigma, p2, size=(k, spec.m)).sum(axis=0)
        out = _kernels.batch_negbinom(
            s1.astype(np.int64), s2.astype(np.int64), k * sigma
        )
    return Study.from_batch(*out, truth=truth)


def compute_pi0(
    study: Study, method: str, lam: float, epsilon: float
) -> Pi0Estimate:
    """Dispatch one named estimator of the proportion of true nulls."""
    if method == "storey":
        return storey_pi0(study, lam)
    if method == "generalized":
        return generalized_pi0(study, lam, epsilon)
    if method == "pounds_tilde":
        return pounds_tilde_pi0(study)
    if method == "pounds_hat":
        return pounds_hat_pi0(study)
    if method == "benjamini":
        return benjamini_pi0(study)
    raise ValueError(
        f"unknown pi0 method {method!r}; choose from {PI0_METHODS}"
    )


def run_procedure(
    study: Study, name: str, alpha: float, lam: float, epsilon: float
) -> ThresholdResult:
    """Dispatch one named multiple-testing procedure."""
    if name in ("generalized", "storey", "storey_variant"):
        proc = build_rejection_process(study.pvalues)
        if name == "generalized":
            est = FdrEstimator(
                "generalized", generalized_pi0(study, lam, epsilon), lam=lam
            )
        elif name == "storey":
            est = FdrEstimator("storey", storey_pi0(study, lam), lam=lam)
        else:
            est = FdrEstimator(
                "storey_variant", storey_pi0(study, lam), lam=lam
            )
        return threshold(est, proc, alpha)
    if name == "bh":
        return bh_procedure(study.pvalues, alpha)
    if name == "adaptive_bh":
        return adaptive_bh(study.pvalues, alpha, benjamini_pi0(study))
    raise ValueError(f"unknown procedure {name!r}; choose from {PROCEDURES}")


def false_discovery_proportion(study: Study, result: ThresholdResult) -> float:
    """Realized fraction of rejected true nulls; 1 when nothing is rejected."""
    if study.truth is None:
        raise ValueError("false discovery proportion needs truth labels")
    if result.rejections == 0:
        return 1.0
    v = int(np.count_nonzero(study.truth[result.rejected]))
    return v / result.rejections


@dataclass
class ReplicationSummary:
    """Per-replication samples plus aggregation helpers.

    ``pi0_estimates``/``excess`` have shape (reps, n_pi0_methods);
    ``thresholds``/``rejections``/``fdp`` have shape
    (reps, n_procedures, n_alpha). When ``reps`` is 1, sample standard
    deviations are undefined; they are reported as 0 and
    ``degenerate_sd`` is set.
    """

    spec: ScenarioSpec
    pi0_methods: tuple[str, ...]
    procedures: tuple[str, ...]
    pi0_estimates: np.ndarray
    excess: np.ndarray
    thresholds: np.ndarray
    rejections: np.ndarray
    fdp: np.ndarray
    degenerate_sd: bool = field(init=False)

    def __post_init__(self) -> None:
        self.degenerate_sd = self.spec.reps == 1

    def _sd(self, samples: np.ndarray, axis: int = 0) -> np.ndarray:
        if self.degenerate_sd:
            return np.zeros(samples.shape[1:] if axis == 0 else samples.shape)
        return samples.std(axis=axis, ddof=1)

    def excess_mean(self) -> np.ndarray:
        return self.excess.mean(axis=0)

    def excess_se(self) -> np.ndarray:
        return self._sd(self.excess) / math.sqrt(self.spec.reps)

    def fdp_mean(self) -> np.ndarray:
        return self.fdp.mean(axis=0)

    def fdp_se(self) -> np.ndarray:
        return self._sd(self.fdp) / math.sqrt(self.spec.reps)

    def aggregate(self) -> dict:
        """JSON-ready aggregate: means, sds and standard errors."""
        excess_mean = self.excess_mean()
        excess_sd = self._sd(self.excess)
        excess_se = self.excess_se()
        est_mean = self.pi0_estimates.mean(axis=0)
        agg: dict = {
            "kind": self.spec.kind,
            "m": self.spec.m,
            "pi0": self.spec.pi0,
            "reps": self.spec.reps,
            "seed": self.spec.seed,
            "degenerate_sd": self.degenerate_sd,
            "pi0_estimators": {},
            "procedures": {},
        }
        for j, name in enumerate(self.pi0_methods):
            agg["pi0_estimators"][name] = {
                "mean_estimate": float(est_mean[j]),
                "mean_excess": float(excess_mean[j]),
                "sd_excess": float(excess_sd[j]),
                "se_excess": float(excess_se[j]),
            }
        fdp_mean = self.fdp_mean()
        fdp_sd = self._sd(self.fdp)
        fdp_se = self.fdp_se()
        for j, name in enumerate(self.procedures):
            per_alpha = {}
            for a, alpha in enumerate(self.spec.alpha_levels):
                per_alpha[f"{alpha:.9g}"] = {
                    "mean_fdp": float(fdp_mean[j, a]),
                    "sd_fdp": float(fdp_sd[j, a]),
                    "se_fdp": float(fdp_se[j, a]),
                    "mean_rejections": float(
                        self.rejections[:, j, a].mean()
                    ),
                    "mean_threshold": float(
                        self.thresholds[:, j, a].mean()
                    ),
                }
            agg["procedures"][name] = per_alpha
        return agg


def run_replications(
    spec: ScenarioSpec,
    pi0_methods: Sequence[str] = DEFAULT_PI0_METHODS,
    procedures: Sequence[str] = DEFAULT_PROCEDURES,
    lam: float = 0.5,
    epsilon: float = 1.0,
    workers: int = 1,
) -> ReplicationSummary:
    """Run all replications of a scenario and collect the samples.

    Per replication: every named estimator of the true-null
    proportion, and every named procedure at every nominal level with
    its threshold, rejection count and realized false discovery
    proportion. Results are deterministic functions of
    ``(spec, rep_index)`` and independent of ``workers``.
    """
    pi0_methods = tuple(pi0_methods)
    procedures = tuple(procedures)
    if not pi0_methods and not procedures:
        raise ValueError("the method roster is empty")
    for name in pi0_methods:
        if name not in PI0_METHODS:
            raise ValueError(
                f"unknown pi0 method {name!r}; choose from {PI0_METHODS}"
            )
    for name in procedures:
        if name not in PROCEDURES:
            raise ValueError(
                f"unknown procedure {name!r}; choose from {PROCEDURES}"
            )

    reps = spec.reps
    alphas = spec.alpha_levels
    est = np.empty((reps, len(pi0_methods)))
    thr = np.empty((reps, len(procedures), len(alphas)))
    rej = np.empty((reps, len(procedures), len(alphas)), dtype=np.int64)
    fdp = np.empty((reps, len(procedures), len(alphas)))

    def one(r: int) -> None:
        study = generate_scenario(spec, r)
        for j, name in enumerate(pi0_methods):
            est[r, j] = compute_pi0(study, name, lam, epsilon).value
        for j, name in enumerate(procedures):
            for a, alpha in enumerate(alphas):
                res = run_procedure(study, name, alpha, lam, epsilon)
                thr[r, j, a] = res.t_alpha
                rej[r, j, a] = res.rejections
                fdp[r, j, a] = false_discovery_proportion(study, res)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(reps)))
    else:
        for r in range(reps):
            one(r)

    return ReplicationSummary(
        spec=spec,
        pi0_methods=pi0_methods,
        procedures=procedures,
        pi0_estimates=est,
        excess=est - spec.pi0,
        thresholds=thr,
        rejections=rej,
        fdp=fdp,
    )


# ---------------------------------------------------------------------------
# exact bias decomposition by enumeration
# ---------------------------------------------------------------------------


def generalized_bias_from_expectations(
    cdf_at_lambda: np.ndarray,
    null_cdf_at_lambda: np.ndarray,
    lam: float,
    epsilon: float,
    pi0: float,
) -> float:
    """Exact bias of the discreteness-adjusted estimator.

    ``cdf_at_lambda`` holds P(p_i <= lambda) under each hypothesis's
    actual data law; ``null_cdf_at_lambda`` holds the expectation of
    the largest null support element at most ``lambda`` (for a
    continuous uniform null this is ``lambda`` itself, making the
    adjustment vanish).
    """
    cdf = np.asarray(cdf_at_lambda, dtype=np.float64)
    null_cdf = np.asarray(null_cdf_at_lambda, dtype=np.float64)
    m = cdf.shape[0]
    lead = (1.0 - epsilon * lam) / (1.0 - lam)
    mid = float(np.sum(cdf - epsilon * null_cdf)) / ((1.0 - lam) * m)
    return lead - mid - pi0


def pounds_bias_from_expectations(
    mean_pvalue: np.ndarray, truth: np.ndarray
) -> float:
    """Exact bias of the doubled-mean estimator (uncapped form)."""
    mean_p = np.asarray(mean_pvalue, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    m = mean_p.shape[0]
    null_part = float(np.sum(mean_p[truth] - 0.5))
    alt_part = float(np.sum(mean_p[~truth]))
    return 2.0 / m * (null_part + alt_part)


@dataclass(frozen=True)
class BiasDecomposition:
    """Exact per-scenario biases plus their per-hypothesis inputs."""

    generalized_bias: float
    pounds_bias: float
    cdf_at_lambda: np.ndarray
    null_cdf_at_lambda: np.ndarray
    mean_pvalue: np.ndarray
    mass_deficit: float
    pi0: float
    lam: float
    epsilon: float


class _PvTableCache:
    """Outcome p-values, support floor and masses, keyed per total."""

    def __init__(self, lam: float) -> None:
        self.lam = lam
        self._cache: dict = {}

    def get(self, key, logw_builder):
        hit = self._cache.get(key)
        if hit is None:
            pv = _kernels.outcome_pvalues_numpy(logw_builder())
            support = np.unique(pv)
            idx = int(np.searchsorted(support, self.lam, side="right"))
            floor = 0.0 if idx == 0 else float(support[idx - 1])
            below = pv <= self.lam
            hit = (pv, below, floor)
            self._cache[key] = hit
        return hit


def bias_decomposition(
    spec: ScenarioSpec,
    lam: float,
    epsilon: float,
    truncation: int = 200,
    rep_index: int = 0,
) -> BiasDecomposition:
    """Exact biases for one fixed parameter draw of a scenario.

    The scenario parameters are the ones replication ``rep_index``
    would use, drawn once; no counts are sampled. Per hypothesis, the
    conditioned outcome distributions are enumerated over totals up to
    ``truncation``; if more than 1e-6 of probability mass lies beyond
    the bound, a :class:`ValueError` asks for a larger bound.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    rng = _replication_rng(spec, rep_index)
    params = _draw_parameters(spec, rng)
    m, m0 = spec.m, spec.m0
    truth = np.zeros(m, dtype=bool)
    truth[:m0] = True

    cdf = np.empty(m)
    null_cdf = np.empty(m)
    mean_p = np.empty(m)
    deficit = 0.0
    cache = _PvTableCache(lam)

    if spec.kind == "poisson_bin":
        theta1, theta2 = params["theta1"], params["theta2"]
        totals = np.arange(truncation + 1)
        for i in range(m):
            lam_sum = theta1[i] + theta2[i]
            ps = _stats.poisson.pmf(totals, lam_sum)
            covered = float(ps.sum())
            deficit = max(deficit, 1.0 - covered)
            q = theta1[i] / lam_sum
            acc_cdf = acc_floor = acc_mean = 0.0
            for s in totals:
                if ps[s] == 0.0:
                    continue
                pv, below, floor = cache.get(
                    ("bin", int(s)),
                    lambda s=int(s): _logw_binomial_np(s),
                )
                split = _stats.binom.pmf(np.arange(s + 1), s, q)
                acc_cdf += ps[s] * float(split[below].sum())
                acc_floor += ps[s] * floor
                acc_mean += ps[s] * float(np.dot(split, pv))
            cdf[i] = acc_cdf
            null_cdf[i] = acc_floor
            mean_p[i] = acc_mean
    elif spec.kind == "binomial_fet":
        theta1, theta2 = params["theta1"], params["theta2"]
        trials = params["trials"]
        for i in range(m):
            r = int(trials[i])
            a_pmf = _stats.binom.pmf(np.arange(r + 1), r, theta1[i])
            b_pmf = _stats.binom.pmf(np.arange(r + 1), r, theta2[i])
            joint = np.outer(a_pmf, b_pmf)
            acc_cdf = acc_floor = acc_mean = 0.0
            for s in range(2 * r + 1):
                lo = max(0, s - r)
                hi = min(r, s)
                a = np.arange(lo, hi + 1)
                w = joint[a, s - a]
                ws = float(w.sum())
                if ws == 0.0:
                    continue
                pv, below, floor = cache.get(
                    ("fet", r, s),
                    lambda r=r, s=s: _logw_fisher_np(r, r, s),
                )
                acc_cdf += float(w[below].sum())
                acc_floor += ws * floor
                acc_mean += float(np.dot(w, pv))
            cdf[i] = acc_cdf
            null_cdf[i] = acc_floor
            mean_p[i] = acc_mean
    else:
        sigma = 1.0 / spec.dispersion
        k_shape = spec.reps_per_group * sigma
        theta1, theta2 = params["theta1"], params["theta2"]
        counts = np.arange(truncation + 1)
        for i in range(m):
            mu1 = spec.reps_per_group * theta1[i]
            mu2 = spec.reps_per_group * theta2[i]
            pmf1 = _stats.nbinom.pmf(counts, k_shape, k_shape / (k_shape + mu1))
            pmf2 = _stats.nbinom.pmf(counts, k_shape, k_shape / (k_shape + mu2))
            acc_cdf = acc_floor = acc_mean = 0.0
            covered = 0.0
            for s in range(truncation + 1):
                a = np.arange(s + 1)
                w = pmf1[a] * pmf2[s - a]
                ws = float(w.sum())
                covered += ws
                if ws == 0.0:
                    continue
                pv, below, floor = cache.get(
                    ("ent", s),
                    lambda s=s: _logw_negbinom_np(s, k_shape),
                )
                acc_cdf += float(w[below].sum())
                acc_floor += ws * floor
                acc_mean += float(np.dot(w, pv))
            deficit = max(deficit, 1.0 - covered)
            cdf[i] = acc_cdf
            null_cdf[i] = acc_floor
            mean_p[i] = acc_mean

    if deficit > 1e-6:
        raise ValueError(
            f"truncation {truncation} leaves {deficit:.3e} probability "
            "mass unaccounted; increase the bound"
        )

    true_pi0 = m0 / m
    return BiasDecomposition(
        generalized_bias=generalized_bias_from_expectations(
            cdf, null_cdf, lam, epsilon, true_pi0
        ),
        pounds_bias=pounds_bias_from_expectations(mean_p, truth),
        cdf_at_lambda=cdf,
        null_cdf_at_lambda=null_cdf,
        mean_pvalue=mean_p,
        mass_deficit=float(deficit),
        pi0=true_pi0,
        lam=lam,
        epsilon=epsilon,
    )


def _logw_binomial_np(n: int) -> np.ndarray:
    from .discrete_tests import _logw_binomial

    return _logw_binomial(n)


def _logw_fisher_np(r1: int, r2: int, s: int) -> np.ndarray:
    from .discrete_tests import _logw_fisher

    return _logw_fisher(r1, r2, s)[0]


def _logw_negbinom_np(s: int, shape_total: float) -> np.ndarray:
    from .discrete_tests import _logw_negbinom

    return _logw_negbinom(s, shape_total)
