"""Simulation scenarios, replication harness, exact bias decomposition."""

import math

import numpy as np
import pytest

from discretefdr import (
    ScenarioSpec,
    ThresholdResult,
    bias_decomposition,
    compute_pi0,
    false_discovery_proportion,
    generalized_bias_from_expectations,
    generate_scenario,
    pounds_bias_from_expectations,
    run_replications,
)
from discretefdr.sim import _draw_parameters, _replication_rng


def _spec(**kw):
    base = dict(kind="poisson_bin", m=40, pi0=0.5, reps=3, seed=0)
    base.update(kw)
    return ScenarioSpec(**base)


# ---------------------------------------------------------------------------
# scenario generation
# ---------------------------------------------------------------------------


def test_true_null_count_is_rounded_share():
    spec = _spec(m=10, pi0=0.5)
    assert spec.m0 == 5
    study = generate_scenario(spec, 0)
    assert study.truth.tolist() == [True] * 5 + [False] * 5


def test_generation_is_reproducible_and_rep_indexed():
    spec = _spec(m=30, seed=42)
    a = generate_scenario(spec, 2)
    b = generate_scenario(spec, 2)
    assert np.array_equal(a.pvalues, b.pvalues)
    assert all(np.array_equal(x, y) for x, y in zip(a.supports, b.supports))
    assert np.array_equal(a.truth, b.truth)
    c = generate_scenario(spec, 3)
    assert not np.array_equal(a.pvalues, c.pvalues)


@pytest.mark.parametrize("kind", ["poisson_bin", "binomial_fet", "negbinom_ent"])
def test_each_family_generates_valid_studies(kind):
    spec = _spec(kind=kind, m=25, pi0=0.6)
    study = generate_scenario(spec, 0)
    assert study.m == 25
    assert np.all(study.pvalues > 0.0) and np.all(study.pvalues <= 1.0)
    for pv, support in zip(study.pvalues, study.supports):
        assert support.shape[0] >= 1
        assert support[-1] == 1.0
        assert pv in support


def test_cap_transform_is_accepted():
    spec = _spec(kind="binomial_fet", theta2_transform="cap", m=10)
    params = _draw_parameters(spec, _replication_rng(spec, 0))
    assert np.all(params["theta2"] <= 1.0)


def test_spec_validation():
    with pytest.raises(ValueError, match="kind"):
        _spec(kind="uniform")
    with pytest.raises(ValueError, match="pi0"):
        _spec(pi0=0.0)
    with pytest.raises(ValueError, match="pi0"):
        _spec(pi0=1.0)
    with pytest.raises(ValueError, match="m "):
        _spec(m=0)
    with pytest.raises(ValueError, match="reps"):
        _spec(reps=0)
    with pytest.raises(ValueError, match="theta2_transform"):
        _spec(kind="binomial_fet", theta2_transform="logit")


def test_mean_file_supplies_group_means(tmp_path):
    means = np.array([1.5, 2.0, 4.0, 8.0, 2.5])
    path = tmp_path / "means.txt"
    np.savetxt(path, means)
    spec = _spec(kind="negbinom_ent", m=4, mean_file=str(path))
    params = _draw_parameters(spec, _replication_rng(spec, 0))
    assert np.array_equal(params["theta1"], means[:4])

    short = _spec(kind="negbinom_ent", m=6, mean_file=str(path))
    with pytest.raises(ValueError, match="mean file"):
        _draw_parameters(short, _replication_rng(short, 0))


# ---------------------------------------------------------------------------
# replication harness
# ---------------------------------------------------------------------------


def test_false_discovery_proportion_counting():
    spec = _spec(m=20, pi0=0.5)
    study = generate_scenario(spec, 0)
    rejected = np.array([0, 1, 10, 11])  # two true nulls, two signals
    res = ThresholdResult(0.5, 0.05, 4, rejected)
    assert false_discovery_proportion(study, res) == 0.5
    empty = ThresholdResult(0.0, math.nan, 0, np.empty(0, dtype=np.int64))
    assert false_discovery_proportion(study, empty) == 1.0


def test_workers_do_not_change_replication_arrays():
    spec = _spec(m=50, reps=6, seed=5)
    serial = run_replications(spec, workers=1)
    parallel = run_replications(spec, workers=2)
    assert np.array_equal(serial.pi0_estimates, parallel.pi0_estimates)
    assert np.array_equal(serial.thresholds, parallel.thresholds)
    assert np.array_equal(serial.rejections, parallel.rejections)
    assert np.array_equal(serial.fdp, parallel.fdp)


def test_adjusted_procedure_rejects_at_least_exceedance_procedure():
    spec = _spec(m=120, pi0=0.7, reps=8, seed=9)
    out = run_replications(spec, procedures=("generalized", "storey"))
    assert np.all(out.rejections[:, 0, :] >= out.rejections[:, 1, :])
    assert np.all(out.thresholds[:, 0, :] >= out.thresholds[:, 1, :])


def test_all_null_scenario_pushes_exceedance_estimate_high():
    spec = _spec(m=200, pi0=0.5, reps=20, rho_low=1.0, rho_high=1.0)
    out = run_replications(spec, pi0_methods=("storey",), procedures=())
    assert out.pi0_estimates.mean() >= 0.9


def test_single_replication_degenerates_sd_to_zero():
    spec = _spec(reps=1)
    out = run_replications(spec)
    assert out.degenerate_sd
    agg = out.aggregate()
    assert agg["degenerate_sd"] is True
    for stats in agg["pi0_estimators"].values():
        assert stats["sd_excess"] == 0.0
        assert stats["se_excess"] == 0.0


def test_roster_validation():
    spec = _spec()
    with pytest.raises(ValueError, match="roster"):
        run_replications(spec, pi0_methods=(), procedures=())
    with pytest.raises(ValueError, match="pi0 method"):
        run_replications(spec, pi0_methods=("qvalue",))
    with pytest.raises(ValueError, match="procedure"):
        run_replications(spec, procedures=("bonferroni",))


def test_aggregate_layout():
    spec = _spec(reps=2, alpha_levels=(0.05, 0.1))
    agg = run_replications(spec).aggregate()
    assert set(agg["pi0_estimators"]) == {
        "storey", "generalized", "pounds_tilde", "benjamini",
    }
    assert set(agg["procedures"]) == {
        "generalized", "storey", "bh", "adaptive_bh",
    }
    for per_alpha in agg["procedures"].values():
        assert set(per_alpha) == {"0.05", "0.1"}
        for stats in per_alpha.values():
            assert set(stats) == {
                "mean_fdp", "sd_fdp", "se_fdp",
                "mean_rejections", "mean_threshold",
            }


# ---------------------------------------------------------------------------
# exact bias decomposition
# ---------------------------------------------------------------------------


def test_bias_formula_at_lambda_zero():
    b = generalized_bias_from_expectations(
        np.zeros(4), np.zeros(4), lam=0.0, epsilon=0.0, pi0=0.5
    )
    assert b == 0.5


def test_bias_is_epsilon_free_for_uniform_nulls():
    # when every expected support floor equals lambda, the adjustment
    # cancels and the bias no longer depends on epsilon
    rng = np.random.default_rng(30)
    cdf = rng.uniform(0.0, 1.0, 8)
    lam = 0.5
    base = generalized_bias_from_expectations(
        cdf, np.full(8, lam), lam, 0.0, pi0=0.6
    )
    for eps in (0.25, 0.7, 1.0):
        b = generalized_bias_from_expectations(
            cdf, np.full(8, lam), lam, eps, pi0=0.6
        )
        assert b == pytest.approx(base, abs=1e-12)


def test_doubled_mean_bias_splits_by_truth():
    mean_p = np.array([0.5, 0.5, 0.3, 0.2])
    truth = np.array([True, True, False, False])
    b = pounds_bias_from_expectations(mean_p, truth)
    assert b == pytest.approx(2.0 / 4.0 * (0.3 + 0.2), abs=1e-15)


def test_bias_decomposition_structure():
    spec = _spec(m=6, pi0=0.5, reps=1)
    dec = bias_decomposition(spec, lam=0.0, epsilon=0.0)
    assert dec.pi0 == spec.m0 / spec.m
    assert dec.mass_deficit <= 1e-6
    assert dec.cdf_at_lambda.shape == (6,)
    # at lambda 0 no p-value can sit at or below the cutoff
    assert np.all(dec.cdf_at_lambda == 0.0)
    assert dec.generalized_bias == pytest.approx(1.0 - dec.pi0, abs=1e-12)
    assert 0.0 < dec.mean_pvalue.min() <= dec.mean_pvalue.max() <= 1.0


def test_bias_decomposition_truncation_guard():
    spec = _spec(m=4, pi0=0.5, reps=1)
    with pytest.raises(ValueError, match="bound"):
        bias_decomposition(spec, lam=0.5, epsilon=1.0, truncation=2)


def test_bias_decomposition_matches_monte_carlo():
    # near-degenerate parameter draws so every replication shares (to
    # ~1e-9) the parameters the exact enumeration conditions on
    spec = _spec(
        m=40,
        pi0=0.5,
        reps=300,
        seed=17,
        pareto_shape=1e9,
        rho_low=2.0,
        rho_high=2.0,
    )
    dec = bias_decomposition(spec, lam=0.5, epsilon=1.0)
    raws = np.array(
        [
            compute_pi0(generate_scenario(spec, r), "generalized", 0.5, 1.0).raw
            for r in range(spec.reps)
        ]
    )
    se = raws.std(ddof=1) / math.sqrt(spec.reps)
    assert abs(raws.mean() - (dec.pi0 + dec.generalized_bias)) <= 5 * se + 1e-3
