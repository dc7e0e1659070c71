"""True-null-proportion estimators: frozen examples and invariants."""

import numpy as np
import pytest

from discretefdr import (
    PValueProfile,
    Study,
    benjamini_pi0,
    generalized_pi0,
    null_expected_pvalue,
    pounds_hat_pi0,
    pounds_tilde_pi0,
    storey_pi0,
    support_cdf,
)

from conftest import random_study


def _study(pvalues, support):
    pv = np.asarray(pvalues, dtype=np.float64)
    return Study(pv, [np.asarray(support, dtype=np.float64)] * len(pv))


# ---------------------------------------------------------------------------
# support_cdf
# ---------------------------------------------------------------------------


def test_support_cdf_examples():
    assert support_cdf(PValueProfile(0.3, np.array([0.3, 1.0])), 0.5) == 0.3
    assert support_cdf(PValueProfile(0.6, np.array([0.6, 1.0])), 0.5) == 0.0
    assert support_cdf(PValueProfile(0.5, np.array([])), 0.5) == 0.5


def test_support_cdf_at_support_point_is_inclusive():
    prof = PValueProfile(0.3, np.array([0.3, 0.7, 1.0]))
    assert support_cdf(prof, 0.3) == 0.3
    assert support_cdf(prof, 0.7) == 0.7


# ---------------------------------------------------------------------------
# storey
# ---------------------------------------------------------------------------


def test_storey_examples():
    s = _study([0.2, 0.6, 0.8, 1.0], [0.2, 0.6, 0.8, 1.0])
    est = storey_pi0(s, 0.5)
    assert est.raw == 1.5
    assert est.value == 1.0

    s2 = _study([0.6, 1.0], [0.6, 1.0])
    est2 = storey_pi0(s2, 0.5)
    assert est2.raw == 2.0
    assert est2.value == 1.0


def test_storey_lambda_zero_counts_everything_positive():
    s = _study([0.3, 0.9, 1.0], [0.3, 0.9, 1.0])
    assert storey_pi0(s, 0.0).raw == 1.0


def test_storey_validates_lambda():
    s = _study([0.5], [0.5, 1.0])
    with pytest.raises(ValueError):
        storey_pi0(s, 1.0)
    with pytest.raises(ValueError):
        storey_pi0(s, -0.1)


# ---------------------------------------------------------------------------
# generalized
# ---------------------------------------------------------------------------


def test_generalized_frozen_example():
    s = _study([0.2, 0.6, 1.0, 1.0], [0.2, 0.6, 1.0])
    est = generalized_pi0(s, 0.5, 1.0)
    assert est.raw == pytest.approx(0.9, abs=1e-15)


def test_generalized_eps_zero_is_storey_bitwise():
    rng = np.random.default_rng(5)
    for _ in range(50):
        s = random_study(rng, int(rng.integers(2, 60)))
        lam = float(rng.uniform(0.0, 0.95))
        gen = generalized_pi0(s, lam, 0.0)
        sto = storey_pi0(s, lam)
        assert gen.raw == sto.raw
        assert gen.value == sto.value


def test_generalized_empty_supports_equal_storey_for_any_eps():
    rng = np.random.default_rng(6)
    s = random_study(rng, 40, empty_supports=True)
    sto = storey_pi0(s, 0.4)
    for eps in (0.0, 0.3, 1.0):
        gen = generalized_pi0(s, 0.4, eps)
        assert gen.raw == sto.raw


def test_generalized_eps_vector_and_monotonicity():
    rng = np.random.default_rng(7)
    s = random_study(rng, 30)
    lam = 0.5
    eps_lo = np.full(s.m, 0.2)
    eps_hi = np.full(s.m, 0.9)
    assert (
        generalized_pi0(s, lam, eps_hi).raw
        <= generalized_pi0(s, lam, eps_lo).raw
    )


def test_generalized_dominated_by_storey_clipped():
    rng = np.random.default_rng(8)
    for _ in range(40):
        s = random_study(rng, int(rng.integers(2, 50)))
        lam = float(rng.uniform(0.0, 0.9))
        eps = rng.uniform(0.0, 1.0, size=s.m)
        assert (
            generalized_pi0(s, lam, eps).value <= storey_pi0(s, lam).value
        )


def test_generalized_validates_epsilon():
    s = _study([0.5], [0.5, 1.0])
    with pytest.raises(ValueError):
        generalized_pi0(s, 0.5, 1.5)
    with pytest.raises(ValueError):
        generalized_pi0(s, 0.5, np.array([0.5, 0.5]))  # wrong length


# ---------------------------------------------------------------------------
# pounds (doubled mean and support-calibrated)
# ---------------------------------------------------------------------------


def test_pounds_tilde_examples():
    assert pounds_tilde_pi0(_study([0.5, 0.5], [0.5, 1.0])).value == 1.0
    assert pounds_tilde_pi0(_study([0.1, 0.3], [0.1, 0.3, 1.0])).value == (
        pytest.approx(0.4, abs=1e-15)
    )
    est = pounds_tilde_pi0(_study([1.0], [1.0]))
    assert est.raw == 2.0
    assert est.value == 1.0


def test_pounds_hat_frozen_example():
    s = _study([0.5], [0.5, 1.0])
    assert null_expected_pvalue(s.profile(0)) == pytest.approx(0.75)
    est = pounds_hat_pi0(s)
    assert est.value == pytest.approx(2 / 3, abs=1e-12)


def test_pounds_hat_uniform_nulls():
    pv = np.full(5, 0.5)
    s = Study(pv, [np.array([])] * 5)
    assert pounds_hat_pi0(s).value == 1.0


def test_pounds_hat_at_expected_value_is_one():
    sup = np.array([0.5, 1.0])
    expected = 0.75
    s = Study(np.array([expected]), [sup])
    # p equals its null expectation -> ratio 1, clipped to 1
    assert pounds_hat_pi0(s).value == 1.0


# ---------------------------------------------------------------------------
# benjamini
# ---------------------------------------------------------------------------


def test_benjamini_frozen_examples():
    pv = np.array([0.01, 0.05, 0.1, 0.15, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0])
    s = Study(pv, [np.array([])] * 10)
    est = benjamini_pi0(s)
    assert est.raw == pytest.approx((10 - 5 + 1) / (10 * 0.8), abs=1e-12)

    s2 = _study([0.1, 0.4, 0.5, 1.0], [0.1, 0.4, 0.5, 1.0])
    est2 = benjamini_pi0(s2)
    assert est2.raw == pytest.approx(1.25, abs=1e-12)
    assert est2.value == 1.0


def test_benjamini_median_at_one_is_guarded():
    s = _study([1.0, 1.0], [1.0])
    est = benjamini_pi0(s)
    assert est.value == 1.0
    assert np.isinf(est.raw)


def test_benjamini_needs_two():
    with pytest.raises(ValueError):
        benjamini_pi0(_study([0.5], [0.5, 1.0]))


# ---------------------------------------------------------------------------
# structural invariants
# ---------------------------------------------------------------------------


def test_all_values_clipped_to_unit_interval():
    rng = np.random.default_rng(9)
    for _ in range(25):
        s = random_study(rng, int(rng.integers(2, 40)))
        lam = float(rng.uniform(0.0, 0.9))
        for est in (
            storey_pi0(s, lam),
            generalized_pi0(s, lam, 1.0),
            pounds_tilde_pi0(s),
            pounds_hat_pi0(s),
            benjamini_pi0(s),
        ):
            assert 0.0 <= est.value <= 1.0
            assert est.value == max(0.0, min(1.0, est.raw))


def test_pi0_estimate_json_shape():
    s = _study([0.2, 0.6, 1.0, 1.0], [0.2, 0.6, 1.0])
    d = generalized_pi0(s, 0.5, 1.0).to_json_dict()
    assert d["method"] == "generalized"
    assert set(d) >= {"method", "raw", "value", "lambda", "epsilon"}


def test_study_validation():
    with pytest.raises(ValueError):
        Study(np.array([]), [])
    with pytest.raises(ValueError):
        Study(np.array([0.5]), [])
