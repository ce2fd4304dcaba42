"""Laplace mechanism and exhaustive-sensitivity oracle checks."""

import math

import numpy as np
import pytest

from privdist import PrivacyBudget, SensitivityBound, exhaustive_sensitivity, laplace_sample, privatize
from privdist.dp import (
    CountDatasetFamily,
    laplace_density_log_ratio,
    laplace_icdf,
)
from privdist._rng import as_generator


class TestLaplace:
    def test_icdf_midpoint_exact_zero(self):
        assert laplace_icdf(0.5, 3.7) == 0.0

    def test_tail_probability(self):
        draws = laplace_sample(1.0, 11, size=100_000)
        t = math.log(20.0)
        rate = float(np.mean(np.abs(draws) >= t))
        se = math.sqrt(0.05 * 0.95 / draws.size)
        assert abs(rate - 0.05) <= 3 * se

    def test_moments(self):
        b = 2.0
        draws = laplace_sample(b, 13, size=200_000)
        assert abs(draws.mean()) <= 3 * b * math.sqrt(2 / draws.size)
        var = draws.var()
        # Var of the variance estimator: (E X^4 - (E X^2)^2)/m = 20 b^4 / m.
        se_var = math.sqrt(20 * b**4 / draws.size)
        assert abs(var - 2 * b * b) <= 3 * se_var

    def test_invalid_scale(self):
        with pytest.raises(ValueError):
            laplace_sample(0.0, 1)


class TestPrivatize:
    def test_vanishing_noise(self):
        out = privatize(4.25, 1e-12, PrivacyBudget(1.0), 5)
        assert abs(out - 4.25) <= 1e-9

    def test_noise_variance(self):
        rng = as_generator(17)
        draws = np.array([privatize(0.0, 2.0, PrivacyBudget(1.0), rng) for _ in range(100_000)])
        se_var = math.sqrt(20 * 2.0**4 / draws.size)
        assert abs(draws.var() - 8.0) <= 3 * se_var

    def test_requires_positive_sensitivity(self):
        with pytest.raises(ValueError):
            privatize(1.0, SensitivityBound(0.0, "analytic"), PrivacyBudget(1.0), 1)

    def test_density_ratio_bounded_by_privacy(self):
        # For any outputs of privatize on neighbors with |v - v'| <= delta,
        # the density ratio is at most e^xi; check on a grid.
        delta, xi = 0.5, 0.8
        scale = delta / xi
        grid = np.linspace(-20, 20, 20_001)
        log_ratio = laplace_density_log_ratio(0.0, delta, scale, grid)
        assert log_ratio.max() <= xi + 1e-12
        # The bound is attained outside the interval between the centers.
        assert log_ratio.max() == pytest.approx(xi, abs=1e-12)


class TestExhaustiveSensitivity:
    def test_constant_function(self):
        family = CountDatasetFamily(3, (4,))
        bound = exhaustive_sensitivity(lambda ds: 1.0, family)
        assert bound.value == 0.0 and bound.provenance == "exhaustive"

    def test_set_fraction_is_one_over_s(self):
        for s in range(1, 7):
            family = CountDatasetFamily(4, (s,))
            stat = lambda ds: (ds[0][0] + ds[0][2]) / s
            assert exhaustive_sensitivity(stat, family).value == pytest.approx(1 / s, abs=1e-15)

    def test_caps_enforced(self):
        with pytest.raises(ValueError):
            CountDatasetFamily(7, (2,))
        with pytest.raises(ValueError):
            CountDatasetFamily(3, (9,))
        with pytest.raises(ValueError):
            CountDatasetFamily(3, (8, 8, 8))

    def test_membership_restricts_pairs(self):
        # Restricting to datasets with no element count above 2 caps the
        # statistic's reachable change.
        family = CountDatasetFamily(
            3, (4,), member=lambda ds: max(ds[0]) <= 2
        )
        stat = lambda ds: float(max(ds[0]))
        assert exhaustive_sensitivity(stat, family).value <= 1.0
