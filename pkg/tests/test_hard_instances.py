"""Hard-instance constructions and the explicit low-Hamming coupling."""

import numpy as np
import pytest
from scipy import stats as scipy_stats

from privdist import Pmf, tv_distance
from privdist.hard_instances import (
    HardFamily,
    advice_phat,
    couple_diamond,
    p_bullet,
    p_diamond,
)
from privdist._rng import trial_rng


class TestAdvice:
    def test_reference_example(self):
        fam = HardFamily(4, eta=0.1)
        p_hat = advice_phat(fam)
        assert np.allclose(p_hat.probs, [0.2, 0.3, 0.2, 0.3], atol=1e-15)
        assert tv_distance(p_hat, Pmf.uniform(4)) == pytest.approx(0.1, abs=1e-12)

    def test_zero_bias_is_uniform(self):
        fam = HardFamily(8, eta=0.0)
        assert np.allclose(advice_phat(fam).probs, 1 / 8)

    def test_extreme_bias_two_elements(self):
        fam = HardFamily(2, eta=0.49)
        p_hat = advice_phat(fam)
        assert p_hat.probs[0] == pytest.approx(0.01, abs=1e-12)
        assert p_hat.probs[1] == pytest.approx(0.99, abs=1e-12)

    def test_odd_domain_convention(self):
        # Odd n: last element carries zero mass, construction on n-1.
        fam = HardFamily(5, eta=0.2)
        p_hat = advice_phat(fam)
        assert p_hat.probs[-1] == 0.0
        assert np.allclose(p_hat.probs[:4], advice_phat(HardFamily(4, eta=0.2)).probs)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            HardFamily(4, eta=0.5)
        with pytest.raises(ValueError):
            HardFamily(4, eta=0.2, alpha_prime=0.3)
        with pytest.raises(ValueError):
            HardFamily(4, eta=0.2, eps_prime=0.6)


class TestPBullet:
    def test_tv_exact_every_draw(self):
        fam = HardFamily(10, eta=0.0, eps_prime=0.3)
        for i in range(50):
            p = p_bullet(fam, trial_rng(80, i))
            assert tv_distance(p, Pmf.uniform(10)) == pytest.approx(0.3, abs=1e-12)

    def test_zero_bias(self):
        fam = HardFamily(6, eta=0.0, eps_prime=1e-12)
        p = p_bullet(fam, 0)
        assert np.allclose(p.probs, 1 / 6)

    def test_pair_marginals(self):
        fam = HardFamily(8, eta=0.0, eps_prime=0.4)
        p = p_bullet(fam, 3)
        pair_sums = p.probs.reshape(-1, 2).sum(axis=1)
        assert np.allclose(pair_sums, 2 / 8, atol=1e-15)


class TestPDiamond:
    def test_distance_identities(self):
        fam = HardFamily(20, eta=0.3, alpha_prime=0.05)
        dia = p_diamond(fam)
        p_hat = advice_phat(fam)
        uni = Pmf.uniform(20)
        assert tv_distance(dia, p_hat) == pytest.approx(0.05, abs=1e-12)
        assert tv_distance(dia, uni) == pytest.approx(0.25, abs=1e-12)
        # Collinear biases: distances to the advice and to uniform add to eta.
        assert tv_distance(dia, p_hat) + tv_distance(dia, uni) == pytest.approx(
            fam.eta, abs=1e-12
        )

    def test_alpha_prime_at_eta_gives_uniform(self):
        fam = HardFamily(6, eta=0.2, alpha_prime=0.2)
        assert np.allclose(p_diamond(fam).probs, 1 / 6)

    def test_valid_pmfs_across_family(self):
        for n in (2, 4, 10, 11):
            for eta in (0.0, 0.1, 0.49):
                for ap in (0.0, eta / 2, eta):
                    fam = HardFamily(n, eta=eta, alpha_prime=ap)
                    for pmf in (advice_phat(fam), p_diamond(fam), p_bullet(fam, 1)):
                        assert pmf.probs.min() >= 0
                        assert pmf.probs.sum() == pytest.approx(1.0, abs=1e-12)


class TestCoupling:
    def test_mean_hamming(self):
        fam = HardFamily(100, eta=0.1, alpha_prime=0.0)
        reps, s = 3000, 100
        hams = np.empty(reps)
        for i in range(reps):
            t1, t3 = couple_diamond(fam, s, trial_rng(81, i))
            hams[i] = np.count_nonzero(t1.items != t3.items)
        se = hams.std() / np.sqrt(reps)
        assert abs(hams.mean() - s * 0.1) <= 3 * se

    def test_degenerate_gap_never_disagrees(self):
        fam = HardFamily(10, eta=0.2, alpha_prime=0.2)
        for i in range(20):
            t1, t3 = couple_diamond(fam, 50, trial_rng(82, i))
            assert np.array_equal(t1.items, t3.items)

    def test_marginals_goodness_of_fit(self):
        fam = HardFamily(50, eta=0.3, alpha_prime=0.1)
        pooled_x = np.zeros(50)
        pooled_y = np.zeros(50)
        for i in range(1000):
            t1, t3 = couple_diamond(fam, 100, trial_rng(83, i))
            pooled_x += t1.counts
            pooled_y += t3.counts
        total = pooled_x.sum()
        assert scipy_stats.chisquare(pooled_x, np.full(50, total / 50)).pvalue >= 1e-3
        expected_y = p_diamond(fam).probs * pooled_y.sum()
        assert scipy_stats.chisquare(pooled_y, expected_y).pvalue >= 1e-3

    def test_empty(self):
        fam = HardFamily(4, eta=0.1)
        t1, t3 = couple_diamond(fam, 0, 0)
        assert len(t1) == 0 and len(t3) == 0
