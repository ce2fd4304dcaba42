"""Identity tester: Scheffe machinery, branch choice, and error rates."""

import inspect

import numpy as np
import pytest

from privdist import (
    AdviceSpec,
    Branch,
    IdentityInstance,
    Pmf,
    PrivacyBudget,
    SampleMultiset,
    augmented_identity_test,
    baseline_private_identity_test,
    branch_select,
    identity_test,
    scheffe_set,
    sigma_statistic,
    tv_distance,
)
from privdist.dist_core import Outcome
from privdist.identity import (
    augmented_identity_budget,
    baseline_identity_budget,
    private_identity_budget,
)
from privdist.hard_instances import HardFamily, advice_phat, p_bullet
from privdist._rng import trial_rng


def make_instance(n=200, eta=0.3, alpha=0.05, eps=0.25, xi=0.5):
    q = Pmf.uniform(n)
    p_hat = advice_phat(HardFamily(n, eta=eta))
    return IdentityInstance(q, AdviceSpec(p_hat, alpha), eps, PrivacyBudget(xi))


class TestScheffeSet:
    def test_reference_example(self):
        p_hat = Pmf(np.array([0.2, 0.3, 0.2, 0.3]))
        q = Pmf.uniform(4)
        s = scheffe_set(p_hat, q)
        assert s == {0, 2}
        assert q.mass(s) == pytest.approx(0.5)
        assert p_hat.mass(s) == pytest.approx(0.4)
        assert q.mass(s) - p_hat.mass(s) == pytest.approx(tv_distance(p_hat, q), abs=1e-12)

    def test_equal_distributions(self):
        q = Pmf.uniform(5)
        assert scheffe_set(q, q) == frozenset()

    def test_disjoint_supports(self):
        p_hat = Pmf(np.array([1.0, 0.0]))
        q = Pmf(np.array([0.0, 1.0]))
        s = scheffe_set(p_hat, q)
        assert s == {1}
        assert q.mass(s) - p_hat.mass(s) == pytest.approx(1.0)


class TestSigmaStatistic:
    def test_direct_count(self):
        samples = SampleMultiset(np.array([0, 2, 1, 3]), 4)
        assert sigma_statistic(samples, {0, 2}) == 0.5

    def test_saturation(self):
        samples = SampleMultiset(np.array([1, 1, 1]), 3)
        assert sigma_statistic(samples, {1}) == 1.0

    def test_empty_sample_set(self):
        with pytest.raises(ValueError):
            sigma_statistic(SampleMultiset(np.array([], dtype=np.int64), 3), {0})

    def test_mean_matches_set_mass(self):
        from privdist import draw_fixed

        p = Pmf.uniform(4)
        vals = [
            sigma_statistic(draw_fixed(p, 10_000, trial_rng(50, i)), {0, 2})
            for i in range(50)
        ]
        se = np.sqrt(0.25 / 10_000)
        assert abs(np.mean(vals) - 0.5) <= 3 * se / np.sqrt(len(vals))


class TestBranchSelect:
    def test_eta_equals_alpha_is_baseline(self):
        inst = make_instance(eta=0.05, alpha=0.05)
        assert inst.eta == pytest.approx(0.05, abs=1e-12)
        assert branch_select(inst) is Branch.BASELINE

    def test_large_domain_prefers_augmented(self):
        inst = make_instance(n=10**6, eta=0.45, alpha=0.05, eps=0.1, xi=1.0)
        assert branch_select(inst) is Branch.AUGMENTED

    def test_tiny_gap_prefers_baseline(self):
        inst = make_instance(n=4, eta=0.02, alpha=0.01, eps=1.0, xi=10.0)
        assert branch_select(inst) is Branch.BASELINE

    def test_public_inputs_only(self):
        # Structural: the selector sees the instance only, never samples.
        params = inspect.signature(branch_select).parameters
        assert list(params) == ["instance"]


class TestAugmentedBranch:
    def test_budget_formula(self):
        assert augmented_identity_budget(0.25, 0.5) == 2048 + 192

    def test_never_accepts(self):
        inst = make_instance()
        for i in range(300):
            out = augmented_identity_test(inst, inst.q, trial_rng(51, i))
            assert out in (Outcome.REJECT, Outcome.BOT)

    def test_null_rarely_rejects(self):
        inst = make_instance()
        rejects = sum(
            augmented_identity_test(inst, inst.q, trial_rng(52, i)) is Outcome.REJECT
            for i in range(400)
        )
        assert rejects / 400 <= 0.12

    def test_good_advice_rarely_bots(self):
        inst = make_instance()
        bots = sum(
            augmented_identity_test(inst, inst.advice.p_hat, trial_rng(53, i))
            is Outcome.BOT
            for i in range(400)
        )
        assert bots / 400 <= 0.12

    def test_requires_augmented_branch(self):
        inst = make_instance(eta=0.01, alpha=0.05)
        with pytest.raises(ValueError):
            augmented_identity_test(inst, inst.q, 0)

    def test_release_density_ratio_within_budget(self):
        # Neighboring sample sets move the set fraction by at most 1/s, and
        # the release adds Lap(1/(s*xi)) noise: densities differ by <= e^xi.
        from privdist.dp import laplace_density_log_ratio

        s, xi = 7, 0.8
        grid = np.linspace(-3, 3, 10_001)
        log_ratio = laplace_density_log_ratio(0.0, 1 / s, 1 / (s * xi), grid)
        assert log_ratio.max() <= xi + 1e-12

    def test_triangle_soundness(self):
        # Whenever tv(p, p_hat) <= alpha, the set-mass gap to q is at least
        # eta - alpha: pure arithmetic on constructed pmfs.
        for eta in (0.2, 0.3, 0.45):
            for alpha in (0.0, 0.05, 0.1):
                if alpha >= eta:
                    continue
                inst = make_instance(n=50, eta=eta, alpha=alpha)
                fam = HardFamily(50, eta=eta, alpha_prime=min(alpha, eta))
                from privdist.hard_instances import p_diamond

                p = p_diamond(fam)  # alpha-close to the advice
                assert tv_distance(p, inst.advice.p_hat) <= alpha + 1e-12
                gap = abs(p.mass(inst.scheffe) - inst.q.mass(inst.scheffe))
                assert gap >= inst.eta - alpha - 1e-12


class TestBaseline:
    def test_budget_formula_terms(self):
        assert private_identity_budget(100, 0.3, 1.0) == pytest.approx(
            10 / 0.09 + 10 / 0.3 + 100 ** (1 / 3) / 0.3 ** (4 / 3) + 1 / 0.3
        )
        assert baseline_identity_budget(100, 0.3, 1.0) >= private_identity_budget(100, 0.3, 1.0)

    def test_null_rejection_rate(self):
        q = Pmf.uniform(100)
        rejects = sum(
            baseline_private_identity_test(q, 0.3, PrivacyBudget(1.0), q, trial_rng(54, i))
            is Outcome.REJECT
            for i in range(400)
        )
        assert rejects / 400 <= 0.12

    def test_far_acceptance_rate(self):
        q = Pmf.uniform(100)
        fam = HardFamily(100, eta=0.0, eps_prime=0.3)
        accepts = 0
        for i in range(400):
            p = p_bullet(fam, trial_rng(55, 2 * i))
            accepts += (
                baseline_private_identity_test(q, 0.3, PrivacyBudget(1.0), p, trial_rng(55, 2 * i + 1))
                is Outcome.ACCEPT
            )
        assert accepts / 400 <= 0.12

    def test_verdicts_binary(self):
        q = Pmf.uniform(20)
        for i in range(50):
            out = baseline_private_identity_test(q, 0.5, PrivacyBudget(1.0), q, trial_rng(56, i))
            assert out in (Outcome.ACCEPT, Outcome.REJECT)


class TestDispatch:
    def test_identity_test_routes_to_baseline(self):
        inst = make_instance(eta=0.01, alpha=0.05)
        out = identity_test(inst, inst.q, 1)
        assert out in (Outcome.ACCEPT, Outcome.REJECT)

    def test_identity_test_routes_to_augmented(self):
        inst = make_instance()
        out = identity_test(inst, inst.q, 1)
        assert out in (Outcome.REJECT, Outcome.BOT)

    def test_instance_invariants(self):
        inst = make_instance(n=4, eta=0.1)
        assert inst.eta == pytest.approx(
            abs(inst.q.mass(inst.scheffe) - inst.advice.p_hat.mass(inst.scheffe)),
            abs=1e-12,
        )
