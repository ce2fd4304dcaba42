"""Private closeness testing with an advice distribution.

Pipeline: schedule the sample budgets from public inputs, Poissonize the
draws, flatten in two steps, balance the dataset, privately verify that the
flattened norm is as small as good advice implies (else report bad advice),
then run the private core test on the derandomized two-sample collision
statistic. Configurations where advice cannot help are delegated to a
non-advice baseline built from the same pipeline with uniform advice and the
verification stage disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import SeedLike, as_generator
from .dist_core import Outcome, Pmf, SampleMultiset
from .dp import PrivacyBudget, SensitivityBound, laplace_sample
from .flattening import (
    BalanceParams,
    Bucketing,
    DatasetSplit,
    collision_l2_estimate,
    collision_l2_sensitivity,
    composition_balance_param,
    draw_level1,
    l2_gate_threshold,
    rebalance_flattening,
    step1_buckets,
    step2_buckets,
)
from .identity import Branch

# Tail budget of the advice gate: the BOT probability under good advice is
# split 0.05 (Markov on the flattened norm) + 0.04 (Laplace tail), which
# requires the noise scale to stay below threshold/(3*ln 12.5).
_GATE_TAIL_LOG = math.log(12.5)

# Multiplier on the privacy term of the test budget; keeps the core noise
# scale at most an eighth of the decision threshold in every regime.
TEST_PRIVACY_CONST = 12.0

# Calibrated multiplier for the non-advice baseline budget (Monte Carlo).
BASELINE_BUDGET_CONST = 10.0

# Analytic sensitivity constant of the core statistic, validated by
# exhaustive enumeration on small balanced instances.
CORE_SENSITIVITY_CONST = 4.0


@dataclass(frozen=True)
class ClosenessSchedule:
    """Budgets for one closeness instance; a pure function of public inputs."""

    branch: Branch
    n: int
    eps: float
    alpha: float
    xi: float
    k: int
    ell: int
    s: int
    A: float


@dataclass(frozen=True)
class CollisionStat:
    """Released-statistic value with the sensitivity bound of its shape."""

    value: float
    sensitivity: SensitivityBound


def core_sensitivity_bound(s: int, k: int) -> float:
    """Analytic bound 4*(s+k)/k on the core statistic's sensitivity."""
    return CORE_SENSITIVITY_CONST * (s + k) / max(k, 1)


def schedule_k_terms(n: int, eps: float, alpha: float, xi: float) -> dict[str, float]:
    """The competing lower bounds on the flattening/estimation budget."""
    A = composition_balance_param(n)
    return {
        "advice": n ** (2.0 / 3.0) * alpha ** (1.0 / 3.0) / eps ** (4.0 / 3.0),
        "statistical": math.sqrt(n) / eps**2,
        "privacy": math.sqrt(n) / (eps * math.sqrt(xi)),
        "log_privacy": math.sqrt(n) * math.log(n) / math.sqrt(xi),
        "log_sq": math.log(n) ** 2 / xi,
        "gate_noise": float(_gate_noise_floor(n, xi, A)),
    }


def _gate_noise_floor(n: int, xi: float, A: float) -> int:
    """Smallest k = ell keeping the advice gate's Laplace noise in budget.

    The gate threshold is at least 120/n and the stage runs at xi/2, so the
    noise scale 8*sensitivity/xi must stay below (120/n)/(3*ln 12.5). The
    sensitivity at k = ell is 2*(4A^2 + 2A)/(k^2 - k), monotone in k.
    """
    delta_max = xi * (120.0 / n) / (24.0 * _GATE_TAIL_LOG)
    target = 2.0 * (4.0 * A * A + 2.0 * A) / delta_max
    # Solve k^2 - k >= target.
    k = math.ceil(0.5 * (1.0 + math.sqrt(1.0 + 4.0 * target)))
    return max(k, 2)


def baseline_closeness_budget(n: int, eps: float, xi: float) -> int:
    """Per-role budget of the non-advice baseline (calibrated constants)."""
    raw = (
        n ** (2.0 / 3.0) / eps ** (4.0 / 3.0)
        + math.sqrt(n) / eps**2
        + 1.0 / (eps * xi)
        + math.sqrt(n) / (eps * math.sqrt(xi))
        + n ** (1.0 / 3.0) / (eps ** (4.0 / 3.0) * xi ** (2.0 / 3.0))
    )
    return math.ceil(BASELINE_BUDGET_CONST * raw)


def schedule(n: int, eps: float, alpha: float, xi: float) -> ClosenessSchedule:
    """Budgets and branch for a closeness instance.

    Baseline iff eps < n^(-1/4) or eps^2 * xi < 1/n (unit-constant reading).
    Otherwise k = ell is the max of the advice, statistical, privacy, and
    noise-floor terms, and s solves its own fixed-point equation (the privacy
    part of s depends on s through the core sensitivity).
    """
    if not 0 < eps <= 1 or not 0 < alpha <= 1:
        raise ValueError("eps and alpha must lie in (0, 1]")
    if xi <= 0:
        raise ValueError("xi must be positive")
    A = composition_balance_param(n)
    if eps < n ** -0.25 or eps * eps * xi < 1.0 / n:
        m = baseline_closeness_budget(n, eps, xi)
        return ClosenessSchedule(Branch.BASELINE, n, eps, alpha, xi, m, 0, m, A)
    terms = schedule_k_terms(n, eps, alpha, xi)
    k = math.ceil(max(terms.values()))
    s = k
    for _ in range(200):
        nxt = math.ceil(
            (n + k) / eps**2 * math.sqrt(2.0 * alpha / k + 4.0 / n)
            + TEST_PRIVACY_CONST
            * math.sqrt((n + k) * (s + k) / k)
            / (eps * math.sqrt(xi))
        )
        if nxt == s:
            break
        s = nxt
    return ClosenessSchedule(Branch.AUGMENTED, n, eps, alpha, xi, k, k, s, A)


def two_sample_collision_statistic(
    Tp: SampleMultiset, Tq: SampleMultiset, bucketing: Bucketing
) -> CollisionStat:
    """Two-sample collision statistic averaged over bucket assignments.

    Closed form over level-1 counts: sum of ((x-y)^2 - x - y)/(k_ij + 1).
    Equals the exact average, over all assignments of the test samples to
    level-2 buckets, of the bucket-count statistic sum((X-Y)^2 - X - Y);
    its mean under Poissonized draws is s^2 times the squared l2 distance of
    the flattened distributions.
    """
    if Tp.domain != bucketing.n_level1 or Tq.domain != bucketing.n_level1:
        raise ValueError("test samples must live on the level-1 domain")
    x = Tp.counts
    y = Tq.counts
    d = x - y
    numer = d * d - x - y
    value = float(np.sum(numer / bucketing.level2))
    k_total = int(bucketing.flattening_counts.sum())
    sens = core_sensitivity_bound(max(len(Tp), len(Tq)), k_total)
    return CollisionStat(value, SensitivityBound(sens, "analytic"))


def core_test_threshold(s: int, eps: float, n_flattened: int) -> float:
    """Accept/reject split point: half the smallest far-case mean.

    Far distributions keep l1 distance above 2*eps after flattening, so the
    statistic's mean is at least 4 s^2 eps^2 / n''; the threshold sits at an
    eighth of that floor's multiple, s^2 eps^2 / (2 n'')."""
    return s * s * eps * eps / (2.0 * n_flattened)


def core_private_closeness_test(
    split_p: DatasetSplit,
    split_q: DatasetSplit,
    bucketing: Bucketing,
    sched: ClosenessSchedule,
    budget: PrivacyBudget,
    seed: SeedLike,
) -> Outcome:
    """Core private test on the flattened pair; ACCEPT iff the noised
    statistic stays at or below the threshold."""
    if split_p.T is None or split_q.T is None:
        raise ValueError("both test multisets are required")
    rng = as_generator(seed)
    stat = two_sample_collision_statistic(split_p.T, split_q.T, bucketing)
    noise_scale = 2.0 * core_sensitivity_bound(sched.s, sched.k) / budget.xi
    released = stat.value + laplace_sample(noise_scale, rng)
    theta = core_test_threshold(sched.s, sched.eps, bucketing.n_flattened)
    return Outcome.ACCEPT if released <= theta else Outcome.REJECT


def _run_pipeline(
    p: Pmf,
    q: Pmf,
    p_hat: Pmf,
    alpha: float,
    sched: ClosenessSchedule,
    xi: float,
    gate_enabled: bool,
    seed: SeedLike,
) -> Outcome:
    rng = as_generator(seed)
    n = p.n
    k, ell, s = sched.k, sched.ell, sched.s
    khat_p = int(rng.poisson(k))
    khat_q = int(rng.poisson(k))
    lhat = int(rng.poisson(ell)) if gate_enabled else 0
    guard_budget = ell if gate_enabled else s
    if khat_p + khat_q + lhat > 10 * (k + guard_budget):
        return Outcome.REJECT
    shat_p = int(rng.poisson(s))
    shat_q = int(rng.poisson(s))

    level1 = step1_buckets(p_hat)
    f_p = draw_level1(p, level1, khat_p, rng)
    f_q = draw_level1(q, level1, khat_q, rng)
    flattening = SampleMultiset(
        np.concatenate([f_p.items, f_q.items]), f_p.domain
    )
    estimation = draw_level1(p, level1, lhat, rng) if gate_enabled else None
    test_p = draw_level1(p, level1, shat_p, rng)
    test_q = draw_level1(q, level1, shat_q, rng)

    constraints = []
    if gate_enabled and estimation is not None:
        constraints.append((estimation.counts, sched.A * ell / k))
    constraints.append((test_p.counts, sched.A * s / k))
    constraints.append((test_q.counts, sched.A * s / k))
    flattening = rebalance_flattening(flattening, constraints, rng)
    bucketing = step2_buckets(flattening, level1)

    if gate_enabled:
        if lhat < 2:
            return Outcome.BOT
        stage = PrivacyBudget(xi / 2.0)
        params = BalanceParams(A=sched.A, k=k, ell=ell, test_mean=s)
        delta = collision_l2_sensitivity(params, lhat)
        estimate = collision_l2_estimate(estimation, bucketing)
        released = estimate + laplace_sample(4.0 * delta.value / stage.xi, rng)
        if released > l2_gate_threshold(alpha, k, n):
            return Outcome.BOT
        core_budget = PrivacyBudget(xi / 2.0)
    else:
        core_budget = PrivacyBudget(xi)

    return core_private_closeness_test(
        DatasetSplit(flattening, estimation, test_p),
        DatasetSplit(flattening, None, test_q),
        bucketing,
        sched,
        core_budget,
        rng,
    )


def augmented_closeness_test(
    p_source: Pmf,
    q_source: Pmf,
    advice,
    n: int,
    eps: float,
    xi: float,
    seed: SeedLike,
) -> Outcome:
    """Full advice-assisted private closeness tester.

    The advice verification stage and the core test each run at xi/2, so the
    whole release is xi-differentially private under basic composition.
    """
    if p_source.n != n or q_source.n != n or advice.p_hat.n != n:
        raise ValueError("all distributions must live on [n]")
    sched = schedule(n, eps, advice.alpha, xi)
    if sched.branch is Branch.BASELINE:
        return baseline_private_closeness_test(p_source, q_source, n, eps, xi, seed)
    return _run_pipeline(
        p_source, q_source, advice.p_hat, advice.alpha, sched, xi, True, seed
    )


def baseline_private_closeness_test(
    p_source: Pmf,
    q_source: Pmf,
    n: int,
    eps: float,
    xi: float,
    seed: SeedLike,
) -> Outcome:
    """Non-advice private closeness tester: the same pipeline with uniform
    advice and the verification stage disabled, so flattening is driven by
    samples from both distributions alone. Verdicts are ACCEPT/REJECT only."""
    m = baseline_closeness_budget(n, eps, xi)
    sched = ClosenessSchedule(
        Branch.BASELINE, n, eps, 1.0, xi, m, 0, m, composition_balance_param(n)
    )
    return _run_pipeline(
        p_source, q_source, Pmf.uniform(n), 1.0, sched, xi, False, seed
    )
