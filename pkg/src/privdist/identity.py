"""Private identity testing with an advice distribution.

The advice-driven branch releases a single noised statistic: the fraction of
samples landing in the Scheffe set of the advice and the reference. The
non-advice branch is a self-contained pure-DP identity tester built on the
noised l1 statistic with a publicly simulated null threshold.

Branch choice depends only on public inputs, never on samples.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._rng import SeedLike, as_generator
from .dist_core import Outcome, Pmf, SampleMultiset, draw_fixed, tv_distance
from .dp import PrivacyBudget, SensitivityBound, privatize

# Sample-size constants for the advice branch, chosen so that both deviation
# bounds hold with margin: 2*exp(-2*(g/8)^2 * s) <= 0.05 needs
# s >= 32*ln(40)/g^2 (rounded up to 128/g^2), and the Laplace tail
# exp(-g*xi*s/8) <= 0.05 needs s >= 8*ln(20)/(g*xi) (rounded up to 24/(g*xi)).
HOEFFDING_CONST = 128.0
LAPLACE_CONST = 24.0

# Calibrated multiplier for the non-advice branch budget; fixed by Monte
# Carlo so the desk-scale error rates stay within the acceptance bounds.
BASELINE_BUDGET_CONST = 2.0

# Public null simulation used to set the baseline threshold.
BASELINE_NULL_SIMS = 4001
BASELINE_NULL_QUANTILE = 0.95


class Branch(enum.Enum):
    AUGMENTED = "augmented"
    BASELINE = "baseline"


@dataclass(frozen=True)
class AdviceSpec:
    """Advice distribution with its claimed accuracy."""

    p_hat: Pmf
    alpha: float

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")


@dataclass(frozen=True)
class IdentityInstance:
    """Public inputs of one identity-testing problem.

    eta and the Scheffe set are derived from (p_hat, q) at construction.
    """

    q: Pmf
    advice: AdviceSpec
    eps: float
    budget: PrivacyBudget
    eta: float = field(init=False)
    scheffe: frozenset = field(init=False)

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.q.n != self.advice.p_hat.n:
            raise ValueError("reference and advice must share a domain")
        s = scheffe_set(self.advice.p_hat, self.q)
        object.__setattr__(self, "scheffe", frozenset(s))
        object.__setattr__(self, "eta", tv_distance(self.advice.p_hat, self.q))

    @property
    def n(self) -> int:
        return self.q.n

    @property
    def gap(self) -> float:
        return self.eta - self.advice.alpha


def scheffe_set(p_hat: Pmf, q: Pmf) -> frozenset:
    """Elements where the advice assigns strictly less mass than q.

    The probability gap of this set equals the total variation distance."""
    if p_hat.n != q.n:
        raise ValueError("distributions must share a domain")
    return frozenset(int(i) for i in np.nonzero(p_hat.probs < q.probs)[0])


def sigma_statistic(samples: SampleMultiset, s_set) -> float:
    """Fraction of samples falling in the given index set."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    if not s_set:
        return 0.0
    idx = np.asarray(sorted(s_set), dtype=np.int64)
    return float(samples.counts[idx].sum()) / len(samples)


def private_identity_budget(n: int, eps: float, xi: float) -> float:
    """Unit-constant cost of the non-advice private identity tester."""
    return (
        math.sqrt(n) / eps**2
        + math.sqrt(n) / (eps * math.sqrt(xi))
        + n ** (1.0 / 3.0) / (eps ** (4.0 / 3.0) * xi ** (2.0 / 3.0))
        + 1.0 / (eps * xi)
    )


def augmented_identity_budget(gap: float, xi: float) -> int:
    """Sample size of the advice branch for advice-to-reference gap > 0."""
    if gap <= 0:
        raise ValueError("budget defined only for eta > alpha")
    return math.ceil(HOEFFDING_CONST / gap**2) + math.ceil(LAPLACE_CONST / (gap * xi))


def branch_select(instance: IdentityInstance) -> Branch:
    """Choose the cheaper branch from public inputs only.

    Ties resolve to the baseline, matching the inclusive eta <= alpha rule;
    this also keeps the degenerate gap = 0 case away from the advice branch.
    """
    if instance.eta <= instance.advice.alpha:
        return Branch.BASELINE
    gap = instance.gap
    augmented_cost = 1.0 / gap**2 + 1.0 / (gap * instance.budget.xi)
    baseline_cost = private_identity_budget(
        instance.n, instance.eps, instance.budget.xi
    )
    return Branch.BASELINE if baseline_cost <= augmented_cost else Branch.AUGMENTED


def augmented_identity_test(
    instance: IdentityInstance, sample_source: Pmf, seed: SeedLike
) -> Outcome:
    """Advice branch: reject when the noised Scheffe fraction is far from
    q(S), otherwise report that the advice looks bad. Never accepts."""
    if branch_select(instance) is not Branch.AUGMENTED:
        raise ValueError("advice branch invoked where the baseline is selected")
    rng = as_generator(seed)
    gap = instance.gap
    s = augmented_identity_budget(gap, instance.budget.xi)
    samples = draw_fixed(sample_source, s, rng)
    sigma = sigma_statistic(samples, instance.scheffe)
    sigma_hat = privatize(
        sigma, SensitivityBound(1.0 / s, "analytic"), instance.budget, rng
    )
    q_s = instance.q.mass(instance.scheffe)
    if abs(sigma_hat - q_s) > gap / 4.0:
        return Outcome.REJECT
    return Outcome.BOT


def baseline_identity_budget(n: int, eps: float, xi: float) -> int:
    return math.ceil(BASELINE_BUDGET_CONST * private_identity_budget(n, eps, xi))


def _l1_statistic(counts: np.ndarray, s: int, q: Pmf) -> float:
    return float(np.abs(counts - s * q.probs).sum())


@lru_cache(maxsize=64)
def _baseline_threshold(q_bytes: bytes, n: int, s: int, xi: float) -> float:
    """Null quantile of the noised l1 statistic, from public simulation.

    Depends only on the known reference q and public parameters, so it can be
    computed once and adds no privacy cost.
    """
    digest = hashlib.sha256(q_bytes + f"|{n}|{s}|{xi}".encode()).digest()
    seed_words = tuple(int.from_bytes(digest[i : i + 8], "big") for i in range(0, 32, 8))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_words)))
    q = Pmf(np.frombuffer(q_bytes, dtype=np.float64))
    sims = np.empty(BASELINE_NULL_SIMS)
    for i in range(BASELINE_NULL_SIMS):
        counts = draw_fixed(q, s, rng).counts
        noise = privatize(0.0, 2.0, PrivacyBudget(xi), rng)
        sims[i] = _l1_statistic(counts, s, q) + noise
    return float(np.quantile(sims, BASELINE_NULL_QUANTILE))


def baseline_private_identity_test(
    q: Pmf,
    eps: float,
    budget: PrivacyBudget,
    sample_source: Pmf,
    seed: SeedLike,
) -> Outcome:
    """Pure-DP identity tester without advice; verdicts ACCEPT/REJECT only.

    Releases T + Lap(2/xi) where T is the l1 deviation of the counts from
    their null expectation; replacing one sample moves T by at most 2. The
    rejection threshold is the simulated null quantile, so the null rejection
    rate is pinned near 1 - quantile by construction.
    """
    rng = as_generator(seed)
    s = baseline_identity_budget(q.n, eps, budget.xi)
    threshold = _baseline_threshold(q.probs.tobytes(), q.n, s, budget.xi)
    samples = draw_fixed(sample_source, s, rng)
    t = _l1_statistic(samples.counts, s, q)
    t_noisy = privatize(t, 2.0, budget, rng)
    return Outcome.REJECT if t_noisy > threshold else Outcome.ACCEPT


def identity_test(
    instance: IdentityInstance, sample_source: Pmf, seed: SeedLike
) -> Outcome:
    """Full tester: public branch choice, then the selected branch."""
    if branch_select(instance) is Branch.BASELINE:
        return baseline_private_identity_test(
            instance.q, instance.eps, instance.budget, sample_source, seed
        )
    return augmented_identity_test(instance, sample_source, seed)
