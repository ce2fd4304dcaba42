"""Two-step flattening, the derandomized collision statistic, its sensitivity
control via a balancing map, and the private l2 threshold test.

Step one splits each element i into ceil(n * advice_i) + 1 slots using only
the public advice. Step two splits each slot (i, j) into k_ij + 1 buckets,
where k_ij counts the flattening samples that landed in the slot. Sampling,
estimation, and testing all live on the flat level-1 domain; the level-2
bucket assignment is averaged out analytically in the statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import backend
from ._rng import SeedLike, as_generator
from .dist_core import Pmf, SampleMultiset
from .dp import PrivacyBudget, SensitivityBound, laplace_sample

# Budget-rule constants for the l2 stage, calibrated so the Laplace tail at
# scale 4*sensitivity/xi stays below a quarter of the smallest achievable
# norm (about 1/(4k)) with probability 0.98, and the collision estimate
# concentrates at the 0.05 level. See l2_stage_budget.
L2_BUDGET_PRIVACY_CONST = 2048.0
L2_BUDGET_VARIANCE_CONST = 2.0

# Gate threshold multiplier: flag the advice when the released norm estimate
# exceeds 30 times the expected flattened norm bound.
L2_GATE_MULTIPLIER = 30.0


class BalanceInfeasibleError(RuntimeError):
    """The balancing map ran out of replaceable flattening slots."""


def expected_inverse_one_plus_poisson(lam: float) -> float:
    """E[1/(1+X)] for X ~ Poi(lam), equal to (1 - exp(-lam))/lam <= 1/lam."""
    if lam <= 0:
        raise ValueError("rate must be positive")
    return -math.expm1(-lam) / lam


def step1_buckets(p_hat: Pmf) -> np.ndarray:
    """Per-element slot counts from the advice: ceil(n * advice_i) + 1.

    The total is at most 3n. A tiny slack guards the ceiling against float
    roundoff in n * advice_i (e.g. uniform advice must give exactly 2)."""
    n = p_hat.n
    scaled = n * p_hat.probs
    return (np.ceil(scaled - 1e-9).astype(np.int64) + 1).clip(min=1)


@dataclass(frozen=True)
class Bucketing:
    """Two-level bucket structure shared by both tested distributions."""

    level1: np.ndarray  # slots per original element
    flattening_counts: np.ndarray  # k_ij over the flat level-1 domain

    def __post_init__(self):
        level1 = np.asarray(self.level1, dtype=np.int64)
        counts = np.asarray(self.flattening_counts, dtype=np.int64)
        if level1.min(initial=1) < 1:
            raise ValueError("every element needs at least one slot")
        if counts.shape[0] != int(level1.sum()):
            raise ValueError("flattening counts must cover the level-1 domain")
        if counts.min(initial=0) < 0:
            raise ValueError("negative flattening count")
        level1 = level1.copy()
        counts = counts.copy()
        level1.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "level1", level1)
        object.__setattr__(self, "flattening_counts", counts)

    @property
    def n_original(self) -> int:
        return int(self.level1.shape[0])

    @property
    def n_level1(self) -> int:
        return int(self.level1.sum())

    @cached_property
    def level2(self) -> np.ndarray:
        """Buckets per level-1 slot: k_ij + 1."""
        out = self.flattening_counts + 1
        out.flags.writeable = False
        return out

    @property
    def n_flattened(self) -> int:
        """Domain size after both steps: sum of k_ij + 1."""
        return self.n_level1 + int(self.flattening_counts.sum())


def step2_buckets(F: SampleMultiset, level1: np.ndarray) -> Bucketing:
    """Bucketing induced by the flattening multiset over the level-1 domain."""
    level1 = np.asarray(level1, dtype=np.int64)
    if F.domain != int(level1.sum()):
        raise ValueError("flattening samples must live on the level-1 domain")
    return Bucketing(level1, F.counts)


def level1_pmf(p: Pmf, level1: np.ndarray) -> Pmf:
    """The step-one flattened pmf: mass p_i / b_i on each of element i's slots."""
    level1 = np.asarray(level1, dtype=np.int64)
    return Pmf(np.repeat(p.probs / level1, level1))


def flattened_pmf(p: Pmf, bucketing: Bucketing) -> Pmf:
    """The fully flattened pmf over the level-2 domain."""
    p1 = np.repeat(p.probs / bucketing.level1, bucketing.level1)
    return Pmf(np.repeat(p1 / bucketing.level2, bucketing.level2))


def flattened_l2_true(p: Pmf, bucketing: Bucketing) -> float:
    """Exact squared l2 norm of the flattened distribution.

    Ground-truth oracle: sum over slots of (p_i/b_i)^2 / (k_ij + 1)."""
    p1 = np.repeat(p.probs / bucketing.level1, bucketing.level1)
    return float(np.sum(p1 * p1 / bucketing.level2))


def draw_level1(p: Pmf, level1: np.ndarray, size: int, seed: SeedLike) -> SampleMultiset:
    """Draw from the step-one flattened distribution: element by the alias
    table of p, then a uniform slot within the element."""
    rng = as_generator(seed)
    level1 = np.asarray(level1, dtype=np.int64)
    offsets = np.zeros(level1.shape[0] + 1, dtype=np.int64)
    np.cumsum(level1, out=offsets[1:])
    domain = int(offsets[-1])
    if size == 0:
        return SampleMultiset(np.empty(0, dtype=np.int64), domain)
    accept, alias = p._alias_table
    items = backend.flattened_pick(
        accept,
        alias,
        offsets[:-1],
        level1,
        rng.random(size),
        rng.random(size),
        rng.random(size),
    )
    return SampleMultiset(items, domain)


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint roles of the sampled data over one level-1 domain."""

    F: SampleMultiset
    E: SampleMultiset | None = None
    T: SampleMultiset | None = None

    def __post_init__(self):
        for part in (self.E, self.T):
            if part is not None and part.domain != self.F.domain:
                raise ValueError("all roles must share the level-1 domain")


@dataclass(frozen=True)
class BalanceParams:
    """Balance target: estimation counts at most A * (ell/k) per flattening
    count (plus one), elementwise. test_mean, when set, applies the same rule
    to test counts with ratio A * (test_mean/k)."""

    A: float
    k: int
    ell: int
    delta_prime: float = 0.05
    test_mean: int | None = None

    def __post_init__(self):
        if self.A < 2:
            raise ValueError("balance parameter must be at least 2")
        if self.k < 1 or self.ell < 1:
            raise ValueError("nominal sample means must be positive")
        if not 0 < self.delta_prime < 1:
            raise ValueError("delta_prime must lie in (0, 1)")

    @property
    def ratio(self) -> float:
        return self.A * self.ell / self.k

    @property
    def test_ratio(self) -> float | None:
        if self.test_mean is None:
            return None
        return self.A * self.test_mean / self.k


def composition_balance_param(n: int, delta_prime: float = 0.05) -> float:
    """Balance parameter large enough that Poissonized data violates the
    target with probability at most delta_prime: 12 * ln(n / delta_prime)."""
    return 12.0 * math.log(n / delta_prime)


def _balance_targets(
    f_counts: np.ndarray, constraints: list[tuple[np.ndarray, float]]
) -> np.ndarray:
    """Smallest flattening count per element meeting every ratio constraint."""
    target = np.zeros_like(f_counts)
    for counts, ratio in constraints:
        np.maximum(target, np.ceil(counts / ratio - 1e-12).astype(np.int64), out=target)
    return target


def rebalance_flattening(
    F: SampleMultiset,
    constraints: list[tuple[np.ndarray, float]],
    seed: SeedLike,
) -> SampleMultiset:
    """Replace flattening samples until counts_x[i] <= ratio * (k_i + 1) holds
    for every constraint (counts_x, ratio) and element i.

    For each element short of its target, extra copies are written over
    surplus samples of other elements: at most the slack of each donor is
    marked replaceable (capped at its count), the earliest marked positions
    are used, and the inserted copies are assigned to those positions in a
    seeded random order. Identity on already-balanced input.
    """
    f_counts = F.counts
    target = _balance_targets(f_counts, constraints)
    need = np.maximum(target - f_counts - 1, 0)
    total_need = int(need.sum())
    if total_need == 0:
        return F
    surplus = np.minimum(np.maximum(f_counts + 1 - target, 0), f_counts)
    if total_need > int(surplus.sum()):
        raise BalanceInfeasibleError(
            f"need {total_need} replacement slots, only {int(surplus.sum())} available"
        )
    items = F.items.copy()
    # Occurrence rank of each position within its element, in sequence order:
    # stable argsort groups equal items while preserving their draw order.
    order = np.argsort(items, kind="stable")
    sorted_items = items[order]
    ranks = np.arange(items.shape[0], dtype=np.int64)
    starts = np.concatenate(
        ([0], np.flatnonzero(sorted_items[1:] != sorted_items[:-1]) + 1)
    )
    group_of = np.zeros(items.shape[0], dtype=np.int64)
    group_of[starts[1:]] = 1
    group_of = np.cumsum(group_of)
    ranks -= starts[group_of]
    marked_sorted = ranks < surplus[sorted_items]
    marked_positions = np.sort(order[marked_sorted])
    chosen = marked_positions[:total_need]
    inserted = np.repeat(np.arange(f_counts.shape[0], dtype=np.int64), need)
    rng = as_generator(seed)
    items[chosen] = rng.permutation(inserted)
    return SampleMultiset(items, F.domain)


def balance_map(split: DatasetSplit, params: BalanceParams, seed: SeedLike) -> DatasetSplit:
    """Map a split into the balanced family by rewriting its flattening set."""
    constraints: list[tuple[np.ndarray, float]] = []
    if split.E is not None:
        constraints.append((split.E.counts, params.ratio))
    if split.T is not None and params.test_ratio is not None:
        constraints.append((split.T.counts, params.test_ratio))
    if not constraints:
        return split
    new_f = rebalance_flattening(split.F, constraints, seed)
    if new_f is split.F:
        return split
    return replace(split, F=new_f)


def is_balanced(split: DatasetSplit, params: BalanceParams) -> bool:
    f_counts = split.F.counts
    checks = []
    if split.E is not None:
        checks.append((split.E.counts, params.ratio))
    if split.T is not None and params.test_ratio is not None:
        checks.append((split.T.counts, params.test_ratio))
    return all(
        bool(np.all(counts <= ratio * (f_counts + 1) + 1e-9)) for counts, ratio in checks
    )


def collision_l2_estimate(
    E: SampleMultiset, bucketing: Bucketing, ell: int | None = None
) -> float:
    """Collision statistic averaged over all level-2 bucket assignments.

    Closed form: sum over slots of C(count_ij, 2)/(k_ij + 1), normalized by
    C(ell, 2). Unbiased for the flattened squared norm given the bucketing.
    Binomial numerators are exact 64-bit integers; the normalization is a
    single final division.
    """
    m = len(E) if ell is None else int(ell)
    if ell is not None and ell != len(E):
        raise ValueError("ell must match the estimation multiset size")
    if m < 2:
        raise ValueError("need at least 2 estimation samples")
    counts = E.counts
    pair_counts = counts * (counts - 1) // 2
    total = float(np.sum(pair_counts / bucketing.level2))
    return total / (m * (m - 1) // 2)


def collision_l2_sensitivity(
    params: BalanceParams, ell_realized: int | None = None
) -> SensitivityBound:
    """Worst-case change of the averaged collision statistic on balanced data.

    With counts bounded by ratio R = A*ell/k per (k_ij + 1), a flattening
    replacement moves one term by at most 4R^2/C2 and an estimation
    replacement by at most 2R/C2 with C2 = ell*(ell-1); both slots of the
    replacement can move, hence the doubling.
    """
    m = params.ell if ell_realized is None else int(ell_realized)
    if m < 2:
        raise ValueError("sensitivity defined for at least 2 estimation samples")
    r = params.ratio
    value = 2.0 * (4.0 * r * r + 2.0 * r) / (m * (m - 1))
    return SensitivityBound(value, "analytic")


def l2_stage_budget(n: int, xi: float, A: float = 2.0) -> tuple[int, int]:
    """Smallest k = ell meeting the stage's budget rule.

    Requires k * min(k/A^2, ell/A) >= C1 (k+n)/xi for the Laplace noise to sit
    well under the achievable norm floor, and ell >= C2 sqrt(k+n) for the
    collision estimate's concentration.
    """
    c = L2_BUDGET_PRIVACY_CONST * A * A / xi
    k = math.ceil((c + math.sqrt(c * c + 4.0 * c * n)) / 2.0)
    k = max(k, 2)
    while k < L2_BUDGET_VARIANCE_CONST * math.sqrt(k + n):
        k = math.ceil(L2_BUDGET_VARIANCE_CONST * math.sqrt(k + n))
    return k, k


def l2_gate_threshold(alpha: float, k: int, n: int) -> float:
    """Release threshold: 30 * (2 alpha / k + 4 / n)."""
    return L2_GATE_MULTIPLIER * (2.0 * alpha / k + 4.0 / n)


def private_l2_test(
    split: DatasetSplit,
    bucketing: Bucketing,
    params: BalanceParams,
    alpha: float,
    k: int,
    n: int,
    budget: PrivacyBudget,
    seed: SeedLike,
) -> tuple[bool, float]:
    """Private check that the flattened norm is as small as good advice implies.

    Releases the averaged collision statistic plus Laplace noise at scale
    4 * sensitivity / xi (the factor 4 pays for the balancing map's coupling)
    and passes iff the release is at most the gate threshold. Returns
    (passed, released value); a failed gate maps to the advice-rejection
    verdict upstream.
    """
    if split.E is None:
        raise ValueError("estimation samples are required")
    if not np.array_equal(bucketing.flattening_counts, split.F.counts):
        raise ValueError("bucketing is stale: rebuild it from the balanced split")
    if not is_balanced(split, params):
        raise ValueError("input split is outside the balanced family")
    rng = as_generator(seed)
    ell_realized = len(split.E)
    delta = collision_l2_sensitivity(params, ell_realized)
    estimate = collision_l2_estimate(split.E, bucketing)
    released = estimate + laplace_sample(4.0 * delta.value / budget.xi, rng)
    return released <= l2_gate_threshold(alpha, k, n), released
