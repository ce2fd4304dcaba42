"""Exhaustive sensitivity audits on small, fully enumerable dataset families.

Each audit enumerates every dataset of a bounded shape and every one-sample
replacement, computes the exact worst-case statistic change, and compares it
with the analytic bound the mechanisms rely on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .closeness import core_sensitivity_bound, two_sample_collision_statistic
from .dist_core import Pmf, SampleMultiset
from .dp import CountDatasetFamily, exhaustive_sensitivity
from .flattening import (
    BalanceParams,
    Bucketing,
    collision_l2_estimate,
    collision_l2_sensitivity,
)


@dataclass(frozen=True)
class AuditResult:
    name: str
    exhaustive: float
    bound: float
    exact: bool  # True if the bound is claimed to be attained exactly

    @property
    def ok(self) -> bool:
        if self.exact:
            return abs(self.exhaustive - self.bound) <= 1e-12
        return self.exhaustive <= self.bound + 1e-12


def sigma_sensitivity_audit(max_n: int = 5, max_s: int = 6) -> list[AuditResult]:
    """The set-fraction statistic moves by exactly 1/s per replacement, for
    every nonempty proper subset of the domain."""
    results = []
    for n in range(2, max_n + 1):
        for s in range(1, max_s + 1):
            family = CountDatasetFamily(n, (s,))
            worst = 0.0
            for size in range(1, n):
                for subset in itertools.combinations(range(n), size):
                    idx = np.array(subset)

                    def stat(ds, idx=idx, s=s):
                        return sum(ds[0][i] for i in idx) / s

                    bound = exhaustive_sensitivity(stat, family)
                    worst = max(worst, abs(bound.value - 1.0 / s))
            results.append(AuditResult(f"sigma[n={n},s={s}]", worst, 0.0, True))
    return results


def l1_statistic_sensitivity_audit(max_n: int = 5, max_s: int = 6) -> list[AuditResult]:
    """The l1 deviation statistic of the baseline identity tester moves by at
    most 2 per replacement, for uniform and a skewed reference."""
    results = []
    for n in range(2, max_n + 1):
        references = [Pmf.uniform(n)]
        skew = np.arange(1, n + 1, dtype=np.float64)
        references.append(Pmf(skew / skew.sum()))
        for s in range(1, max_s + 1):
            family = CountDatasetFamily(n, (s,))
            for tag, q in zip(("uniform", "skewed"), references):

                def stat(ds, q=q, s=s):
                    counts = np.array(ds[0], dtype=np.float64)
                    return float(np.abs(counts - s * q.probs).sum())

                bound = exhaustive_sensitivity(stat, family)
                results.append(
                    AuditResult(f"l1_stat[n={n},s={s},q={tag}]", bound.value, 2.0, False)
                )
    return results


def _balanced_member(ratio: float, flat_role: int, other_roles: tuple[int, ...]):
    def member(ds):
        f = ds[flat_role]
        return all(
            ds[r][i] <= ratio * (f[i] + 1) + 1e-12
            for r in other_roles
            for i in range(len(f))
        )

    return member


def collision_l2_sensitivity_audit(
    A: float = 2.0, k: int = 4, ell: int = 4, max_n: int = 3
) -> list[AuditResult]:
    """Exhaustive sensitivity of the averaged collision statistic over the
    balanced family, against the analytic bound."""
    results = []
    params = BalanceParams(A=A, k=k, ell=ell)
    analytic = collision_l2_sensitivity(params).value
    for n in range(1, max_n + 1):
        family = CountDatasetFamily(
            n, (k, ell), member=_balanced_member(params.ratio, 0, (1,))
        )

        def stat(ds, n=n):
            bucketing = Bucketing(np.ones(n, dtype=np.int64), np.array(ds[0], dtype=np.int64))
            est = SampleMultiset.from_counts(np.array(ds[1], dtype=np.int64))
            return collision_l2_estimate(est, bucketing)

        bound = exhaustive_sensitivity(stat, family)
        results.append(
            AuditResult(f"collision_l2[n={n},A={A},k={k},ell={ell}]", bound.value, analytic, False)
        )
    return results


def core_statistic_sensitivity_audit(
    A: float = 2.0, k: int = 4, s: int = 4, max_n: int = 3
) -> list[AuditResult]:
    """Exhaustive sensitivity of the two-sample collision statistic over
    balanced instances, against the 4*(s+k)/k bound."""
    results = []
    ratio = A * s / k
    analytic = core_sensitivity_bound(s, k)
    for n in range(1, max_n + 1):
        family = CountDatasetFamily(
            n, (k, s, s), member=_balanced_member(ratio, 0, (1, 2))
        )

        def stat(ds, n=n):
            bucketing = Bucketing(np.ones(n, dtype=np.int64), np.array(ds[0], dtype=np.int64))
            tp = SampleMultiset.from_counts(np.array(ds[1], dtype=np.int64))
            tq = SampleMultiset.from_counts(np.array(ds[2], dtype=np.int64))
            return two_sample_collision_statistic(tp, tq, bucketing).value

        bound = exhaustive_sensitivity(stat, family)
        results.append(
            AuditResult(f"core_stat[n={n},A={A},k={k},s={s}]", bound.value, analytic, False)
        )
    return results


def full_sensitivity_audit() -> list[AuditResult]:
    return (
        sigma_sensitivity_audit()
        + l1_statistic_sensitivity_audit()
        + collision_l2_sensitivity_audit()
        + core_statistic_sensitivity_audit()
    )
