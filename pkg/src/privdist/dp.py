"""Laplace mechanism, sensitivity bookkeeping, and an exhaustive sensitivity
oracle for small dataset families.

Sensitivity is the worst-case change of a statistic when one sample is
replaced. Bounds carry provenance so tests can demand exhaustively verified
values on small instances and analytic bounds elsewhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Literal

import numpy as np

from ._rng import SeedLike, as_generator

# Enumeration caps for the exhaustive oracle. Total work is at most
# (compositions per role)^roles * moves, which stays small under these caps.
MAX_DOMAIN = 6
MAX_ROLE_SIZE = 8
MAX_TOTAL_SIZE = 16


@dataclass(frozen=True)
class PrivacyBudget:
    """Pure-DP budget parameter, xi > 0."""

    xi: float

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("privacy budget must be positive")


@dataclass(frozen=True)
class SensitivityBound:
    value: float
    provenance: Literal["analytic", "exhaustive"]

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("sensitivity must be non-negative")


def laplace_icdf(u: float, scale: float) -> float:
    """Inverse CDF of Lap(scale) at u in (0, 1); exactly 0 at u = 1/2."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    x = u - 0.5
    if x == 0.0:
        return 0.0
    return -scale * math.copysign(1.0, x) * math.log1p(-2.0 * abs(x))


def laplace_sample(scale: float, seed: SeedLike, size: int | None = None):
    """Laplace draws via the inverse CDF on uniform variates.

    Pr[|X| >= t] = exp(-t/scale); mean 0, variance 2*scale^2.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = as_generator(seed)
    if size is None:
        return laplace_icdf(float(rng.random()), scale)
    u = rng.random(size) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def privatize(
    value: float,
    sensitivity: SensitivityBound | float,
    budget: PrivacyBudget,
    seed: SeedLike,
) -> float:
    """Release value + Lap(sensitivity / xi); xi-differentially private."""
    delta = sensitivity.value if isinstance(sensitivity, SensitivityBound) else float(sensitivity)
    if delta <= 0:
        raise ValueError("sensitivity must be positive to calibrate noise")
    return value + laplace_sample(delta / budget.xi, seed)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All vectors of `parts` non-negative ints summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


@dataclass(frozen=True)
class CountDatasetFamily:
    """All datasets of a fixed shape, represented as per-role count vectors.

    A dataset is a tuple of count vectors over [domain], one per role (for
    example flattening / estimation / test). A neighbor replaces one sample:
    within a single role, one unit moves from one element to another.
    An optional membership predicate restricts the family (both endpoints of
    a neighbor pair must satisfy it).
    """

    domain: int
    role_sizes: tuple[int, ...]
    member: Callable[[tuple[tuple[int, ...], ...]], bool] | None = None

    def __post_init__(self):
        if self.domain < 1 or self.domain > MAX_DOMAIN:
            raise ValueError(f"domain must be in [1, {MAX_DOMAIN}]")
        if any(s < 0 or s > MAX_ROLE_SIZE for s in self.role_sizes):
            raise ValueError(f"each role size must be in [0, {MAX_ROLE_SIZE}]")
        if sum(self.role_sizes) > MAX_TOTAL_SIZE:
            raise ValueError(f"total samples must be at most {MAX_TOTAL_SIZE}")

    def datasets(self) -> Iterator[tuple[tuple[int, ...], ...]]:
        per_role = [
            list(_compositions(size, self.domain)) for size in self.role_sizes
        ]
        for combo in itertools.product(*per_role):
            ds = tuple(combo)
            if self.member is None or self.member(ds):
                yield ds

    def neighbors(
        self, dataset: tuple[tuple[int, ...], ...]
    ) -> Iterator[tuple[tuple[int, ...], ...]]:
        for role_idx, counts in enumerate(dataset):
            for src in range(self.domain):
                if counts[src] == 0:
                    continue
                for dst in range(self.domain):
                    if dst == src:
                        continue
                    moved = list(counts)
                    moved[src] -= 1
                    moved[dst] += 1
                    nb = dataset[:role_idx] + (tuple(moved),) + dataset[role_idx + 1 :]
                    if self.member is None or self.member(nb):
                        yield nb


def exhaustive_sensitivity(
    statistic: Callable[[tuple[tuple[int, ...], ...]], float],
    family: CountDatasetFamily,
) -> SensitivityBound:
    """Exact max |f(X) - f(X')| over all in-family neighbor pairs."""
    values: dict[tuple, float] = {}

    def f(ds) -> float:
        if ds not in values:
            values[ds] = float(statistic(ds))
        return values[ds]

    worst = 0.0
    for ds in family.datasets():
        base = f(ds)
        for nb in family.neighbors(ds):
            worst = max(worst, abs(base - f(nb)))
    return SensitivityBound(worst, "exhaustive")


def laplace_density_log_ratio(center_a: float, center_b: float, scale: float, x) -> np.ndarray:
    """log [ pdf_Lap(x; center_a, scale) / pdf_Lap(x; center_b, scale) ]."""
    x = np.asarray(x, dtype=np.float64)
    return (np.abs(x - center_b) - np.abs(x - center_a)) / scale
