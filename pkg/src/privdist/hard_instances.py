"""Hard-instance constructions for augmented uniformity testing.

Three pmfs built from pairwise +/- bias over consecutive (odd, even) element
pairs, plus an explicit coupling between uniform samples and samples from the
deterministic biased instance whose expected Hamming distance is exactly
s * (eta - alpha').

Element indices are 0-based here; "even elements" in the 1-based convention
are the odd 0-based indices. For odd n the last element gets probability 0
and the construction runs on the remaining n-1 elements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import SeedLike, as_generator
from .dist_core import Pmf, SampleMultiset


def _paired_bias_pmf(n: int, bias_per_pair: np.ndarray) -> Pmf:
    """Pmf with mass (1 - 2b)/m on the low and (1 + 2b)/m on the high element
    of each consecutive pair, where m is the even part of n."""
    m = n if n % 2 == 0 else n - 1
    if bias_per_pair.shape[0] != m // 2:
        raise ValueError("need one bias per element pair")
    probs = np.zeros(n)
    probs[0:m:2] = (1.0 - 2.0 * bias_per_pair) / m
    probs[1:m:2] = (1.0 + 2.0 * bias_per_pair) / m
    return Pmf(probs)


@dataclass(frozen=True)
class HardFamily:
    """Parameters of the hard uniformity instances.

    eta is the advice-to-uniform distance, eps_prime the distance of the
    randomized far instance, alpha_prime the distance of the deterministic
    instance to the advice.
    """

    n: int
    eta: float
    eps_prime: float = 0.25
    alpha_prime: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need a domain of at least 2 elements")
        if not 0 <= self.eta < 0.5:
            raise ValueError("eta must lie in [0, 1/2)")
        if not 0 < self.eps_prime <= 0.5:
            raise ValueError("eps_prime must lie in (0, 1/2]")
        if not 0 <= self.alpha_prime <= self.eta:
            raise ValueError("alpha_prime must lie in [0, eta]")
        if not self.eta - self.alpha_prime < 0.5:
            raise ValueError("eta - alpha_prime must be below 1/2")

    @property
    def even_n(self) -> int:
        return self.n if self.n % 2 == 0 else self.n - 1

    @property
    def gap(self) -> float:
        return self.eta - self.alpha_prime


def advice_phat(family: HardFamily) -> Pmf:
    """Advice pmf at total variation distance exactly eta from uniform."""
    pairs = family.even_n // 2
    return _paired_bias_pmf(family.n, np.full(pairs, family.eta))


def p_bullet(family: HardFamily, seed: SeedLike) -> Pmf:
    """Randomized far instance: independent +/- eps_prime bias per pair.

    Every draw is at distance exactly eps_prime from uniform, and each pair's
    combined mass stays 2/n.
    """
    rng = as_generator(seed)
    pairs = family.even_n // 2
    signs = rng.integers(0, 2, size=pairs) * 2 - 1
    return _paired_bias_pmf(family.n, signs * family.eps_prime)


def p_diamond(family: HardFamily) -> Pmf:
    """Deterministic instance at distance alpha_prime from the advice and
    eta - alpha_prime from uniform; its bias is collinear with the advice's."""
    pairs = family.even_n // 2
    return _paired_bias_pmf(family.n, np.full(pairs, family.gap))


def couple_diamond(
    family: HardFamily, s: int, seed: SeedLike
) -> tuple[SampleMultiset, SampleMultiset]:
    """Coupled sample sequences (uniform side, biased side) of length s.

    Marginals are exactly uniform^s and p_diamond^s. Positions disagree
    independently with probability (eta - alpha_prime), so the expected
    Hamming distance is s * (eta - alpha_prime).
    """
    if s < 0:
        raise ValueError("sample size must be non-negative")
    rng = as_generator(seed)
    m = family.even_n
    pair = rng.integers(1, m // 2 + 1, size=s)  # P_j in {1, ..., m/2}
    z = rng.integers(0, 2, size=s)  # fair coin
    z_prime = (rng.random(s) < 1.0 - 2.0 * family.gap).astype(np.int64)
    x = 2 * pair - z
    y = np.where(z == 0, x, 2 * pair - z_prime)
    # 1-based construction; shift to 0-based domain indices.
    return (
        SampleMultiset(x - 1, family.n),
        SampleMultiset(y - 1, family.n),
    )
