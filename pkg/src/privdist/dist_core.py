"""Finite discrete distributions, seeded sampling, distances, histograms.

Probability vectors are double precision and validated to sum to one within
1e-12 at construction; sampling goes through a Walker alias table so that
fixed-size draws cost O(1) per sample after O(n) setup. All randomness flows
through an explicit seed or Generator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import backend
from ._rng import SeedLike, as_generator

NORMALIZATION_TOL = 1e-12


class Outcome(enum.Enum):
    """Ternary verdict of an augmented private tester."""

    ACCEPT = "accept"
    REJECT = "reject"
    BOT = "bot"


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over the domain [n] = {0, ..., n-1}."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("pmf must be a non-empty 1-d vector")
        if np.any(arr < 0):
            raise ValueError("pmf entries must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(
                f"pmf must sum to 1 within {NORMALIZATION_TOL}; got {total!r}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def n(self) -> int:
        return int(self.probs.shape[0])

    @classmethod
    def uniform(cls, n: int) -> "Pmf":
        if n < 1:
            raise ValueError("domain size must be at least 1")
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, at: int) -> "Pmf":
        probs = np.zeros(n)
        probs[at] = 1.0
        return cls(probs)

    @classmethod
    def renormalized(cls, weights: Sequence[float] | np.ndarray) -> "Pmf":
        """Constructor for user inputs: scales non-negative weights to sum 1."""
        arr = np.asarray(weights, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("weights must be a non-empty 1-d vector")
        if np.any(arr < 0):
            raise ValueError("weights must be non-negative")
        total = arr.sum()
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        return cls(arr / total)

    @cached_property
    def _alias_table(self) -> tuple[np.ndarray, np.ndarray]:
        return build_alias_table(self.probs)

    def mass(self, indices) -> float:
        """Total probability of a set of domain elements."""
        idx = np.asarray(sorted(indices), dtype=np.int64)
        if idx.size == 0:
            return 0.0
        return float(self.probs[idx].sum())


def build_alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table: returns (accept, alias) arrays of length n.

    Cell i covers mass 1/n; with probability accept[i] the draw is i itself,
    otherwise alias[i].
    """
    n = probs.shape[0]
    accept = probs * n
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if accept[i] < 1.0]
    large = [i for i in range(n) if accept[i] >= 1.0]
    accept = accept.copy()
    while small and large:
        s = small.pop()
        g = large.pop()
        alias[s] = g
        accept[g] -= 1.0 - accept[s]
        if accept[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # Leftovers are within float error of 1.
    for i in small:
        accept[i] = 1.0
    for i in large:
        accept[i] = 1.0
    return accept, alias


@dataclass(frozen=True)
class SampleMultiset:
    """Multiset of samples from [domain], stored in draw order."""

    items: np.ndarray
    domain: int

    def __post_init__(self):
        arr = np.asarray(self.items, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("items must be a 1-d sequence")
        if arr.size and (arr.min() < 0 or arr.max() >= self.domain):
            raise ValueError("sample outside the domain")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "items", arr)

    def __len__(self) -> int:
        return int(self.items.shape[0])

    @cached_property
    def counts(self) -> np.ndarray:
        c = np.bincount(self.items, minlength=self.domain).astype(np.int64)
        c.flags.writeable = False
        return c

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "SampleMultiset":
        """Canonical (sorted) item sequence realizing the given counts."""
        counts = np.asarray(counts, dtype=np.int64)
        return cls(np.repeat(np.arange(counts.size, dtype=np.int64), counts), counts.size)


def draw_fixed(p: Pmf, s: int, seed: SeedLike) -> SampleMultiset:
    """s i.i.d. draws from p; deterministic given the seed."""
    if s < 0:
        raise ValueError("sample size must be non-negative")
    rng = as_generator(seed)
    if s == 0:
        return SampleMultiset(np.empty(0, dtype=np.int64), p.n)
    accept, alias = p._alias_table
    u_cell = rng.random(s)
    u_acc = rng.random(s)
    items = backend.alias_pick(accept, alias, u_cell, u_acc)
    return SampleMultiset(items, p.n)


def draw_poissonized(p: Pmf, mean: float, seed: SeedLike) -> SampleMultiset:
    """Draw N ~ Poi(mean) then N i.i.d. samples from p.

    Per-element counts are then independent Poi(mean * p_i).
    """
    if mean <= 0:
        raise ValueError("mean must be positive")
    rng = as_generator(seed)
    n_draws = int(rng.poisson(mean))
    return draw_fixed(p, n_draws, rng)


def tv_distance(p: Pmf, q: Pmf) -> float:
    """Total variation distance, half the l1 distance between the pmfs."""
    if p.n != q.n:
        raise ValueError("distributions must share a domain")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def l2_norm_sq(p: Pmf) -> float:
    """Squared Euclidean norm of the probability vector."""
    return float(np.dot(p.probs, p.probs))


def pmf_to_text(p: Pmf) -> str:
    """One probability per line, plain decimal text."""
    return "\n".join(repr(float(x)) for x in p.probs) + "\n"


def pmf_from_text(text: str) -> Pmf:
    values = [float(line) for line in text.split() if line.strip()]
    return Pmf(np.array(values))


def pmf_from_file(path: str | Path) -> Pmf:
    return pmf_from_text(Path(path).read_text())


def pmf_to_file(p: Pmf, path: str | Path) -> None:
    Path(path).write_text(pmf_to_text(p))
