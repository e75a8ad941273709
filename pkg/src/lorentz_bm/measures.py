"""Probability measures on finite causal spaces and their entropies.

Every measure on a finite space with strictly positive reference weights has
a density, so the Rényi and Boltzmann entropies below are always finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .causal import FiniteCausalSpace

NORM_EXACT = 1e-12
NORM_DRIFT = 1e-9


class MeasureError(ValueError):
    pass


class AllLevelsVanish(MeasureError):
    """Dyadic flooring wiped out the whole density."""


class DiscreteMeasure:
    """Probability weights over the points of a :class:`FiniteCausalSpace`."""

    def __init__(self, space: FiniteCausalSpace, weights: Sequence[float]):
        w = np.array(weights, dtype=float)
        if w.shape != (space.n,):
            raise MeasureError(f"weights have shape {w.shape}, space has {space.n} points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise MeasureError("weights must be finite and nonnegative")
        total = w.sum()
        drift = abs(total - 1.0)
        if drift > NORM_DRIFT:
            raise MeasureError(f"weights sum to {total!r}, not 1")
        if drift > NORM_EXACT:
            w /= total
        w.setflags(write=False)
        self.space = space
        self.weights = w

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    @property
    def density(self) -> np.ndarray:
        return self.weights / self.space.ref_mass

    def support_mass(self) -> float:
        return float(self.space.ref_mass[self.support].sum())

    def __repr__(self) -> str:
        return f"DiscreteMeasure(|support|={self.support.size}, n={self.space.n})"

    def to_json(self) -> dict:
        return {"weights": [float(x) for x in self.weights]}

    @classmethod
    def from_json(cls, space: FiniteCausalSpace, doc: dict) -> "DiscreteMeasure":
        extra = set(doc) - {"weights"}
        if extra:
            raise MeasureError(f"unknown measure fields {sorted(extra)}")
        return cls(space, doc["weights"])

    @classmethod
    def from_density(cls, space: FiniteCausalSpace, rho: Sequence[float]) -> "DiscreteMeasure":
        w = np.asarray(rho, dtype=float) * space.ref_mass
        s = w.sum()
        if s <= 0:
            raise MeasureError("density has zero total mass")
        return cls(space, w / s)


def _indices(A: Iterable[int]) -> np.ndarray:
    if isinstance(A, np.ndarray):
        return np.unique(A.astype(np.intp))
    return np.unique(np.fromiter(A, dtype=np.intp))


def uniform_measure(space: FiniteCausalSpace, A: Iterable[int]) -> DiscreteMeasure:
    """Normalized reference measure restricted to ``A``."""
    A = _indices(A)
    if A.size == 0:
        raise MeasureError("uniform measure on an empty set")
    w = np.zeros(space.n)
    w[A] = space.ref_mass[A] / space.ref_mass[A].sum()
    return DiscreteMeasure(space, w)


def dirac(space: FiniteCausalSpace, i: int) -> DiscreteMeasure:
    w = np.zeros(space.n)
    w[i] = 1.0
    return DiscreteMeasure(space, w)


def renyi_entropy(mu: DiscreteMeasure, N: float) -> float:
    """``S_N(mu) = -sum rho^(1 - 1/N) m`` over the support."""
    if not N > 1:
        raise ValueError(f"Rényi entropy needs N > 1, got {N}")
    s = mu.support
    rho = mu.density[s]
    return -float(np.sum(rho ** (1.0 - 1.0 / N) * mu.space.ref_mass[s]))


def boltzmann_entropy(mu: DiscreteMeasure) -> float:
    """``Ent(mu) = sum rho log rho m`` with ``0 log 0 = 0``."""
    s = mu.support
    rho = mu.density[s]
    return float(np.sum(xlogy(rho, rho) * mu.space.ref_mass[s]))


def exp_entropy(mu: DiscreteMeasure, N: float) -> float:
    if not N > 1:
        raise ValueError(f"exp_entropy needs N > 1, got {N}")
    return math.exp(-boltzmann_entropy(mu) / N)


def mutually_singular(parts: Sequence[DiscreteMeasure]) -> bool:
    seen = np.zeros(parts[0].space.n, dtype=bool) if parts else None
    for mu in parts:
        if mu.space is not parts[0].space:
            raise ValueError("measures live on different spaces")
        s = mu.weights > 0
        if np.any(seen & s):
            return False
        seen |= s
    return True


@dataclass(frozen=True)
class SimpleDecomposition:
    """``sum_j lam_j * m_{A_j}`` with disjoint ``A_j``."""

    space: FiniteCausalSpace
    parts: tuple[tuple[np.ndarray, float], ...]

    def __post_init__(self):
        seen = np.zeros(self.space.n, dtype=bool)
        total = 0.0
        for A, lam in self.parts:
            if lam <= 0:
                raise MeasureError("part weights must be positive")
            if A.size == 0 or self.space.ref_mass[A].sum() <= 0:
                raise MeasureError("parts need positive reference measure")
            if np.any(seen[A]):
                raise MeasureError("parts overlap")
            seen[A] = True
            total += lam
        if abs(total - 1.0) > NORM_DRIFT:
            raise MeasureError(f"part weights sum to {total}")

    def __len__(self) -> int:
        return len(self.parts)

    def measure(self) -> DiscreteMeasure:
        w = np.zeros(self.space.n)
        for A, lam in self.parts:
            w[A] += lam * self.space.ref_mass[A] / self.space.ref_mass[A].sum()
        return DiscreteMeasure(self.space, w)

    def components(self) -> list[DiscreteMeasure]:
        return [uniform_measure(self.space, A) for A, _ in self.parts]


def simple_sequence(mu: DiscreteMeasure, n: int) -> SimpleDecomposition:
    """Level-set simple approximation at dyadic resolution ``2**-n``.

    The density is floored to ``2**-n * Z``, cells are grouped by floored
    level, zero levels dropped and the result renormalized.  The floored
    density never exceeds the original, so the support can only shrink.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    space = mu.space
    scale = 2.0 ** n
    floored = np.floor(mu.density * scale) / scale
    z = float(np.sum(floored * space.ref_mass))
    if z <= 0:
        raise AllLevelsVanish(f"every density level floors to 0 at n={n}")
    parts = []
    for level in np.unique(floored[floored > 0]):
        A = np.flatnonzero(floored == level)
        parts.append((A, float(level * space.ref_mass[A].sum() / z)))
    # fix rounding so the weights sum to one exactly
    lam_sum = sum(l for _, l in parts)
    parts = [(A, l / lam_sum) for A, l in parts]
    return SimpleDecomposition(space, tuple(parts))
