"""Monotonic norms on R^k and their minimization / ordering oracles.

Coordinates are 1-indexed in the public API (sets are subsets of {1..k},
permutations are tuples of 1-based source indices); vectors are ordinary
0-indexed sequences with coordinate i stored at x[i-1].

A permutation ``pi`` returned by :func:`ordering_oracle` rearranges x into
the vector y with y[j] = x[pi[j] - 1]: position j+1 receives source
coordinate pi[j].
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CapabilityError, InstanceTooLargeError

# Generic enumeration backends stay honest about hardness: beyond these
# caps there is no shipped oracle for arbitrary norms.
GENERIC_SUBSET_CAP = 24
GENERIC_PERM_CAP = 8


class NormSpec(ABC):
    """A monotonic norm on R^k plus capability flags for its oracles."""

    k: int
    permutation_invariant: bool = False
    has_minimization_oracle: bool = True
    has_ordering_oracle: bool = True

    @abstractmethod
    def evaluate(self, x: Sequence[float]) -> float:
        """Norm of a length-k vector."""

    def evaluate_batch(self, rows: np.ndarray) -> np.ndarray:
        """Norms of the rows of a (batch, k) matrix. Default: row loop."""
        return np.array([self.evaluate(row) for row in rows])

    # Subclasses may provide closed-form oracles; None falls back to
    # capped enumeration.
    def _fast_min_indicator(self, size: int) -> frozenset[int] | None:
        return None

    def _fast_ordering(self, x: Sequence[float]) -> tuple[int, ...] | None:
        return None

    def _check_dim(self, x: Sequence[float]) -> None:
        if len(x) != self.k:
            raise ValueError(f"expected a length-{self.k} vector, got {len(x)}")


def _stable_power_sum(vals: Iterable[float], p: float) -> float:
    """(sum v^p)^(1/p) computed with max-scaling so large p does not overflow."""
    vals = [abs(v) for v in vals]
    top = max(vals, default=0.0)
    if top == 0.0:
        return 0.0
    return top * math.fsum((v / top) ** p for v in vals) ** (1.0 / p)


@dataclass(frozen=True)
class LpNorm(NormSpec):
    """The lp norm; p = math.inf is the max-norm marker."""

    k: int
    p: float
    permutation_invariant = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("dimension must be positive")
        if not (self.p >= 1):
            raise ValueError(f"p must be >= 1, got {self.p}")

    def evaluate(self, x: Sequence[float]) -> float:
        self._check_dim(x)
        if math.isinf(self.p):
            return max((abs(v) for v in x), default=0.0)
        return _stable_power_sum(x, self.p)

    def evaluate_batch(self, rows: np.ndarray) -> np.ndarray:
        a = np.abs(np.asarray(rows, dtype=float))
        if math.isinf(self.p):
            return a.max(axis=1)
        top = a.max(axis=1)
        safe = np.where(top > 0, top, 1.0)
        out = safe * ((a / safe[:, None]) ** self.p).sum(axis=1) ** (1.0 / self.p)
        return np.where(top > 0, out, 0.0)

    def _fast_min_indicator(self, size: int) -> frozenset[int]:
        return frozenset(range(1, size + 1))

    def _fast_ordering(self, x: Sequence[float]) -> tuple[int, ...]:
        return tuple(range(1, self.k + 1))


@dataclass(frozen=True)
class WeightedLpNorm(NormSpec):
    """||x|| = (sum_i c_i |x_i|^p)^(1/p) with positive coordinate weights."""

    k: int
    c: tuple[float, ...]
    p: float

    def __post_init__(self):
        if len(self.c) != self.k:
            raise ValueError("weight vector length must equal k")
        if any(ci <= 0 for ci in self.c):
            raise ValueError("coordinate weights must be positive")
        if not (self.p >= 1) or math.isinf(self.p):
            raise ValueError(f"p must be finite and >= 1, got {self.p}")

    def evaluate(self, x: Sequence[float]) -> float:
        self._check_dim(x)
        top = max((abs(v) for v in x), default=0.0)
        if top == 0.0:
            return 0.0
        s = math.fsum(ci * (abs(v) / top) ** self.p for ci, v in zip(self.c, x))
        return top * s ** (1.0 / self.p)

    def evaluate_batch(self, rows: np.ndarray) -> np.ndarray:
        a = np.abs(np.asarray(rows, dtype=float))
        top = a.max(axis=1)
        safe = np.where(top > 0, top, 1.0)
        s = ((a / safe[:, None]) ** self.p * np.asarray(self.c)).sum(axis=1)
        return np.where(top > 0, safe * s ** (1.0 / self.p), 0.0)

    def _fast_min_indicator(self, size: int) -> frozenset[int]:
        order = sorted(range(1, self.k + 1), key=lambda i: (self.c[i - 1], i))
        return frozenset(order[:size])

    def _fast_ordering(self, x: Sequence[float]) -> tuple[int, ...]:
        # Rearrangement: pair large |x| with small c. Lexicographically
        # smallest optimal permutation via position-by-position greedy with
        # an exact (fsum) optimal-completion check.
        z = [abs(v) ** self.p for v in x]

        def completion(c_positions: list[int], sources: list[int]) -> float:
            cs = sorted(self.c[j - 1] for j in c_positions)
            zs = sorted((z[s - 1] for s in sources), reverse=True)
            return math.fsum(ci * zi for ci, zi in zip(cs, zs))

        remaining = list(range(1, self.k + 1))
        perm: list[int] = []
        fixed = 0.0
        positions_left = list(range(1, self.k + 1))
        best_total = completion(positions_left, remaining)
        for pos in range(1, self.k + 1):
            positions_left = list(range(pos + 1, self.k + 1))
            for s in remaining:
                rest = [r for r in remaining if r != s]
                val = math.fsum(
                    [fixed, self.c[pos - 1] * z[s - 1], completion(positions_left, rest)]
                )
                if val <= best_total + 1e-12 * max(1.0, abs(best_total)):
                    perm.append(s)
                    fixed = math.fsum([fixed, self.c[pos - 1] * z[s - 1]])
                    remaining = rest
                    break
        return tuple(perm)


@dataclass(frozen=True)
class NeighborhoodMaxNorm(NormSpec):
    """||x|| = sum over right vertices of max_{i in N(v)} |x_i|.

    The bipartite structure has left side {1..k} and one neighborhood per
    right vertex. Right vertices with empty neighborhoods contribute 0 and
    are dropped at construction. Minimizing indicator norms of this family
    is exactly small-set bipartite vertex expansion, so only the capped
    enumeration oracle exists.
    """

    k: int
    neighborhoods: tuple[frozenset[int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "neighborhoods", tuple(n for n in self.neighborhoods if n)
        )
        for nb in self.neighborhoods:
            if not nb <= set(range(1, self.k + 1)):
                raise ValueError("neighborhood outside 1..k")

    @property
    def n_right(self) -> int:
        return len(self.neighborhoods)

    def evaluate(self, x: Sequence[float]) -> float:
        self._check_dim(x)
        return math.fsum(max(abs(x[i - 1]) for i in nb) for nb in self.neighborhoods)

    def evaluate_batch(self, rows: np.ndarray) -> np.ndarray:
        a = np.abs(np.asarray(rows, dtype=float))
        out = np.zeros(a.shape[0])
        for nb in self.neighborhoods:
            idx = np.fromiter((i - 1 for i in nb), dtype=int)
            out += a[:, idx].max(axis=1)
        return out


def eval_norm(spec: NormSpec, x: Sequence[float]) -> float:
    spec._check_dim(x)
    return spec.evaluate(x)


def indicator_norm(spec: NormSpec, coords: Iterable[int]) -> float:
    """Norm of the 0/1 indicator vector of a coordinate set."""
    s = set(coords)
    if not s <= set(range(1, spec.k + 1)):
        raise ValueError("coordinates outside 1..k")
    x = [1.0 if i in s else 0.0 for i in range(1, spec.k + 1)]
    return spec.evaluate(x)


def minimization_oracle(spec: NormSpec, size: int) -> frozenset[int]:
    """The size-``size`` coordinate set with minimum indicator norm.

    Ties break toward the lexicographically smallest set. Norms without a
    closed form fall back to exhaustive subset enumeration, capped at
    k <= GENERIC_SUBSET_CAP.
    """
    if not spec.has_minimization_oracle:
        raise CapabilityError("norm has no minimization oracle")
    if not (1 <= size <= spec.k):
        raise ValueError(f"size {size} outside 1..{spec.k}")
    fast = spec._fast_min_indicator(size)
    if fast is not None:
        return fast
    if spec.k > GENERIC_SUBSET_CAP:
        raise InstanceTooLargeError(
            f"generic minimization oracle capped at k <= {GENERIC_SUBSET_CAP}"
        )
    best: tuple[float, tuple[int, ...]] | None = None
    for combo in itertools.combinations(range(1, spec.k + 1), size):
        val = indicator_norm(spec, combo)
        if best is None or val < best[0] - 1e-12:
            best = (val, combo)
    assert best is not None
    return frozenset(best[1])


def ordering_oracle(spec: NormSpec, x: Sequence[float]) -> tuple[int, ...]:
    """Permutation minimizing the norm of the rearranged vector.

    Returns ``pi`` with position j+1 receiving x[pi[j]-1]; ties break
    toward the lexicographically smallest permutation. The generic
    backend enumerates permutations and is capped at k <= GENERIC_PERM_CAP.
    """
    if not spec.has_ordering_oracle:
        raise CapabilityError("norm has no ordering oracle")
    spec._check_dim(x)
    fast = spec._fast_ordering(x)
    if fast is not None:
        return fast
    if spec.k > GENERIC_PERM_CAP:
        raise InstanceTooLargeError(
            f"generic ordering oracle capped at k <= {GENERIC_PERM_CAP}"
        )
    best: tuple[float, tuple[int, ...]] | None = None
    for perm in itertools.permutations(range(1, spec.k + 1)):
        val = spec.evaluate([x[p - 1] for p in perm])
        if best is None or val < best[0] - 1e-12:
            best = (val, perm)
    assert best is not None
    return best[1]


def apply_ordering(x: Sequence[float], perm: Sequence[int]) -> list[float]:
    return [x[p - 1] for p in perm]


def compute_index_sets(spec: NormSpec, k: int) -> list[frozenset[int]]:
    """Index sets I_0..I_L with L = floor(log2 k).

    I_i is the minimum-norm indicator set of size 2^i for i < L; the last
    set has size k - 2^L and is empty exactly when k is a power of two.
    """
    if k != spec.k:
        raise ValueError("dimension mismatch between spec and k")
    big_l = int(math.floor(math.log2(k)))
    sets = [minimization_oracle(spec, 2**i) for i in range(big_l)]
    leftover = k - 2**big_l
    sets.append(minimization_oracle(spec, leftover) if leftover > 0 else frozenset())
    return sets
