"""Brute-force exact solvers used as ground truth at desk scale.

All tie-breaks are lexicographic on the enumeration string so goldens are
reproducible. These exist for correctness, not speed; enumeration is
chunked numpy where it pays, plain loops elsewhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InstanceTooLargeError
from .graph import ABS_TOL, Partition, TerminalSet, WeightedGraph, boundary_weight
from .norms import NormSpec
from .utc import UtcInstance, UtcSolution

DEFAULT_BUDGET = 10_000_000

_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleBudget:
    max_assignments: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.max_assignments < 1:
            raise ValueError("budget must be positive")


def brute_force_multiway(
    g: WeightedGraph,
    t: TerminalSet,
    spec: NormSpec,
    budget: OracleBudget = OracleBudget(),
) -> tuple[Partition, float]:
    """Enumerate every assignment of non-terminals to the k terminal parts
    and return a norm minimizer (lexicographically least assignment on ties).
    """
    t.validate_for(g.n)
    k = t.k
    if spec.k != k:
        raise ValueError("norm dimension must equal the number of terminals")
    free = [v for v in range(1, g.n + 1) if v not in set(t.terminals)]
    r = len(free)
    count = k**r
    if count > budget.max_assignments:
        raise InstanceTooLargeError(
            f"{count} assignments exceed the oracle budget {budget.max_assignments}"
        )

    term_part = {term: i for i, term in enumerate(t.terminals)}
    free_pos = {v: j for j, v in enumerate(free)}

    best_val = math.inf
    best_idx = -1
    # Digits with free[0] most significant: index order == lexicographic
    # order of assignment tuples, and np.argmin keeps the first minimum.
    place = np.array([k ** (r - 1 - j) for j in range(r)], dtype=np.int64)
    for start in range(0, count, _CHUNK):
        stop = min(start + _CHUNK, count)
        idx = np.arange(start, stop, dtype=np.int64)
        digits = (idx[:, None] // place[None, :]) % k if r else np.zeros((len(idx), 0), dtype=np.int64)
        cuts = np.zeros((len(idx), k))
        for u, v, w in g.edges:
            if u in term_part and v in term_part:
                pu_col = np.full(len(idx), term_part[u])
                pv_col = np.full(len(idx), term_part[v])
            elif u in term_part:
                pu_col = np.full(len(idx), term_part[u])
                pv_col = digits[:, free_pos[v]]
            elif v in term_part:
                pu_col = digits[:, free_pos[u]]
                pv_col = np.full(len(idx), term_part[v])
            else:
                pu_col = digits[:, free_pos[u]]
                pv_col = digits[:, free_pos[v]]
            crossed = pu_col != pv_col
            for part in range(k):
                cuts[:, part] += w * (crossed & ((pu_col == part) | (pv_col == part)))
        vals = spec.evaluate_batch(cuts)
        j = int(np.argmin(vals))
        if vals[j] < best_val - 1e-12:
            best_val = float(vals[j])
            best_idx = start + j

    digits_best = [(best_idx // int(place[j])) % k for j in range(r)]
    parts = [set([term]) for term in t.terminals]
    for j, v in enumerate(free):
        parts[digits_best[j]].add(v)
    partition = Partition(tuple(frozenset(p) for p in parts), t.terminals)
    partition.validate(g)
    return partition, spec.evaluate(partition.cut_vector(g))


def brute_force_ssbve(
    adjacency: tuple[frozenset[int], ...],
    k: int,
    t: int,
    budget: OracleBudget = OracleBudget(),
) -> tuple[frozenset[int], int]:
    """Exact minimizer of |N(S)| over size-t subsets of the left side.

    ``adjacency`` lists each right vertex's left neighborhood. Ties break
    to the lexicographically least subset.
    """
    if not (1 <= t <= k):
        raise ValueError(f"t must lie in 1..{k}")
    if math.comb(k, t) > budget.max_assignments:
        raise InstanceTooLargeError("subset count exceeds the oracle budget")
    left_mask = [0] * (k + 1)
    for j, nb in enumerate(adjacency):
        for i in nb:
            if not (1 <= i <= k):
                raise ValueError(f"left vertex {i} outside 1..{k}")
            left_mask[i] |= 1 << j
    best: tuple[int, tuple[int, ...]] | None = None
    for combo in itertools.combinations(range(1, k + 1), t):
        mask = 0
        for i in combo:
            mask |= left_mask[i]
        size = bin(mask).count("1")
        if best is None or size < best[0]:
            best = (size, combo)
    assert best is not None
    return frozenset(best[1]), best[0]


def brute_force_utc(
    inst: UtcInstance, budget: OracleBudget = OracleBudget()
) -> UtcSolution:
    """Independent exact UTC enumerator: iterates subsets by size then
    lexicographic order (a different path than the mask-order backend)."""
    g, t = inst.graph, inst.terminals
    n = g.n
    if 2**n > budget.max_assignments:
        raise InstanceTooLargeError("2^n exceeds the oracle budget")
    total = sum(inst.mu)
    bound = inst.rho * total - ABS_TOL
    terms = set(t.terminals)
    best: tuple[float, frozenset[int], float] | None = None
    for size in range(0, n + 1):
        for combo in itertools.combinations(range(1, n + 1), size):
            s = frozenset(combo)
            if len(s & terms) > 1:
                continue
            measure = sum(inst.mu[v - 1] for v in s)
            if measure < bound:
                continue
            cost = boundary_weight(g, s)
            cost_key = g.cap_value if math.isinf(cost) else cost
            if best is None or cost_key < best[0] - 1e-12:
                best = (cost_key, s, measure)
    if best is None:
        raise InfeasibleError("no subset meets the measure bound with <= 1 terminal")
    _, s, measure = best
    return UtcSolution(s, boundary_weight(g, s), measure, "brute-force")
