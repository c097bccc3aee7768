"""Multiplicative-weights covering procedures.

Both variants start every vertex at measure 1, repeatedly extract a cheap
set with at most one terminal and substantial measure, halve the measure
of covered vertices, and stop once the total measure drops below 1/n.
Structural consequences of that loop are asserted on every run:

* each vertex ends up in at least floor(log2 n) + 1 sets,
* sum_t mu_t(S_t)/mu_t(V) <= 4 ln n + 1,
* with the exact backend, at most 2k(4 ln n + 1) sets total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GuessTooLowError, InfeasibleError, InvariantViolationError
from .graph import (
    ABS_TOL,
    Partition,
    TerminalSet,
    WeightedGraph,
    boundary_weight,
    isolating_cuts,
    min_positive_weight,
)
from .norms import NormSpec, compute_index_sets, indicator_norm
from .utc import UtcBackend, UtcSolution

# Geometric thinning of the guess grid. Any attainable measure value is
# still matched within factor 2 by a surviving grid point.
_GRID_DEDUP_FACTOR = 1.5

# Hard stop for covering loops; never reached with the exact backend
# (cover-size bound), guards heuristic corner cases.
_ITERATION_CAP_MULT = 64


@dataclass(frozen=True)
class MeasureState:
    """Per-vertex measures at iteration t; mu[v-1] is the measure of v."""

    mu: tuple[float, ...]
    t: int = 1

    @staticmethod
    def initial(n: int) -> "MeasureState":
        return MeasureState(tuple(1.0 for _ in range(n)))

    @property
    def total(self) -> float:
        return sum(self.mu)

    def as_array(self) -> np.ndarray:
        return np.array(self.mu)


def halve_measure(state: MeasureState, covered: frozenset[int]) -> MeasureState:
    """Halve the measure of every covered vertex; advance the iteration."""
    mu = tuple(
        m / 2.0 if (v + 1) in covered else m for v, m in enumerate(state.mu)
    )
    return MeasureState(mu, state.t + 1)


@dataclass(frozen=True)
class CoverSet:
    vertices: frozenset[int]
    iteration: int
    cost: float
    measure_ratio: float  # mu_t(S_t) / mu_t(V) at acceptance time
    group: int | None = None


@dataclass
class Cover:
    """Output of a covering run, with per-set metadata.

    ``isolating`` / ``index_sets`` / ``r_values`` are populated only by the
    norm variant; ``r_values[i]`` is None for skipped (empty) groups.
    """

    sets: list[CoverSet]
    k: int
    n: int
    backend_name: str
    measure_budget: float
    isolating: list[tuple[frozenset[int], float]] | None = None
    index_sets: list[frozenset[int]] | None = None
    r_values: list[float | None] | None = None
    iterations: int = 0
    vertex_counts: dict[int, int] = field(default_factory=dict)


def _budget_bound(n: int) -> float:
    return 4.0 * math.log(n) + 1.0


def _check_cover_invariants(cover: Cover) -> None:
    n = cover.n
    need = int(math.floor(math.log2(n))) + 1 if n > 1 else 1
    low = [v for v in range(1, n + 1) if cover.vertex_counts.get(v, 0) < need]
    if low:
        raise InvariantViolationError(
            f"vertices {low[:5]} appear in fewer than {need} cover sets"
        )
    bound = _budget_bound(n)
    if cover.measure_budget > bound + ABS_TOL:
        raise InvariantViolationError(
            f"measure budget {cover.measure_budget:.6f} exceeds {bound:.6f}"
        )
    if cover.backend_name == "exact":
        max_sets = 2 * cover.k * bound
        if len(cover.sets) > max_sets + ABS_TOL:
            raise InvariantViolationError(
                f"{len(cover.sets)} cover sets exceed exact-backend bound {max_sets:.2f}"
            )


def _guess_grid_rhos(mu: np.ndarray, total: float, k: int) -> list[float]:
    """Candidate rho values for one iteration, ascending and deduplicated.

    The raw grid is {2^i * mu(v)} clamped to the total measure; values
    within factor 1.5 of a kept one are dropped, then each survivor maps to
    max(1/2k, a/total). Collapsing equal rhos is free: the same instance
    would be solved twice.
    """
    levels = int(math.floor(math.log2(len(mu)))) if len(mu) > 1 else 0
    raw = sorted({
        min(float(m) * (2.0**i), total)
        for m in mu
        if m > 0
        for i in range(levels + 1)
    })
    kept: list[float] = []
    for val in raw:
        if not kept or val > kept[-1] * _GRID_DEDUP_FACTOR:
            kept.append(val)
    floor_rho = 1.0 / (2.0 * k)
    rhos = sorted({max(floor_rho, a / total) for a in kept})
    if not rhos:
        rhos = [floor_rho]
    return rhos


def _iteration_cap(k: int, n: int) -> int:
    return int(math.ceil(_ITERATION_CAP_MULT * k * math.log2(max(n, 2))))


def cover_lp(
    g: WeightedGraph, t: TerminalSet, p: float, backend: UtcBackend
) -> Cover:
    """Covering loop for the lp objective.

    Per iteration: build the measure-guess grid, solve one UTC query per
    candidate rho, keep the cheapest feasible set (ties prefer larger
    measure, then smaller rho), halve its vertices' measures.
    """
    if not (p >= 1) or math.isinf(p):
        raise ValueError("p must be finite and >= 1 (substitute log2 k for inf)")
    t.validate_for(g.n)
    n, k = g.n, t.k
    profile = backend.profile(g, t)
    backend_name = backend.resolve(n)

    state = MeasureState.initial(n)
    sets: list[CoverSet] = []
    counts: dict[int, int] = {}
    budget = 0.0
    cap = _iteration_cap(k, n)
    while state.total >= 1.0 / n:
        if state.t > cap:
            raise InvariantViolationError(
                f"covering exceeded {cap} iterations; measure is not draining"
            )
        mu = state.as_array()
        total = float(mu.sum())
        rhos = _guess_grid_rhos(mu, total, k)
        solutions = profile.solve_many(mu, rhos)
        chosen: UtcSolution | None = None
        for sol in solutions:
            if sol is None:
                continue
            if chosen is None or (sol.cost, -sol.measure) < (chosen.cost, -chosen.measure):
                chosen = sol
        if chosen is None:
            raise InfeasibleError(
                "UTC infeasible even at rho = 1/2k; measures degenerate"
            )
        ratio = chosen.measure / total
        budget += ratio
        sets.append(CoverSet(chosen.vertices, state.t, chosen.cost, ratio))
        for v in chosen.vertices:
            counts[v] = counts.get(v, 0) + 1
        state = halve_measure(state, chosen.vertices)

    cover = Cover(sets, k, n, backend_name, budget,
                  iterations=state.t - 1, vertex_counts=counts)
    _check_cover_invariants(cover)
    return cover


def default_alpha_mult(backend_name: str, n: int, k: int) -> float:
    """Accept-threshold multiplier; the heuristic backend needs slack for
    its missing approximation guarantee."""
    if backend_name == "exact":
        return 1.0
    return 8.0 * math.sqrt(max(math.log2(max(n, 2)), 1.0) * max(math.log2(k), 1.0))


def cover_norm(
    g: WeightedGraph,
    t: TerminalSet,
    spec: NormSpec,
    opt_guess: float,
    alpha_mult: float,
    backend: UtcBackend,
    thresholds: list[float] | None = None,
) -> Cover:
    """Covering loop for monotonic-norm objectives.

    Groups are indexed by the index sets I_0..I_L from the minimization
    oracle; group i queries UTC at rho_i = 1/(2 log2(k) |I_i|) and accepts
    when the cut is at most alpha_mult times the group threshold
    (r_i = opt_guess / ||1_{I_i}|| unless explicit thresholds are given).
    Raises GuessTooLowError when an iteration accepts no group.
    """
    if opt_guess < 0:
        raise ValueError("opt_guess must be non-negative")
    t.validate_for(g.n)
    n, k = g.n, t.k
    iso = isolating_cuts(g, t)
    index_sets = compute_index_sets(spec, k)
    r_values: list[float | None] = []
    for idx in index_sets:
        if not idx:
            r_values.append(None)
        else:
            r_values.append(opt_guess / indicator_norm(spec, idx))
    if thresholds is None:
        group_thresholds = r_values
    else:
        if len(thresholds) != len(index_sets):
            raise ValueError("one threshold per index set required")
        group_thresholds = [
            thr if idx else None for thr, idx in zip(thresholds, index_sets)
        ]

    groups = [i for i, idx in enumerate(index_sets) if idx]
    log2k = math.log2(k)
    rhos = [1.0 / (2.0 * log2k * len(index_sets[i])) for i in groups]

    profile = backend.profile(g, t)
    backend_name = backend.resolve(n)
    state = MeasureState.initial(n)
    sets: list[CoverSet] = []
    counts: dict[int, int] = {}
    budget = 0.0
    group_sizes = {i: 0 for i in groups}
    cap = _iteration_cap(k, n)
    while state.total >= 1.0 / n:
        if state.t > cap:
            raise InvariantViolationError(
                f"covering exceeded {cap} iterations; measure is not draining"
            )
        mu = state.as_array()
        total = float(mu.sum())
        solutions = profile.solve_many(mu, rhos)
        accepted: tuple[int, UtcSolution] | None = None
        for gi, sol in zip(groups, solutions):
            if sol is None:
                continue
            thr = group_thresholds[gi]
            assert thr is not None
            if sol.cost <= alpha_mult * thr + ABS_TOL:
                accepted = (gi, sol)
                break
        if accepted is None:
            raise GuessTooLowError(
                f"no group acceptable at guess {opt_guess}; guess too low"
            )
        gi, sol = accepted
        ratio = sol.measure / total
        budget += ratio
        sets.append(CoverSet(sol.vertices, state.t, sol.cost, ratio, group=gi))
        group_sizes[gi] += 1
        for v in sol.vertices:
            counts[v] = counts.get(v, 0) + 1
        state = halve_measure(state, sol.vertices)

    cover = Cover(sets, k, n, backend_name, budget, isolating=iso,
                  index_sets=index_sets, r_values=r_values,
                  iterations=state.t - 1, vertex_counts=counts)
    _check_cover_invariants(cover)
    if backend_name == "exact":
        bound_mult = 2.0 * log2k * _budget_bound(n)
        for gi in groups:
            allowed = bound_mult * len(index_sets[gi])
            if group_sizes[gi] > allowed + ABS_TOL:
                raise InvariantViolationError(
                    f"group {gi} holds {group_sizes[gi]} sets, exceeding {allowed:.2f}"
                )
    return cover


def trivial_partition(g: WeightedGraph, t: TerminalSet) -> Partition:
    """All non-terminals assigned to t_1; each other terminal isolated."""
    rest = set(range(1, g.n + 1)) - set(t.terminals)
    parts = [frozenset({t.terminals[0]}) | frozenset(rest)]
    parts += [frozenset({term}) for term in t.terminals[1:]]
    return Partition(tuple(parts), t.terminals)


def binary_search_opt(
    g: WeightedGraph,
    t: TerminalSet,
    spec: NormSpec,
    alpha_mult: float,
    backend: UtcBackend,
) -> tuple[Cover, float]:
    """Smallest power-of-two guess (scaled from the isolating-cut norm) for
    which the norm covering succeeds, together with its cover.

    The isolating-cut vector norm is a valid lower bound: the norm is
    monotonic and each isolating cut costs at most its optimal part.
    """
    iso = isolating_cuts(g, t)
    lo = spec.evaluate([cost for _, cost in iso])
    hi = spec.evaluate(trivial_partition(g, t).cut_vector(g))

    if lo <= 0:
        try:
            return cover_norm(g, t, spec, 0.0, alpha_mult, backend), 0.0
        except GuessTooLowError:
            pass
        base = min_positive_weight(g)
        if math.isinf(base):
            raise InvariantViolationError(
                "zero-cost guess failed on a graph with no positive weights"
            )
    else:
        base = lo

    guess = base
    ceiling = max(hi, base) * 4.0 + ABS_TOL
    while guess <= ceiling:
        try:
            cover = cover_norm(g, t, spec, guess, alpha_mult, backend)
            return cover, guess
        except GuessTooLowError:
            guess *= 2.0
    raise InvariantViolationError(
        f"covering failed for every guess up to {ceiling}; threshold logic is broken"
    )
