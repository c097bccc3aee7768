"""Weighted undirected graphs, cut primitives, and weight preprocessing.

Vertices are 1-indexed to match the instance file format. Edge weights are
64-bit floats; ``math.inf`` is the distinguished INFINITE marker, produced
only by :func:`preprocess_weights`. Internally, infinite weights are modeled
as (sum of all finite weights) + 1 so that max-flow and greedy arithmetic
never see ``inf - inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import networkx as nx
import numpy as np

from .errors import InfeasibleError

# Absolute tolerance for all float comparisons on weights and measures.
ABS_TOL = 1e-9

INFINITE = math.inf

Edge = tuple[int, int, float]


@dataclass(frozen=True)
class WeightedGraph:
    """Immutable undirected graph on vertices 1..n with weights >= 0.

    Invariants enforced at construction: no self-loops, each unordered
    vertex pair appears at most once, every finite weight is non-negative.
    All derived structures are cached; instances are safe to share between
    threads.
    """

    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"vertex count must be >= 1, got {self.n}")
        seen: set[tuple[int, int]] = set()
        for u, v, w in self.edges:
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise ValueError(f"edge ({u},{v}) out of 1..{self.n}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            if math.isnan(w) or w < 0:
                raise ValueError(f"edge {key} has invalid weight {w}")

    @staticmethod
    def from_edges(n: int, edges: Iterable[tuple[int, int, float]]) -> "WeightedGraph":
        return WeightedGraph(n, tuple((u, v, float(w)) for u, v, w in edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        """Per-vertex list of (neighbor, weight), indexed by vertex-1."""
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            adj[u - 1].append((v, w))
            adj[v - 1].append((u, w))
        return tuple(tuple(a) for a in adj)

    @cached_property
    def finite_weight_sum(self) -> float:
        return float(sum(w for _, _, w in self.edges if math.isfinite(w)))

    @cached_property
    def cap_value(self) -> float:
        """Finite stand-in for INFINITE: strictly exceeds every finite cut."""
        return self.finite_weight_sum + 1.0

    @cached_property
    def has_infinite(self) -> bool:
        return any(math.isinf(w) for _, _, w in self.edges)

    def capped(self, w: float) -> float:
        return self.cap_value if math.isinf(w) else w

    @cached_property
    def degw_capped(self) -> np.ndarray:
        deg = np.zeros(self.n)
        for u, v, w in self.edges:
            cw = self.capped(w)
            deg[u - 1] += cw
            deg[v - 1] += cw
        return deg

    @cached_property
    def weight_matrix_capped(self) -> np.ndarray:
        """Dense symmetric weight matrix with INFINITE replaced by cap_value."""
        if self.n > 4096:
            raise ValueError("dense weight matrix capped at n <= 4096")
        mat = np.zeros((self.n, self.n))
        for u, v, w in self.edges:
            cw = self.capped(w)
            mat[u - 1, v - 1] = cw
            mat[v - 1, u - 1] = cw
        return mat

    def uncap_cost(self, capped_cost: float) -> float:
        """Translate a cost computed on capped weights back to inf semantics."""
        if capped_cost > self.finite_weight_sum + 0.5:
            return INFINITE
        return capped_cost


@dataclass(frozen=True)
class TerminalSet:
    """Ordered terminals t_1..t_k, all distinct, k >= 2."""

    terminals: tuple[int, ...]

    def __post_init__(self):
        if len(self.terminals) < 2:
            raise ValueError("need at least 2 terminals")
        if len(set(self.terminals)) != len(self.terminals):
            raise ValueError("terminals must be distinct")
        if any(t < 1 for t in self.terminals):
            raise ValueError("terminals must be positive vertex ids")

    @property
    def k(self) -> int:
        return len(self.terminals)

    def validate_for(self, n: int) -> None:
        for t in self.terminals:
            if t > n:
                raise ValueError(f"terminal {t} outside 1..{n}")


@dataclass(frozen=True)
class Partition:
    """Disjoint vertex sets; ``terminals[i]`` labels ``parts[i]`` when set."""

    parts: tuple[frozenset[int], ...]
    terminals: tuple[int, ...] | None = None

    def validate(self, g: WeightedGraph, complete: bool = True) -> None:
        seen: set[int] = set()
        for p in self.parts:
            if p & seen:
                raise ValueError("parts overlap")
            seen |= p
        if not seen <= set(range(1, g.n + 1)):
            raise ValueError("part vertex outside graph")
        if complete and len(seen) != g.n:
            raise ValueError("parts do not cover all vertices")
        if self.terminals is not None:
            if len(self.terminals) != len(self.parts):
                raise ValueError("label/part count mismatch")
            for t, p in zip(self.terminals, self.parts):
                if t not in p:
                    raise ValueError(f"terminal {t} not in its part")

    def cut_vector(self, g: WeightedGraph) -> tuple[float, ...]:
        return tuple(boundary_weight(g, p) for p in self.parts)


def _as_vertex_set(g: WeightedGraph, vertices: Iterable[int]) -> frozenset[int]:
    s = frozenset(vertices)
    for v in s:
        if not (1 <= v <= g.n):
            raise ValueError(f"vertex {v} outside 1..{g.n}")
    return s


def boundary_weight(g: WeightedGraph, vertices: Iterable[int]) -> float:
    """Total weight of edges with exactly one endpoint in the set.

    Returns 0 for the empty set and for all of V; INFINITE if an infinite
    edge crosses.
    """
    s = _as_vertex_set(g, vertices)
    total = 0.0
    for u, v, w in g.edges:
        if (u in s) != (v in s):
            total += w
    return total


def cross_weight(g: WeightedGraph, a: Iterable[int], b: Iterable[int]) -> float:
    """Total weight of edges with one endpoint in a and the other in b."""
    sa = _as_vertex_set(g, a)
    sb = _as_vertex_set(g, b)
    if sa & sb:
        raise ValueError("cross_weight requires disjoint sets")
    total = 0.0
    for u, v, w in g.edges:
        if (u in sa and v in sb) or (u in sb and v in sa):
            total += w
    return total


def part_boundaries(g: WeightedGraph, part_of: dict[int, int], nparts: int) -> np.ndarray:
    """Boundary weight of each part in a single edge pass.

    ``part_of`` maps vertex -> part index; unmapped vertices belong to no part.
    An edge crossing out of a part counts toward that part's boundary.
    """
    delta = np.zeros(nparts)
    for u, v, w in g.edges:
        pu = part_of.get(u, -1)
        pv = part_of.get(v, -1)
        if pu != pv:
            if pu >= 0:
                delta[pu] += w
            if pv >= 0:
                delta[pv] += w
    return delta


def min_isolating_cut(
    g: WeightedGraph, t: TerminalSet, i: int, require_finite: bool = False
) -> tuple[frozenset[int], float]:
    """Minimum cut isolating t_i from the other terminals (1-based i).

    Computed by exact max-flow with the other terminals merged into one
    sink. Returns the source side and its boundary weight; the cost is
    INFINITE when every isolating cut severs an infinite edge.
    """
    if not (1 <= i <= t.k):
        raise ValueError(f"terminal index {i} outside 1..{t.k}")
    t.validate_for(g.n)
    source = t.terminals[i - 1]
    others = set(t.terminals) - {source}

    sink = 0  # vertex ids are >= 1, so 0 is free to use
    h = nx.Graph()
    h.add_node(source)
    h.add_node(sink)
    for u, v, w in g.edges:
        hu = sink if u in others else u
        hv = sink if v in others else v
        if hu == hv:
            continue
        cw = g.capped(w)
        if h.has_edge(hu, hv):
            h[hu][hv]["capacity"] += cw
        else:
            h.add_edge(hu, hv, capacity=cw)

    if not nx.has_path(h, source, sink):
        side = frozenset(nx.node_connected_component(h, source))
        return side, boundary_weight(g, side)

    _, (src_side, _) = nx.minimum_cut(h, source, sink)
    side = frozenset(v for v in src_side if v != sink)
    cost = boundary_weight(g, side)
    if require_finite and math.isinf(cost):
        raise InfeasibleError(f"every cut isolating t_{i} has infinite weight")
    return side, cost


def isolating_cuts(g: WeightedGraph, t: TerminalSet) -> list[tuple[frozenset[int], float]]:
    return [min_isolating_cut(g, t, i) for i in range(1, t.k + 1)]


def preprocess_weights(g: WeightedGraph, w_guess: float, eps: float) -> WeightedGraph:
    """Clamp the weight range around a guessed top cut weight.

    Weights below eps*W/n^2 drop to zero, weights strictly above W become
    INFINITE, everything in between is kept. Strict > keeps the guess W
    itself finite (W is by definition a weight the optimum cuts).
    """
    if not (w_guess > 0):
        raise ValueError(f"weight guess must be positive, got {w_guess}")
    if not (0 < eps < 1):
        raise ValueError(f"eps must be in (0,1), got {eps}")
    floor = eps * w_guess / (g.n * g.n)
    new_edges = []
    for u, v, w in g.edges:
        if w > w_guess:
            nw = INFINITE
        elif w < floor:
            nw = 0.0
        else:
            nw = w
        new_edges.append((u, v, nw))
    return WeightedGraph(g.n, tuple(new_edges))


def guess_weight_scales(g: WeightedGraph) -> list[float]:
    """Sorted distinct positive finite edge weights (candidates for W)."""
    return sorted({w for _, _, w in g.edges if 0 < w and math.isfinite(w)})


def finite_weight_ratio(g: WeightedGraph) -> float:
    """Ratio of largest to smallest positive finite weight; 1.0 if fewer than one."""
    pos = [w for _, _, w in g.edges if 0 < w and math.isfinite(w)]
    if not pos:
        return 1.0
    return max(pos) / min(pos)


def min_positive_weight(g: WeightedGraph) -> float:
    """Smallest positive weight, with INFINITE capped; inf if none exists."""
    pos = [g.capped(w) for _, _, w in g.edges if w > 0]
    return min(pos) if pos else INFINITE
