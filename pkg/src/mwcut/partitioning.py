"""Uncrossing, aggregation, and the top-level multiway-cut pipelines.

Uncrossing turns an overlapping cover into a disjoint partition whose
parts stay within twice their source set's boundary; aggregation merges
the parts into exactly k terminal-labeled blocks. Pipelines repeat the
randomized stage over independent trials and keep the best feasible
result. Internal arithmetic runs on capped weights (INFINITE mapped to a
finite sentinel), so potentials and comparisons never meet inf - inf.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .covering import (
    Cover,
    binary_search_opt,
    cover_lp,
    cover_norm,
    default_alpha_mult,
)
from .errors import (
    AllTrialsRejectedError,
    GuessTooLowError,
    InvariantViolationError,
    TrialRejectedError,
)
from .graph import (
    ABS_TOL,
    Partition,
    TerminalSet,
    WeightedGraph,
    boundary_weight,
    finite_weight_ratio,
    guess_weight_scales,
    min_positive_weight,
    preprocess_weights,
)
from .norms import (
    LpNorm,
    NormSpec,
    apply_ordering,
    compute_index_sets,
    indicator_norm,
    ordering_oracle,
)
from .utc import utc_backend


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    trials: int = 7
    utc: str = "auto"
    eps_weights: float = 0.01
    alpha_mult: float | None = None
    variant: str = "lp"  # lp | norm-min | norm-ordering

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.variant not in ("lp", "norm-min", "norm-ordering"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not (0 < self.eps_weights < 1):
            raise ValueError("eps_weights must be in (0,1)")


@dataclass(frozen=True)
class UncrossedPart:
    vertices: frozenset[int]
    z_index: int          # position in the uncrossing sequence
    z_boundary: float     # capped boundary of the source set
    boundary: float       # capped boundary of the part at return time
    kind: str             # "isolating" | "cover"
    group: int | None = None


@dataclass
class UncrossedPartition:
    parts: list[UncrossedPart]      # non-empty, in sequence order
    residual: frozenset[int]
    residual_boundary: float        # capped
    k: int
    repair_iterations: int


def _capped_part_boundaries(g: WeightedGraph, part_of: dict[int, int], nparts: int) -> np.ndarray:
    delta = np.zeros(nparts)
    for u, v, w in g.edges:
        pu = part_of.get(u, -1)
        pv = part_of.get(v, -1)
        if pu != pv:
            cw = g.capped(w)
            if pu >= 0:
                delta[pu] += cw
            if pv >= 0:
                delta[pv] += cw
    return delta


def _capped_boundary(g: WeightedGraph, vertices: frozenset[int]) -> float:
    total = 0.0
    for u, v, w in g.edges:
        if (u in vertices) != (v in vertices):
            total += g.capped(w)
    return total


def _uncross_core(
    g: WeightedGraph,
    z_sets: list[frozenset[int]],
) -> tuple[list[frozenset[int]], int]:
    """Prefix-difference then repair until every part is within 2x its source.

    Returns the parts (aligned with z_sets, possibly empty) and the number
    of repair iterations. The sum of part boundaries drops by at least
    twice the smallest positive weight per repair step, which bounds the
    loop; exceeding that bound is a bug and raises.
    """
    m = len(z_sets)
    covered: set[int] = set()
    parts: list[set[int]] = []
    for z in z_sets:
        parts.append(set(z) - covered)
        covered |= z
    z_delta = [_capped_boundary(g, z) for z in z_sets]

    w_min = min_positive_weight(g)
    repair = 0

    def boundaries() -> np.ndarray:
        part_of = {v: i for i, p in enumerate(parts) for v in p}
        return _capped_part_boundaries(g, part_of, m)

    delta = boundaries()
    potential = float(delta.sum())
    if math.isfinite(w_min) and w_min > 0:
        cap = int(potential / (2.0 * w_min)) + m + 8
    else:
        cap = 1
    while True:
        bad = next(
            (i for i in range(m) if delta[i] > 2.0 * z_delta[i] + ABS_TOL), None
        )
        if bad is None:
            break
        repair += 1
        if repair > cap:
            raise InvariantViolationError(
                "uncrossing repair loop exceeded its potential bound"
            )
        parts[bad] = set(z_sets[bad])
        for j in range(m):
            if j != bad:
                parts[j] -= z_sets[bad]
        delta = boundaries()
        new_potential = float(delta.sum())
        if not new_potential <= potential - 2.0 * w_min + ABS_TOL:
            raise InvariantViolationError(
                f"repair iteration decreased the boundary sum by "
                f"{potential - new_potential:.3e} < 2*w_min"
            )
        potential = new_potential

    for i in range(m):
        if delta[i] > 2.0 * z_delta[i] + ABS_TOL:
            raise InvariantViolationError("part exceeds twice its source boundary")
    return [frozenset(p) for p in parts], repair


def _finish_uncross(
    g: WeightedGraph,
    t: TerminalSet,
    z_sets: list[frozenset[int]],
    z_meta: list[tuple[str, int | None]],
) -> UncrossedPartition:
    raw_parts, repair = _uncross_core(g, z_sets)
    union: set[int] = set()
    parts: list[UncrossedPart] = []
    for i, vertices in enumerate(raw_parts):
        union |= vertices
        if not vertices:
            continue
        kind, group = z_meta[i]
        parts.append(
            UncrossedPart(
                vertices=vertices,
                z_index=i,
                z_boundary=_capped_boundary(g, z_sets[i]),
                boundary=_capped_boundary(g, vertices),
                kind=kind,
                group=group,
            )
        )
    residual = frozenset(range(1, g.n + 1)) - union
    return UncrossedPartition(
        parts=parts,
        residual=residual,
        residual_boundary=_capped_boundary(g, residual),
        k=t.k,
        repair_iterations=repair,
    )


def uncross_lp(
    cover: Cover, g: WeightedGraph, t: TerminalSet, rng: random.Random
) -> UncrossedPartition:
    """Sample ~12k ln k cover sets without replacement, then uncross."""
    m = len(cover.sets)
    if m == 0:
        raise ValueError("cover is empty")
    size = min(int(math.ceil(12.0 * t.k * math.log(t.k))), m)
    picked = rng.sample(range(m), size)
    z_sets = [cover.sets[i].vertices for i in picked]
    z_meta: list[tuple[str, int | None]] = [("cover", cover.sets[i].group) for i in picked]
    return _finish_uncross(g, t, z_sets, z_meta)


def uncross_norm(
    cover: Cover, g: WeightedGraph, t: TerminalSet, rng: random.Random
) -> UncrossedPartition:
    """Isolating cuts pinned to the first k positions, then ~9k ln^2 k samples."""
    if cover.isolating is None:
        raise ValueError("norm uncrossing needs a cover with isolating cuts")
    m = len(cover.sets)
    size = min(int(math.ceil(9.0 * t.k * math.log(t.k) ** 2)), m)
    picked = rng.sample(range(m), size) if m else []
    z_sets = [side for side, _ in cover.isolating]
    z_meta: list[tuple[str, int | None]] = [("isolating", None)] * t.k
    z_sets += [cover.sets[i].vertices for i in picked]
    z_meta += [("cover", cover.sets[i].group) for i in picked]
    return _finish_uncross(g, t, z_sets, z_meta)


def _locate_terminal_parts(
    up: UncrossedPartition, t: TerminalSet
) -> list[UncrossedPart]:
    """The part holding each terminal, in terminal order; rejects trials
    where a terminal is uncovered (residual) or shares a part."""
    holders: list[UncrossedPart] = []
    for term in t.terminals:
        if term in up.residual:
            raise TrialRejectedError(f"terminal {term} uncovered by sampled sets")
        hit = [p for p in up.parts if term in p.vertices]
        assert len(hit) == 1, "parts must partition the covered vertices"
        holders.append(hit[0])
    if len({id(h) for h in holders}) != t.k:
        raise TrialRejectedError("two terminals share an uncrossed part")
    return holders


def aggregate_lp(
    up: UncrossedPartition, g: WeightedGraph, t: TerminalSet
) -> tuple[Partition, tuple[float, ...]]:
    """Round-robin aggregation: terminal parts seed the k blocks, remaining
    parts (residual included) are dealt by descending boundary."""
    holders = _locate_terminal_parts(up, t)
    holder_ids = {id(h) for h in holders}

    queue: list[tuple[float, int, frozenset[int]]] = []
    for p in up.parts:
        if id(p) not in holder_ids:
            queue.append((p.boundary, p.z_index, p.vertices))
    if up.residual:
        residual_rank = max((p.z_index for p in up.parts), default=0) + 1
        queue.append((up.residual_boundary, residual_rank, up.residual))
    queue.sort(key=lambda item: (-item[0], item[1]))

    blocks = [set(h.vertices) for h in holders]
    for rank, (_, _, vertices) in enumerate(queue, start=1):
        blocks[(rank - 1) % t.k] |= vertices

    # Every bucket's members beyond its first must sum to at most a 1/k
    # share of the whole queue; this is what makes round-robin lossless.
    total = sum(d for d, _, _ in queue)
    for i in range(t.k):
        tail = sum(
            queue[rank - 1][0]
            for rank in range(1, len(queue) + 1)
            if (rank - 1) % t.k == i and rank > t.k
        )
        if not tail <= total / t.k + ABS_TOL:
            raise InvariantViolationError("round-robin bucket inequality violated")

    partition = Partition(tuple(frozenset(b) for b in blocks), t.terminals)
    partition.validate(g)
    for term, block in zip(t.terminals, partition.parts):
        assert len(block & set(t.terminals)) == 1 and term in block
    return partition, partition.cut_vector(g)


def _aggregate_norm(
    up: UncrossedPartition,
    g: WeightedGraph,
    t: TerminalSet,
    coords_by_group: dict[int, list[int]],
    j_s: int,
) -> tuple[Partition, tuple[float, ...]]:
    """Group-wise aggregation: group i's parts split round-robin (by
    descending boundary) over its coordinate list; residual joins P_{j_s}."""
    holders = _locate_terminal_parts(up, t)
    for i, (term, holder) in enumerate(zip(t.terminals, holders)):
        if holder.kind != "isolating" or holder.z_index != i:
            raise TrialRejectedError(
                f"terminal {term} displaced from its isolating part"
            )

    blocks = [set(h.vertices) for h in holders]
    grouped: dict[int, list[UncrossedPart]] = {}
    for p in up.parts:
        if p.kind == "cover":
            if p.vertices & set(t.terminals):
                raise TrialRejectedError("terminal displaced into a cover part")
            assert p.group is not None
            grouped.setdefault(p.group, []).append(p)

    for gi, members in sorted(grouped.items()):
        coords = coords_by_group[gi]
        members.sort(key=lambda p: (-p.boundary, p.z_index))
        for pos, part in enumerate(members):
            target = coords[pos % len(coords)]
            blocks[target - 1] |= part.vertices

    if up.residual:
        blocks[j_s - 1] |= up.residual

    partition = Partition(tuple(frozenset(b) for b in blocks), t.terminals)
    partition.validate(g)
    for block in partition.parts:
        assert len(block & set(t.terminals)) == 1
    return partition, partition.cut_vector(g)


def aggregate_norm_min(
    up: UncrossedPartition,
    g: WeightedGraph,
    t: TerminalSet,
    index_sets: list[frozenset[int]],
    r_values: list[float | None],
) -> tuple[Partition, tuple[float, ...]]:
    coords_by_group = {
        i: sorted(idx) for i, idx in enumerate(index_sets) if idx
    }
    i_star = max(
        (i for i, r in enumerate(r_values) if r is not None),
        key=lambda i: (r_values[i], -i),
    )
    j_s = min(index_sets[i_star])
    return _aggregate_norm(up, g, t, coords_by_group, j_s)


def spread_vector(b: list[float], k: int) -> list[float]:
    """x with x_j = b_{floor(log2 j)}: the densest vector consistent with
    bucket maxima b."""
    return [b[int(math.floor(math.log2(j)))] for j in range(1, k + 1)]


def ordering_assignment(spec: NormSpec, b: list[float]) -> list[list[int]]:
    """Assign each bucket value b_i to 2^i coordinates using the ordering
    oracle, with total norm at most 3x the spread of b.

    Builds one vector holding b_0 alone and two identical vectors holding
    2^(i-1) copies of b_i each, lets the oracle re-order all three, and
    collects per-bucket coordinate multisets from the re-ordered slots.
    """
    k = spec.k
    big_l = int(math.floor(math.log2(k)))
    if len(b) != big_l + 1:
        raise ValueError(f"need {big_l + 1} bucket maxima for k={k}")
    if any(x < 0 for x in b):
        raise ValueError("bucket maxima must be non-negative")
    if any(b[i] < b[i + 1] - ABS_TOL for i in range(len(b) - 1)):
        raise ValueError("bucket maxima must be non-increasing")

    def one_vector(values: list[tuple[float, int]]) -> tuple[list[float], list[int | None]]:
        vec = [0.0] * k
        labels: list[int | None] = [None] * k
        for pos, (val, lab) in enumerate(values):
            vec[pos] = val
            labels[pos] = lab
        return vec, labels

    u1 = one_vector([(b[0], 0)])
    copies: list[tuple[float, int]] = []
    for i in range(1, big_l + 1):
        copies.extend([(b[i], i)] * (2 ** (i - 1)))
    u2 = one_vector(copies)

    multisets: list[list[int]] = [[] for _ in range(big_l + 1)]
    assembled = [0.0] * k
    for vec, labels in (u1, u2, u2):
        perm = ordering_oracle(spec, vec)
        arranged = apply_ordering(vec, perm)
        arranged_labels = [labels[p - 1] for p in perm]
        for pos in range(k):
            lab = arranged_labels[pos]
            if lab is not None:
                multisets[lab].append(pos + 1)
                assembled[pos] += arranged[pos]

    for i, ms in enumerate(multisets):
        assert len(ms) == 2**i, "bucket i must receive exactly 2^i coordinates"
        ms.sort()

    bound = 3.0 * spec.evaluate(spread_vector(b, k))
    got = spec.evaluate(assembled)
    if not got <= bound + ABS_TOL:
        raise InvariantViolationError(
            f"ordering assignment norm {got:.6f} exceeds 3x spread bound {bound:.6f}"
        )
    return multisets


def enumerate_b_sequences(r_max: float, k: int) -> list[tuple[float, ...]]:
    """All non-increasing bucket-threshold sequences over the halving grid
    {0} U {r_max / 2^j}; polynomially many in k."""
    if r_max < 0:
        raise ValueError("r_max must be non-negative")
    big_l = int(math.floor(math.log2(k)))
    if r_max == 0:
        values = [0.0]
    else:
        values = sorted(
            {r_max / (2.0**j) for j in range(big_l + 1)} | {0.0}, reverse=True
        )
    return [tuple(seq) for seq in combinations_with_replacement(values, big_l + 1)]


@dataclass
class TrialOutcome:
    trial: int
    status: str                 # "ok" | "rejected"
    objective: float | None = None
    repair_iterations: int | None = None


@dataclass
class RunResult:
    partition: Partition
    cut_vector: tuple[float, ...]
    objective: float
    trials: list[TrialOutcome]
    backend: str
    variant: str
    cover_sets: int
    cover_iterations: int
    measure_budget: float
    best_trial: int
    p: float | None = None
    p_effective: float | None = None
    opt_guess: float | None = None
    preprocess_w: float | None = None
    b_sequence: tuple[float, ...] | None = None


def lp_objective(values: tuple[float, ...], p: float) -> float:
    return LpNorm(len(values), p).evaluate(values)


def _norm_first_k_check(
    spec: NormSpec, g: WeightedGraph, t: TerminalSet,
    up: UncrossedPartition, cover: Cover
) -> None:
    assert cover.isolating is not None
    iso_vec = [cost for _, cost in cover.isolating]
    first_k = [0.0] * t.k
    for p in up.parts:
        if p.kind == "isolating":
            first_k[p.z_index] = boundary_weight(g, p.vertices)
    lhs = spec.evaluate(first_k)
    rhs = 2.0 * spec.evaluate(iso_vec)
    if not lhs <= rhs + ABS_TOL:
        raise InvariantViolationError(
            f"first-k uncrossed norm {lhs:.6f} exceeds twice the isolating norm {rhs:.6f}"
        )


def solve_lp_multiway(
    g: WeightedGraph, t: TerminalSet, p: float, cfg: PipelineConfig
) -> RunResult:
    """Covering -> repeated (uncross, aggregate) trials; best lp objective.

    p = inf runs the machinery at p = log2 k and reports under the true
    max objective. Extreme weight spreads trigger the clamping
    preprocessing over all candidate top weights, keeping the best final
    answer evaluated on the original graph.
    """
    t.validate_for(g.n)
    if not (p >= 1):
        raise ValueError(f"p must be >= 1, got {p}")
    p_eff = math.log2(t.k) if math.isinf(p) else p

    ratio_cap = g.n * g.n / cfg.eps_weights
    if finite_weight_ratio(g) > ratio_cap:
        best: RunResult | None = None
        last_err: Exception | None = None
        for w_guess in guess_weight_scales(g):
            try:
                work = preprocess_weights(g, w_guess, cfg.eps_weights)
                res = _solve_lp_once(work, g, t, p, p_eff, cfg, w_guess)
            except (AllTrialsRejectedError, GuessTooLowError) as err:
                last_err = err
                continue
            if best is None or res.objective < best.objective:
                best = res
        if best is None:
            raise last_err if last_err else AllTrialsRejectedError("no usable weight scale")
        return best
    return _solve_lp_once(g, g, t, p, p_eff, cfg, None)


def _solve_lp_once(
    work: WeightedGraph,
    orig: WeightedGraph,
    t: TerminalSet,
    p: float,
    p_eff: float,
    cfg: PipelineConfig,
    w_guess: float | None,
) -> RunResult:
    backend = utc_backend(cfg.utc)
    cover = cover_lp(work, t, p_eff, backend)
    trials: list[TrialOutcome] = []
    best: tuple[float, int, Partition, tuple[float, ...]] | None = None
    for trial in range(cfg.trials):
        rng = random.Random(f"{cfg.seed}/lp/{trial}")
        up = uncross_lp(cover, work, t, rng)
        try:
            partition, _ = aggregate_lp(up, work, t)
        except TrialRejectedError:
            trials.append(TrialOutcome(trial, "rejected",
                                       repair_iterations=up.repair_iterations))
            continue
        cut_vec = partition.cut_vector(orig)
        obj = lp_objective(cut_vec, p)
        trials.append(TrialOutcome(trial, "ok", obj, up.repair_iterations))
        if best is None or obj < best[0]:
            best = (obj, trial, partition, cut_vec)
    if best is None:
        raise AllTrialsRejectedError(
            f"all {cfg.trials} trials left a terminal uncovered"
        )
    obj, trial_idx, partition, cut_vec = best
    return RunResult(
        partition=partition, cut_vector=cut_vec, objective=obj, trials=trials,
        backend=backend.resolve(work.n), variant="lp",
        cover_sets=len(cover.sets), cover_iterations=cover.iterations,
        measure_budget=cover.measure_budget, best_trial=trial_idx,
        p=p, p_effective=p_eff, preprocess_w=w_guess,
    )


def solve_norm_multiway(
    g: WeightedGraph, t: TerminalSet, spec: NormSpec, cfg: PipelineConfig
) -> RunResult:
    """Norm pipeline with either the minimization-oracle aggregation or the
    ordering-oracle bucket-threshold search."""
    t.validate_for(g.n)
    if spec.k != t.k:
        raise ValueError("norm dimension must equal the number of terminals")
    if cfg.variant == "norm-min":
        return _solve_norm_min(g, t, spec, cfg)
    if cfg.variant == "norm-ordering":
        return _solve_norm_ordering(g, t, spec, cfg)
    raise ValueError("norm pipeline requires variant norm-min or norm-ordering")


def _resolve_alpha(cfg: PipelineConfig, g: WeightedGraph, t: TerminalSet) -> float:
    backend_name = utc_backend(cfg.utc).resolve(g.n)
    if cfg.alpha_mult is not None:
        return cfg.alpha_mult
    return default_alpha_mult(backend_name, g.n, t.k)


def _solve_norm_min(
    g: WeightedGraph, t: TerminalSet, spec: NormSpec, cfg: PipelineConfig
) -> RunResult:
    backend = utc_backend(cfg.utc)
    alpha = _resolve_alpha(cfg, g, t)
    cover, guess = binary_search_opt(g, t, spec, alpha, backend)
    assert cover.index_sets is not None and cover.r_values is not None
    trials: list[TrialOutcome] = []
    best: tuple[float, int, Partition, tuple[float, ...]] | None = None
    for trial in range(cfg.trials):
        rng = random.Random(f"{cfg.seed}/norm-min/{trial}")
        up = uncross_norm(cover, g, t, rng)
        _norm_first_k_check(spec, g, t, up, cover)
        try:
            partition, cut_vec = aggregate_norm_min(
                up, g, t, cover.index_sets, cover.r_values
            )
        except TrialRejectedError:
            trials.append(TrialOutcome(trial, "rejected",
                                       repair_iterations=up.repair_iterations))
            continue
        obj = spec.evaluate(cut_vec)
        trials.append(TrialOutcome(trial, "ok", obj, up.repair_iterations))
        if best is None or obj < best[0]:
            best = (obj, trial, partition, cut_vec)
    if best is None:
        raise AllTrialsRejectedError(
            f"all {cfg.trials} trials left a terminal uncovered"
        )
    obj, trial_idx, partition, cut_vec = best
    return RunResult(
        partition=partition, cut_vector=cut_vec, objective=obj, trials=trials,
        backend=backend.resolve(g.n), variant="norm-min",
        cover_sets=len(cover.sets), cover_iterations=cover.iterations,
        measure_budget=cover.measure_budget, best_trial=trial_idx,
        opt_guess=guess,
    )


def _solve_norm_ordering(
    g: WeightedGraph, t: TerminalSet, spec: NormSpec, cfg: PipelineConfig
) -> RunResult:
    backend = utc_backend(cfg.utc)
    alpha = _resolve_alpha(cfg, g, t)
    _, guess = binary_search_opt(g, t, spec, alpha, backend)

    # Threshold scale: guess / ||1_{I_1}||, falling back to I_0 when k = 2
    # leaves the second index set empty.
    index_sets = compute_index_sets(spec, t.k)
    scale_set = index_sets[1] if len(index_sets) > 1 and index_sets[1] else index_sets[0]
    r_max = guess / indicator_norm(spec, scale_set) if guess > 0 else 0.0

    trials: list[TrialOutcome] = []
    best: tuple[float, int, Partition, tuple[float, ...], tuple[float, ...]] | None = None
    trial_counter = 0
    for b_seq in enumerate_b_sequences(r_max, t.k):
        try:
            cover = cover_norm(g, t, spec, guess, alpha, backend,
                               thresholds=list(b_seq))
        except GuessTooLowError:
            continue
        assert cover.index_sets is not None
        multisets = ordering_assignment(spec, list(b_seq))
        i_star = max(range(len(b_seq)), key=lambda i: (b_seq[i], -i))
        j_s = min(multisets[i_star])
        coords_by_group = {
            i: multisets[i] for i, idx in enumerate(cover.index_sets) if idx
        }
        for trial in range(cfg.trials):
            rng = random.Random(f"{cfg.seed}/norm-ordering/{trial_counter}")
            trial_counter += 1
            up = uncross_norm(cover, g, t, rng)
            _norm_first_k_check(spec, g, t, up, cover)
            try:
                partition, cut_vec = _aggregate_norm(up, g, t, coords_by_group, j_s)
            except TrialRejectedError:
                trials.append(TrialOutcome(len(trials), "rejected",
                                           repair_iterations=up.repair_iterations))
                continue
            obj = spec.evaluate(cut_vec)
            trials.append(TrialOutcome(len(trials), "ok", obj,
                                       up.repair_iterations))
            if best is None or obj < best[0]:
                best = (obj, len(trials) - 1, partition, cut_vec, b_seq)
    if best is None:
        raise AllTrialsRejectedError("every threshold sequence and trial failed")
    obj, trial_idx, partition, cut_vec, b_seq = best
    return RunResult(
        partition=partition, cut_vector=cut_vec, objective=obj, trials=trials,
        backend=backend.resolve(g.n), variant="norm-ordering",
        cover_sets=0, cover_iterations=0, measure_budget=0.0,
        best_trial=trial_idx, opt_guess=guess, b_sequence=b_seq,
    )
