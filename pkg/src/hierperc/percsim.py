"""Exact samplers for the percolation configurations on the scale-n box.

Two independent routes to the same law:

* forest mode walks vertices: for every scale m and every m-block, a Poisson
  number of multi-edges is thrown uniformly at the block's vertex pairs and
  endpoints are unioned (per-pair counts are then Poisson with the layer rate,
  so each pair is open with the layer's inclusion probability);
* sizes mode walks clusters: the recursive coalescent construction, with each
  scale's layer applied through the pooled Poisson-merge engine.

Forest mode materializes the vertex array and is capped in size; sizes mode
never stores vertices and reaches much larger scales.  The two agree in law,
and the test suite verifies this with two-sample KS tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import rng as rngmod
from .engine import GroupedClusters, advance_pooled, regroup
from .lattice import ModelParams, check_vertex, periodic_constant

FOREST_CAP = 1 << 27  # max vertices materialized per forest chunk
REPLICA_CHUNK = 256  # max replicas per engine chunk
CHUNK_VERTEX_BUDGET = 1 << 27  # target vertices per chunk; keeps memory flat in n


def default_chunk(params: ModelParams, n: int) -> int:
    """Replicas per engine chunk: a deterministic function of (params, n), so
    chunk boundaries (and hence streams) never depend on worker scheduling."""
    return int(max(1, min(REPLICA_CHUNK, CHUNK_VERTEX_BUDGET // params.branching ** n)))


class ClusterForest:
    """Disjoint-set over the vertices of a box, with optional tagged vertices.

    Union by size with path halving; on equal sizes a tagged root wins the
    union so tag lookups stay near O(1).
    """

    def __init__(self, n_vertices: int, tags: tuple[int, ...] = ()):
        self.parent = list(range(n_vertices))
        self.size = [1] * n_vertices
        self.tags = set(tags)
        self.n_vertices = n_vertices
        self.n_edges = 0

    def find(self, v: int) -> int:
        parent = self.parent
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(self, a: int, b: int) -> None:
        self.n_edges += 1
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb] or (
            self.size[ra] == self.size[rb] and rb in self.tags and ra not in self.tags
        ):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def cluster_size(self, v: int) -> int:
        return self.size[self.find(v)]

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def roots(self) -> list[int]:
        return [v for v in range(self.n_vertices) if self.find(v) == v]

    def sizes(self) -> "SizeMultiset":
        masses = np.array([self.size[r] for r in self.roots()], dtype=float)
        return SizeMultiset(masses)


@dataclass
class SizeMultiset:
    """Multiset of cluster masses; unit masses may be held aggregated.

    ``masses`` lists the explicit masses and ``singletons`` counts additional
    aggregated unit masses.  Total mass is conserved by every merge step.
    """

    masses: np.ndarray
    singletons: int = 0

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if np.any(self.masses <= 0):
            raise ValueError("masses must be positive")
        if self.singletons < 0:
            raise ValueError("singleton count must be >= 0")

    @property
    def total(self) -> float:
        return float(self.masses.sum()) + self.singletons

    @property
    def count(self) -> int:
        return int(self.masses.size) + self.singletons

    def power_sum(self, p: float) -> float:
        if self.masses.size == 0:
            return float(self.singletons)
        acc = np.sum(self.masses.astype(np.longdouble) ** p) if p >= 4 else np.sum(self.masses ** p)
        return float(acc) + self.singletons

    def largest(self) -> float:
        top = float(self.masses.max()) if self.masses.size else 0.0
        return max(top, 1.0 if self.singletons else 0.0)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.masses, np.ones(self.singletons)])

    def decreasing(self) -> np.ndarray:
        return np.sort(self.as_array())[::-1]


@dataclass
class BatchStats:
    """Per-replica summaries of a batch of sampled configurations.

    ``scale_sums[m][p]`` holds, per replica, the block-averaged p-th power sum
    of the scale-m sub-boxes of the same run (distinct m-blocks are
    independent, so these are unbiased scale-m estimates sharing the top-level
    replicas); ``scale_max[m]`` holds the per-block maxima, one iid sample of
    the scale-m largest cluster per block.
    """

    reps: int
    n: int
    power_sums: dict[int, np.ndarray] = field(default_factory=dict)
    largest: np.ndarray | None = None
    cluster_count: np.ndarray | None = None
    tagged_sizes: np.ndarray | None = None  # shape (n_tags, reps)
    tags_joined: np.ndarray | None = None  # shape (n_tags-1, reps): tag0 connected to tag_k
    picks: np.ndarray | None = None  # size-biased cluster picks, shape (n_picks, reps)
    multisets: list[SizeMultiset] | None = None
    scale_sums: dict[int, dict[int, np.ndarray]] = field(default_factory=dict)
    scale_max: dict[int, np.ndarray] = field(default_factory=dict)
    edge_count: float = 0.0

    def merge(self, other: "BatchStats") -> "BatchStats":
        if self.n != other.n:
            raise ValueError("cannot merge batches at different scales")
        out = BatchStats(self.reps + other.reps, self.n)
        out.power_sums = {
            p: np.concatenate([self.power_sums[p], other.power_sums[p]]) for p in self.power_sums
        }
        for name in ("largest", "cluster_count", "tagged_sizes", "tags_joined", "picks"):
            a, b = getattr(self, name), getattr(other, name)
            if a is not None and b is not None:
                setattr(out, name, np.concatenate([a, b], axis=-1))
        if self.multisets is not None and other.multisets is not None:
            out.multisets = self.multisets + other.multisets
        out.scale_sums = {
            m: {p: np.concatenate([self.scale_sums[m][p], other.scale_sums[m][p]])
                for p in self.scale_sums[m]}
            for m in self.scale_sums
        }
        out.scale_max = {
            m: np.concatenate([self.scale_max[m], other.scale_max[m]]) for m in self.scale_max
        }
        out.edge_count = self.edge_count + other.edge_count
        return out


def _final_stats(
    state: GroupedClusters,
    reps: int,
    n: int,
    powers: tuple[int, ...],
    n_tags: int,
    keep_multisets: bool,
    n_picks: int,
    rng: np.random.Generator | None,
) -> BatchStats:
    """Reduce a top-level engine state (one group per replica) to statistics."""
    masses, gid = state.masses, state.gid
    pool = state.pool_count_by_group() if state.pool_total is not None else np.zeros(reps, dtype=np.int64)
    out = BatchStats(reps=reps, n=n)
    for p in powers:
        if p >= 4:
            weights = masses.astype(np.longdouble) ** p
            sums = np.bincount(gid, weights=weights.astype(float), minlength=reps)
        else:
            sums = np.bincount(gid, weights=masses ** p, minlength=reps)
        out.power_sums[p] = sums + pool
    largest = np.where(pool > 0, 1.0, 0.0)
    np.maximum.at(largest, gid, masses)
    out.largest = largest
    counts = np.bincount(gid, minlength=reps).astype(np.int64) + pool
    out.cluster_count = counts
    if n_tags:
        tag_masses = masses[state.tag_pos].reshape(n_tags, reps)
        out.tagged_sizes = tag_masses
        if n_tags > 1:
            t0 = state.tag_pos.reshape(n_tags, reps)[0]
            rest = state.tag_pos.reshape(n_tags, reps)[1:]
            out.tags_joined = (rest == t0).astype(np.int8)
    if n_picks:
        if rng is None:
            raise ValueError("size-biased picks need a generator")
        if state.pool_total is None:
            raise ValueError("picks supported only for pooled states")
        total = state.pool_total
        cum = np.cumsum(masses)
        cum0 = np.concatenate(([0.0], cum))
        lo = np.searchsorted(gid, np.arange(reps), side="left")
        hi = np.searchsorted(gid, np.arange(reps), side="right")
        emt = cum0[hi] - cum0[lo]
        picks = np.empty((n_picks, reps))
        for k in range(n_picks):
            u = rng.random(reps) * total
            if masses.size == 0:
                picks[k] = 1.0
                continue
            in_pool = u >= emt
            val = cum0[lo] + np.minimum(u, np.nextafter(emt, -1.0))
            idx = np.searchsorted(cum, val, side="right")
            idx = np.minimum(np.maximum(idx, lo), np.maximum(hi - 1, lo))
            picks[k] = np.where(in_pool, 1.0, masses[idx])
        out.picks = picks
    if keep_multisets:
        lo = np.searchsorted(gid, np.arange(reps), side="left")
        hi = np.searchsorted(gid, np.arange(reps), side="right")
        out.multisets = [
            SizeMultiset(masses[lo[r] : hi[r]].copy(), int(pool[r])) for r in range(reps)
        ]
    return out


def sizes_batch(
    params: ModelParams,
    n: int,
    reps: int,
    seed: int,
    *,
    top_time: float | None = None,
    periodic: bool = False,
    tags: tuple[int, ...] = (),
    powers: tuple[int, ...] = (2, 3, 4, 5),
    keep_multisets: bool = False,
    n_picks: int = 0,
    chunk: int | None = None,
    stream_kind: int = rngmod.KIND_SIZES,
    record_scales: tuple[int, ...] = (),
    record_powers: tuple[int, ...] = (2,),
    record_max: bool = False,
) -> BatchStats:
    """Sample ``reps`` independent cluster-size configurations at scale n.

    Runs the recursive construction: scales m = 1..n-1 at their full layer
    durations, the top scale for ``top_time`` (default: the full t_n), plus
    the periodic surplus when ``periodic``.  Replicas are processed in fixed
    chunks with chunk-keyed streams, so the result is independent of worker
    scheduling.  ``record_scales`` collects sub-box statistics at intermediate
    scales of the same run (see BatchStats).
    """
    if not math.isfinite(params.beta):
        raise ValueError("beta must be finite")
    size = params.n_sites(n)  # also enforces the 64-bit cap
    t_n = params.time_horizon(n)
    if top_time is None:
        top_time = t_n
    if not (0.0 <= top_time <= t_n * (1 + 1e-12) + 1e-300):
        raise ValueError(f"top_time={top_time} outside [0, t_n={t_n}]")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if chunk is None:
        chunk = default_chunk(params, n)
    out: BatchStats | None = None
    done = 0
    chunk_index = 0
    while done < reps:
        r = min(chunk, reps - done)
        stats = _sizes_chunk(
            params, n, r, seed, chunk_index, top_time, periodic, tags, powers,
            keep_multisets, n_picks, stream_kind, record_scales, record_powers, record_max,
        )
        out = stats if out is None else out.merge(stats)
        done += r
        chunk_index += 1
    assert out is not None
    return out


def _initial_state(params, n, reps, tags) -> GroupedClusters:
    """Level-1 engine state: all-pool groups, tags materialized as unit clusters.

    Tag positions are laid out k-major: entry k*reps + r tracks tag k in
    replica r.
    """
    branching = params.branching
    n_tags = len(tags)
    if n_tags:
        if len(set(tags)) != n_tags:
            raise ValueError("tags must be distinct vertices")
        for v in tags:
            check_vertex(int(v), n, params)
    if n == 0:
        # single-vertex box: one unit cluster per replica, all tags point at it
        masses = np.ones(reps)
        gid = np.arange(reps, dtype=np.int64)
        tag_pos = np.tile(np.arange(reps, dtype=np.int64), n_tags)
        return GroupedClusters(reps, masses, gid, 1, tag_pos)
    blocks_1 = branching ** (n - 1)
    n_groups = reps * blocks_1
    if not n_tags:
        return GroupedClusters(n_groups, np.empty(0), np.empty(0, dtype=np.int64), branching)
    blocks = np.asarray(tags, dtype=np.int64) // branching  # level-1 block of each tag
    gid_flat = (blocks[:, None] + np.arange(reps, dtype=np.int64)[None, :] * blocks_1).ravel()
    order = np.argsort(gid_flat, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return GroupedClusters(n_groups, np.ones(gid_flat.size), gid_flat[order], branching, rank)


def _record_scale(state: GroupedClusters, reps: int, m: int, powers, want_max, out: BatchStats):
    """Record scale-m sub-box statistics from the level-m state (one entry per
    replica for power sums, one per block for maxima)."""
    blocks = state.n_groups // reps
    replica = state.gid // blocks
    total_mass = float(state.pool_total) * blocks  # per replica, conserved
    if powers:
        sums: dict[int, np.ndarray] = {}
        expl_mass = np.bincount(replica, weights=state.masses, minlength=reps)
        pool = total_mass - expl_mass
        for p in powers:
            w = state.masses.astype(np.longdouble) ** p if p >= 4 else state.masses ** p
            per_rep = np.bincount(replica, weights=np.asarray(w, dtype=float), minlength=reps)
            sums[p] = (per_rep + pool) / blocks
        out.scale_sums[m] = sums
    if want_max:
        block_expl = np.bincount(state.gid, weights=state.masses, minlength=state.n_groups)
        block_max = np.where(block_expl < state.pool_total, 1.0, 0.0)
        np.maximum.at(block_max, state.gid, state.masses)
        out.scale_max[m] = block_max


def _sizes_state_chunk(
    params, n, reps, seed, chunk_index, top_time, periodic, tags, stream_kind,
    record_scales=(), record_powers=(2,), record_max=False, record_out=None,
) -> GroupedClusters:
    """Engine state after all n layers (internal, one chunk)."""
    state = _initial_state(params, n, reps, tags)
    extra = params.beta * periodic_constant(params) * params.layer_ratio ** n if periodic else 0.0
    record_scales = set(record_scales)
    for m in range(1, n + 1):
        rng = rngmod.stream(seed, stream_kind, chunk_index, m)
        # the per-pair rate of a full layer is its duration t_m; the top layer
        # runs only for top_time (plus the quotient-kernel surplus if periodic)
        rate = params.beta * params.layer_ratio ** m if m < n else top_time + extra
        state = advance_pooled(state, rate, rng)
        if m in record_scales and m < n and record_out is not None:
            _record_scale(state, reps, m, record_powers, record_max, record_out)
        if m < n:
            state = regroup(state, params.branching)
    return state


def _sizes_chunk(
    params, n, reps, seed, chunk_index, top_time, periodic, tags, powers,
    keep_multisets, n_picks, stream_kind, record_scales, record_powers, record_max,
) -> BatchStats:
    pre = BatchStats(reps=reps, n=n)
    state = _sizes_state_chunk(
        params, n, reps, seed, chunk_index, top_time, periodic, tags, stream_kind,
        record_scales=record_scales, record_powers=record_powers, record_max=record_max,
        record_out=pre,
    )
    rng = rngmod.stream(seed, stream_kind, chunk_index, n + 1)
    out = _final_stats(state, reps, n, powers, len(tags), keep_multisets, n_picks, rng)
    out.scale_sums = pre.scale_sums
    out.scale_max = pre.scale_max
    # the top scale is a recorded scale too when requested
    if n in set(record_scales):
        if record_powers:
            out.scale_sums[n] = {}
            for p in record_powers:
                if p in out.power_sums:
                    out.scale_sums[n][p] = out.power_sums[p].astype(float)
                else:
                    masses, gid = state.masses, state.gid
                    w = masses.astype(np.longdouble) ** p if p >= 4 else masses ** p
                    pool = state.pool_count_by_group()
                    out.scale_sums[n][p] = (
                        np.bincount(gid, weights=np.asarray(w, dtype=float), minlength=reps) + pool
                    )
        if record_max and out.largest is not None:
            out.scale_max[n] = out.largest.copy()
    return out


def sample_sizes(params: ModelParams, n: int, seed: int) -> SizeMultiset:
    """One draw of the cluster-size multiset of the scale-n configuration."""
    stats = sizes_batch(params, n, 1, seed, keep_multisets=True, powers=())
    return stats.multisets[0]


def sample_sizes_periodic(params: ModelParams, n: int, seed: int) -> SizeMultiset:
    """One draw under periodic (quotient-kernel) boundary conditions."""
    stats = sizes_batch(params, n, 1, seed, keep_multisets=True, powers=(), periodic=True)
    return stats.multisets[0]


def periodic_coupled_batch(
    params: ModelParams, n: int, reps: int, seed: int, powers: tuple[int, ...] = (2,),
) -> tuple[BatchStats, BatchStats]:
    """Coupled free/periodic batches sharing the sub-top randomness.

    The periodic sample is the free sample plus an independent Poisson layer of
    extra top-scale pairs (Poisson superposition), so on every coupled draw the
    periodic clusters refine-upward the free ones; in particular the periodic
    largest cluster dominates the free one sample by sample.
    """
    free: BatchStats | None = None
    peri: BatchStats | None = None
    done = 0
    chunk_index = 0
    chunk = default_chunk(params, n)
    t_n = params.time_horizon(n)
    extra = params.beta * periodic_constant(params) * params.layer_ratio ** n
    while done < reps:
        r = min(chunk, reps - done)
        state = _sizes_state_chunk(
            params, n, r, seed, chunk_index, t_n, False, (), rngmod.KIND_SIZES
        )
        f = _final_stats(state, r, n, powers, 0, False, 0, None)
        rng = rngmod.stream(seed, rngmod.KIND_SIZES, chunk_index, n + 2)
        state_p = advance_pooled(state, extra, rng)
        p = _final_stats(state_p, r, n, powers, 0, False, 0, None)
        free = f if free is None else free.merge(f)
        peri = p if peri is None else peri.merge(p)
        done += r
        chunk_index += 1
    return free, peri


def forest_batch(
    params: ModelParams,
    n: int,
    reps: int,
    seed: int,
    *,
    tags: tuple[int, ...] = (),
    powers: tuple[int, ...] = (2, 3, 4, 5),
    keep_multisets: bool = False,
    max_nodes: int = FOREST_CAP,
) -> BatchStats:
    """Sample full forests for ``reps`` boxes by Poisson multigraph layering.

    All replicas of a chunk live side by side in one node array (blocks are
    contiguous index ranges), one sparse connectivity pass finds the clusters.
    """
    size = params.n_sites(n)
    if size > max_nodes:
        raise ValueError(f"forest mode capped at {max_nodes} vertices, scale {n} has {size}")
    for v in tags:
        check_vertex(int(v), n, params)
    per_chunk = max(1, min(REPLICA_CHUNK * 8, max_nodes // size))
    out: BatchStats | None = None
    done = 0
    chunk_index = 0
    while done < reps:
        r = min(per_chunk, reps - done)
        stats = _forest_chunk(params, n, r, seed, chunk_index, tuple(tags), powers, keep_multisets)
        out = stats if out is None else out.merge(stats)
        done += r
        chunk_index += 1
    assert out is not None
    return out


def _forest_chunk(params, n, reps, seed, chunk_index, tags, powers, keep_multisets) -> BatchStats:
    size = params.n_sites(n)
    branching = params.branching
    nodes = reps * size
    edges_a, edges_b = [], []
    total_edges = 0
    for m in range(1, n + 1):
        rng = rngmod.stream(seed, rngmod.KIND_FOREST, chunk_index, m)
        block_size = branching ** m
        n_blocks = reps * branching ** (n - m)
        lam = params.beta * params.layer_ratio ** m * block_size * (block_size - 1) / 2.0
        count = int(rng.poisson(n_blocks * lam))
        total_edges += count
        if count == 0:
            continue
        blk = rng.integers(0, n_blocks, count, dtype=np.int64)
        a = rng.integers(0, block_size, count, dtype=np.int64)
        b = rng.integers(0, block_size - 1, count, dtype=np.int64)
        b = b + (b >= a)
        # replica-major flat layout: block j spans nodes [j*block_size, (j+1)*block_size)
        edges_a.append(blk * block_size + a)
        edges_b.append(blk * block_size + b)
    if edges_a:
        ea = np.concatenate(edges_a)
        eb = np.concatenate(edges_b)
    else:
        ea = np.empty(0, dtype=np.int64)
        eb = np.empty(0, dtype=np.int64)
    graph = coo_matrix((np.ones(ea.size, dtype=np.int8), (ea, eb)), shape=(nodes, nodes))
    _, labels = connected_components(graph, directed=False)
    sizes = np.bincount(labels).astype(float)
    node_rep = np.arange(nodes, dtype=np.int64) // size
    comp_rep = np.empty(sizes.size, dtype=np.int64)
    comp_rep[labels] = node_rep
    out = BatchStats(reps=reps, n=n)
    for p in powers:
        w = sizes.astype(np.longdouble) ** p if p >= 4 else sizes ** p
        out.power_sums[p] = np.bincount(comp_rep, weights=np.asarray(w, dtype=float), minlength=reps)
    largest = np.zeros(reps)
    np.maximum.at(largest, comp_rep, sizes)
    out.largest = largest
    out.cluster_count = np.bincount(comp_rep, minlength=reps)
    out.edge_count = float(total_edges)
    if tags:
        tag_nodes = (np.arange(reps, dtype=np.int64)[:, None] * size + np.asarray(tags)[None, :])
        tag_labels = labels[tag_nodes]  # shape (reps, n_tags)
        out.tagged_sizes = sizes[tag_labels].T
        if len(tags) > 1:
            out.tags_joined = (tag_labels[:, 1:] == tag_labels[:, :1]).T.astype(np.int8)
    if keep_multisets:
        order = np.argsort(comp_rep, kind="stable")
        bounds = np.searchsorted(comp_rep[order], np.arange(reps + 1))
        out.multisets = [
            SizeMultiset(sizes[order[bounds[r] : bounds[r + 1]]]) for r in range(reps)
        ]
    return out


def sample_eta_forest(
    params: ModelParams, n: int, seed: int, tags: tuple[int, ...] = ()
) -> ClusterForest:
    """One forest draw as an explicit disjoint-set structure."""
    size = params.n_sites(n)
    if size > FOREST_CAP:
        raise ValueError(f"forest mode capped at {FOREST_CAP} vertices")
    forest = ClusterForest(size, tags)
    branching = params.branching
    for m in range(1, n + 1):
        rng = rngmod.stream(seed, rngmod.KIND_FOREST, 0, m)
        block_size = branching ** m
        n_blocks = branching ** (n - m)
        lam = params.beta * params.layer_ratio ** m * block_size * (block_size - 1) / 2.0
        count = int(rng.poisson(n_blocks * lam))
        if count == 0:
            continue
        blk = rng.integers(0, n_blocks, count, dtype=np.int64)
        a = rng.integers(0, block_size, count, dtype=np.int64)
        b = rng.integers(0, block_size - 1, count, dtype=np.int64)
        b = b + (b >= a)
        for u, v in zip(blk * block_size + a, blk * block_size + b):
            forest.union(int(u), int(v))
    return forest


def expected_edge_count(params: ModelParams, n: int) -> float:
    """Mean total multi-edge count over all scales of one box."""
    total = 0.0
    for m in range(1, n + 1):
        block_size = params.branching ** m
        n_blocks = params.branching ** (n - m)
        total += n_blocks * params.beta * params.layer_ratio ** m * block_size * (block_size - 1) / 2.0
    return total


def two_point_mc(
    params: ModelParams,
    n: int,
    pairs: list[tuple[int, int]],
    reps: int,
    seed: int,
    *,
    method: str = "auto",
):
    """Empirical connection frequencies for vertex pairs, with standard errors.

    Uses tagged forests when the box fits the forest cap (or always with
    method="forest"); falls back to the tagged recursive sampler for larger
    boxes.  Each pair gets its own independent replica stream.  Returns a list
    of MomentEstimate, one per pair.
    """
    from .stats import MomentEstimate

    if reps <= 0:
        raise ValueError("reps must be positive")
    size = params.n_sites(n)
    if method == "auto":
        method = "forest" if size * min(reps, REPLICA_CHUNK * 8) <= FOREST_CAP else "sizes"
    out = []
    for k, (x, y) in enumerate(pairs):
        check_vertex(x, n, params)
        check_vertex(y, n, params)
        if x == y:
            out.append(MomentEstimate(1.0, 0.0, reps, exact=True))
            continue
        if method == "forest":
            stats = forest_batch(
                params, n, reps, seed + k, tags=(x, y), powers=(),
            )
        else:
            stats = sizes_batch(
                params, n, reps, seed + k, tags=(x, y), powers=(),
                stream_kind=rngmod.KIND_TWOPOINT,
            )
        hits = stats.tags_joined[0].astype(float)
        out.append(MomentEstimate.from_samples(hits))
    return out
