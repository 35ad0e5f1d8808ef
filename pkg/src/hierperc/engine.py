"""Vectorized Poisson-merge engine.

Everything stochastic in the sampler reduces to one primitive, applied once
per scale: given a population of clusters partitioned into groups, draw a
Poisson number of endpoint pairs per group and union the endpoints.  Endpoint
picks are size-biased (a uniform point of the group's mass), so a pair lands
on an unordered pair of distinct clusters (A, B) with Poisson(rate*|A|*|B|)
multiplicity, reproducing the percolation layer law 1 - exp(-rate*|A|*|B|);
pairs landing inside one cluster are legitimate multi-edges and are kept as
no-ops.

Two representation tricks keep the work near the number of Poisson events
rather than the number of vertices:

* groups never store untouched unit masses individually: a group of total mass
  S with explicit clusters of mass E carries an implicit pool of S - E unit
  singletons, and a pick landing in the pool materializes that singleton on
  the fly (picks are exchangeable, so only the per-level collision pattern
  matters, and it is reproduced exactly by drawing the pool offset);
* per-group Poisson counts are never materialized: the total event count over
  all groups is a single Poisson draw and events are assigned to uniform
  groups, which is equivalent by Poisson superposition.

Group ids must be sorted; all operations preserve sortedness without a sort
(cluster relabeling after a union pass preserves group order because
first-seen component labels increase with node index; this is asserted and a
sorting fallback exists).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

try:
    from . import _kernels
except ImportError:  # numba unavailable; numpy/scipy fallback paths below
    _kernels = None

# caps chosen so pool offsets and unique keys stay exact in float64/int64
MAX_POOL_MASS = 1 << 50
MAX_KEY = 1 << 61


@dataclass
class GroupedClusters:
    """Explicit clusters of a batch of groups, plus implicit unit-mass pools.

    masses[i] is the mass of explicit cluster i and gid[i] its group, with gid
    sorted nondecreasing.  In pooled mode every group has total mass
    ``pool_total`` and an implicit pool of pool_total - (explicit mass in the
    group) unit singletons.  tag_pos maps tracked clusters to positions in
    ``masses``.
    """

    n_groups: int
    masses: np.ndarray
    gid: np.ndarray
    pool_total: int | None = None  # per-group total mass in pooled mode
    tag_pos: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def explicit_mass_by_group(self) -> np.ndarray:
        return np.bincount(self.gid, weights=self.masses, minlength=self.n_groups)

    def pool_count_by_group(self) -> np.ndarray:
        """Implicit unit singletons per group (pooled mode only)."""
        if self.pool_total is None:
            raise ValueError("not a pooled state")
        counts = self.pool_total - self.explicit_mass_by_group()
        return np.rint(counts).astype(np.int64)


def _group_slices(
    gid: np.ndarray, pg: np.ndarray, n_groups: int
) -> tuple[np.ndarray, np.ndarray]:
    """Slice bounds [lo, hi) of each queried group in the gid-sorted arrays.

    Uses a bincount-based pointer table (O(C + G) build, O(1) random lookups)
    unless the group count dwarfs the work, where bisection wins.
    """
    if n_groups <= 4 * (gid.size + pg.size):
        counts = np.bincount(gid, minlength=n_groups)
        ptr = np.concatenate(([0], np.cumsum(counts)))
        return ptr[pg], ptr[pg + 1]
    lo = np.searchsorted(gid, pg, side="left")
    hi = np.searchsorted(gid, pg, side="right")
    return lo, hi


def _bounded_pick(cum, vals, lo, hi) -> np.ndarray:
    """Indices of the cumsum cells containing ``vals``, clipped into [lo, hi).

    The numba kernel bisects within each [lo, hi) slice directly; the numpy
    fallback searches the whole cumsum with queries in sorted order so the
    probes walk it near-sequentially.
    """
    if _kernels is not None:
        out = np.empty(vals.size, dtype=np.int64)
        _kernels.bounded_pick(cum, vals, lo, hi, out)
        return out
    order = np.argsort(vals, kind="stable")
    found = np.empty(vals.size, dtype=np.int64)
    found[order] = np.searchsorted(cum, vals[order], side="right")
    return np.minimum(np.maximum(found, lo), hi - 1)


def _relabel(masses, gid, edges_a, edges_b, tag_pos):
    """Union the endpoint pairs and rebuild (masses, gid, tag_pos).

    Components collapse onto their minimal node index, so compaction keeps
    the gid order without a sort.  The numba union-find does this directly;
    the scipy fallback relies on first-seen component labels increasing with
    node index (asserted, with an argsort safety net).
    """
    count = masses.size
    if _kernels is not None:
        root, acc, tag_roots = _kernels.union_pass(
            count, edges_a, edges_b, masses,
            tag_pos if tag_pos.size else np.empty(0, dtype=np.int64),
        )
        alive = root == np.arange(count)
        new_index = np.cumsum(alive) - 1
        new_masses = acc[alive]
        new_gid = gid[alive]
        new_tags = new_index[tag_roots] if tag_pos.size else tag_pos
        return new_masses, new_gid, new_tags
    data = np.ones(edges_a.size, dtype=np.int8)
    graph = coo_matrix((data, (edges_a, edges_b)), shape=(count, count))
    _, labels = connected_components(graph, directed=False)
    new_masses = np.bincount(labels, weights=masses)
    new_gid = np.empty(new_masses.size, dtype=np.int64)
    new_gid[labels] = gid
    new_tags = labels[tag_pos] if tag_pos.size else tag_pos
    if new_gid.size > 1 and np.any(np.diff(new_gid) < 0):
        order = np.argsort(new_gid, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        new_masses = new_masses[order]
        new_gid = new_gid[order]
        new_tags = rank[new_tags] if new_tags.size else new_tags
    return new_masses, new_gid, new_tags


def advance_pooled(
    state: GroupedClusters,
    pair_rate: float,
    rng: np.random.Generator,
) -> GroupedClusters:
    """One merge layer over pooled groups of common total mass S.

    Pairs per group are Poisson(pair_rate * S**2 / 2); each endpoint is a
    uniform point of the group's mass, resolved to an explicit cluster or to a
    pool singleton materialized in place.
    """
    S = state.pool_total
    if S is None:
        raise ValueError("advance_pooled needs a pooled state")
    if S > MAX_POOL_MASS or state.n_groups * S > MAX_KEY:
        raise ValueError("group mass beyond exact-arithmetic cap")
    lam_total = state.n_groups * pair_rate * S * S / 2.0
    n_pairs = int(rng.poisson(lam_total))
    if n_pairs == 0:
        return state
    masses, gid = state.masses, state.gid
    old_count = masses.size
    pg = rng.integers(0, state.n_groups, n_pairs, dtype=np.int64)
    lo, hi = _group_slices(gid, pg, state.n_groups)
    cum = np.cumsum(masses)
    cum0 = np.concatenate(([0.0], cum))
    emt = cum0[hi] - cum0[lo]

    sides = []
    pool_keys = []
    for _ in range(2):
        u = rng.random(n_pairs) * S
        in_pool = u >= emt
        expl = np.flatnonzero(~in_pool)
        idx = np.empty(n_pairs, dtype=np.int64)
        if expl.size:
            idx[expl] = _bounded_pick(cum, cum0[lo[expl]] + u[expl], lo[expl], hi[expl])
        key = np.where(in_pool, pg * S + np.floor(u - emt).astype(np.int64), -1)
        sides.append((in_pool, idx))
        pool_keys.append(key)

    all_keys = np.concatenate([k[s[0]] for k, s in zip(pool_keys, sides)])
    uniq_keys, inv = np.unique(all_keys, return_inverse=True)
    new_gid_part = uniq_keys // S

    # splice the materialized singletons into the gid-sorted arrays; the k-th
    # new element lands at positions[k] + k and an old element at index i
    # shifts right by the number of insertions at or before i
    positions = np.searchsorted(gid, new_gid_part, side="right")
    new_count = uniq_keys.size
    new_final = positions + np.arange(new_count)
    spliced_masses = np.empty(old_count + new_count)
    spliced_gid = np.empty(old_count + new_count, dtype=np.int64)
    new_mask = np.zeros(old_count + new_count, dtype=bool)
    new_mask[new_final] = True
    spliced_masses[new_final] = 1.0
    spliced_masses[~new_mask] = masses
    spliced_gid[new_final] = new_gid_part
    spliced_gid[~new_mask] = gid
    # gather table: shift_table[i] = number of insertions at or before old index i
    shift_table = np.cumsum(np.bincount(positions, minlength=old_count + 1))

    endpoints = []
    offset = 0
    for (in_pool, idx), key in zip(sides, pool_keys):
        node = np.empty(n_pairs, dtype=np.int64)
        expl = ~in_pool
        node[expl] = idx[expl] + shift_table[idx[expl]]
        n_side = int(np.count_nonzero(in_pool))
        node[in_pool] = new_final[inv[offset : offset + n_side]]
        offset += n_side
        endpoints.append(node)

    tag_pos = state.tag_pos
    if tag_pos.size:
        tag_pos = tag_pos + shift_table[tag_pos]
    new_masses, new_gid, new_tags = _relabel(
        spliced_masses, spliced_gid, endpoints[0], endpoints[1], tag_pos
    )
    return GroupedClusters(state.n_groups, new_masses, new_gid, S, new_tags)


def advance_explicit(
    state: GroupedClusters,
    pair_rate: float | np.ndarray,
    rng: np.random.Generator,
) -> GroupedClusters:
    """One merge layer over fully explicit groups (arbitrary real masses).

    Per-group pair counts are Poisson(rate_g * S_g**2 / 2); pooled into one
    draw and assigned to groups proportionally to their rates.
    """
    masses, gid = state.masses, state.gid
    totals = np.bincount(gid, weights=masses, minlength=state.n_groups)
    lam = np.broadcast_to(np.asarray(pair_rate, dtype=float), totals.shape) * totals * totals / 2.0
    lam_sum = float(lam.sum())
    n_pairs = int(rng.poisson(lam_sum)) if lam_sum > 0 else 0
    if n_pairs == 0:
        return state
    lam_cum = np.cumsum(lam)
    pg = np.searchsorted(lam_cum, rng.random(n_pairs) * lam_sum, side="right")
    pg = np.minimum(pg, state.n_groups - 1).astype(np.int64)
    lo, hi = _group_slices(gid, pg, state.n_groups)
    cum = np.cumsum(masses)
    cum0 = np.concatenate(([0.0], cum))
    emt = cum0[hi] - cum0[lo]
    endpoints = []
    for _ in range(2):
        u = rng.random(n_pairs) * emt
        idx = np.searchsorted(cum, cum0[lo] + u, side="right")
        idx = np.minimum(np.maximum(idx, lo), np.maximum(hi - 1, lo))
        endpoints.append(idx)
    new_masses, new_gid, new_tags = _relabel(
        masses, gid, endpoints[0], endpoints[1], state.tag_pos
    )
    return GroupedClusters(state.n_groups, new_masses, new_gid, None, new_tags)


def regroup(state: GroupedClusters, fanin: int) -> GroupedClusters:
    """Merge blocks of ``fanin`` consecutive groups into parent groups.

    Group order is replica-major, so the map g -> (g // B)*B' + (g % B) // fanin
    with B the per-replica group count is monotone and preserves sortedness.
    """
    if state.n_groups % fanin:
        raise ValueError("group count not divisible by fan-in")
    new_gid = state.gid // fanin
    pool = None if state.pool_total is None else state.pool_total * fanin
    return GroupedClusters(state.n_groups // fanin, state.masses, new_gid, pool, state.tag_pos)
