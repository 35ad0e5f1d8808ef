"""The multiplicative coalescent as a standalone process.

Three samplers for the partition-valued chain where blocks of mass a and b
merge at rate a*b:

* ``run_gillespie``: the exact event chain (exponential waiting times, pair
  chosen proportionally to the product of masses among distinct pairs);
* ``run_final``: the endpoint law only, via one Poissonized size-biased pair
  layer, equal in law to the Gillespie endpoint;
* ``recursive_state``: the scale-recursive process of the lattice model at an
  intermediate top-layer time.

Gillespie pair selection draws two size-biased endpoints and rejects
same-cluster hits; the total rate already excludes the diagonal, so the
rejection is exact re-weighting, not an approximation.  Cost per event is
O(k) for a k-cluster state, which is fine for the small states the exact
path is meant for; use ``run_final`` for production-size states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .engine import GroupedClusters, advance_explicit
from .lattice import ModelParams
from .percsim import BatchStats, SizeMultiset, sizes_batch

MASS_FLOOR_DEFAULT = 1e-12  # fraction of total mass below which entries are dropped


@dataclass
class CoalescentState:
    """Masses of the current partition blocks plus elapsed time."""

    sizes: SizeMultiset
    elapsed: float = 0.0
    trace: list | None = None

    @property
    def total(self) -> float:
        return self.sizes.total


def _as_mass_array(state) -> np.ndarray:
    if isinstance(state, CoalescentState):
        return state.sizes.as_array()
    if isinstance(state, SizeMultiset):
        return state.as_array()
    arr = np.asarray(state, dtype=float)
    if arr.size == 0:
        raise ValueError("empty state")
    if np.any(arr <= 0):
        raise ValueError("masses must be positive")
    return arr


def run_gillespie(
    state,
    duration: float,
    seed: int,
    *,
    keep_trace: bool = False,
) -> CoalescentState:
    """Run the exact continuous-time chain for ``duration``.

    Total merge rate is (S**2 - sum m**2)/2 with S the total mass; waiting
    times are exponential and the merging pair is size-biased among distinct
    pairs.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    masses = list(_as_mass_array(state))
    rng = rngmod.stream(seed, rngmod.KIND_GILLESPIE)
    t = 0.0
    trace = [] if keep_trace else None
    while len(masses) > 1:
        arr = np.asarray(masses)
        s1 = arr.sum()
        s2 = float(np.dot(arr, arr))
        rate = (s1 * s1 - s2) / 2.0
        t += rng.exponential(1.0 / rate)
        if t > duration:
            break
        cum = np.cumsum(arr)
        while True:
            i = int(np.searchsorted(cum, rng.random() * s1, side="right"))
            j = int(np.searchsorted(cum, rng.random() * s1, side="right"))
            if i != j:
                break
        a, b = masses[i], masses[j]
        if trace is not None:
            trace.append((t, a, b))
        masses[min(i, j)] = a + b
        masses.pop(max(i, j))
    return CoalescentState(SizeMultiset(np.asarray(masses)), elapsed=duration, trace=trace)


def run_final(state, duration: float, seed: int) -> CoalescentState:
    """Sample only the endpoint law of the chain after ``duration``.

    One Poissonized layer: pair count Poisson(duration * S**2 / 2), endpoints
    size-biased, same-cluster hits kept as no-ops.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    masses = _as_mass_array(state)
    rng = rngmod.stream(seed, rngmod.KIND_FINAL)
    grouped = GroupedClusters(1, masses, np.zeros(masses.size, dtype=np.int64))
    grouped = advance_explicit(grouped, duration, rng)
    return CoalescentState(SizeMultiset(grouped.masses), elapsed=duration)


def run_final_batch(
    initial_masses,
    duration: float,
    reps: int,
    seed: int,
    *,
    chunk: int = 4096,
) -> list[np.ndarray]:
    """``reps`` independent endpoint draws from a common initial mass list.

    Returns one mass array per replica.  All replicas of a chunk advance in a
    single engine pass.
    """
    base = _as_mass_array(initial_masses)
    k = base.size
    out: list[np.ndarray] = []
    done = 0
    chunk_index = 0
    while done < reps:
        r = min(chunk, reps - done)
        masses = np.tile(base, r)
        gid = np.repeat(np.arange(r, dtype=np.int64), k)
        rng = rngmod.stream(seed, rngmod.KIND_FINAL, chunk_index)
        state = advance_explicit(GroupedClusters(r, masses, gid), duration, rng)
        bounds = np.searchsorted(state.gid, np.arange(r + 1))
        out.extend(state.masses[bounds[i] : bounds[i + 1]].copy() for i in range(r))
        done += r
        chunk_index += 1
    return out


def run_final_batch_moments(
    initial_masses,
    duration: float,
    reps: int,
    seed: int,
    powers: tuple[int, ...] = (2, 3, 4),
    *,
    chunk: int = 8192,
) -> dict[int, np.ndarray]:
    """Per-replica power sums of the endpoint law, without materializing draws."""
    base = _as_mass_array(initial_masses)
    k = base.size
    out: dict[int, list[np.ndarray]] = {p: [] for p in powers}
    done = 0
    chunk_index = 0
    while done < reps:
        r = min(chunk, reps - done)
        masses = np.tile(base, r)
        gid = np.repeat(np.arange(r, dtype=np.int64), k)
        rng = rngmod.stream(seed, rngmod.KIND_FINAL, chunk_index)
        state = advance_explicit(GroupedClusters(r, masses, gid), duration, rng)
        for p in powers:
            out[p].append(np.bincount(state.gid, weights=state.masses ** p, minlength=r))
        done += r
        chunk_index += 1
    return {p: np.concatenate(chunks) for p, chunks in out.items()}


def recursive_state(params: ModelParams, n: int, t: float, seed: int) -> CoalescentState:
    """One draw of the scale-n recursive state at top-layer time t.

    Children of the box are built to their full layer times, disjoint-unioned,
    and the top layer runs for duration t in [0, t_n].
    """
    stats = recursive_batch(params, n, t, 1, seed, keep_multisets=True, powers=())
    return CoalescentState(stats.multisets[0], elapsed=t)


def recursive_batch(
    params: ModelParams,
    n: int,
    t: float,
    reps: int,
    seed: int,
    *,
    powers: tuple[int, ...] = (2, 3, 4, 5),
    keep_multisets: bool = False,
    n_picks: int = 0,
    tags: tuple[int, ...] = (),
) -> BatchStats:
    """Batch sampler for the intermediate-time recursive state."""
    return sizes_batch(
        params, n, reps, seed,
        top_time=t, powers=powers, keep_multisets=keep_multisets,
        n_picks=n_picks, tags=tags,
    )


def drop_mass_floor(masses: np.ndarray, floor_fraction: float = MASS_FLOOR_DEFAULT):
    """Drop entries below floor_fraction of the total; returns (kept, deficit).

    The finite-list surrogate for states meant to live in the space of
    square-summable decreasing sequences; the dropped mass is surfaced so
    callers can log and bound it.
    """
    masses = np.asarray(masses, dtype=float)
    total = masses.sum()
    if total == 0:
        return masses, 0.0
    keep = masses >= floor_fraction * total
    deficit = float(masses[~keep].sum())
    return masses[keep], deficit
