"""Exact laws on tiny instances.

Ground truth for every stochastic routine in the package: the multiplicative
coalescent on ground sets of at most 6 elements is solved exactly by
uniformization of its generator on the set-partition lattice, and percolation
configurations on at most 4 vertices are enumerated edge subset by edge
subset.  Partitions are enumerated in restricted-growth-string order so the
indexing is canonical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import ModelParams, hdist, kernel_interpolated

MAX_GROUND = 6


def _partitions_rgs(k: int):
    """All set partitions of range(k) as block tuples, in RGS order."""
    out = []

    def rec(i: int, labels: list[int], maxlab: int):
        if i == k:
            blocks: list[list[int]] = [[] for _ in range(maxlab + 1)]
            for elem, lab in enumerate(labels):
                blocks[lab].append(elem)
            out.append(tuple(tuple(b) for b in blocks))
            return
        for lab in range(maxlab + 2):
            labels.append(lab)
            rec(i + 1, labels, max(maxlab, lab))
            labels.pop()

    rec(0, [], -1)
    return out


def _canonical(blocks) -> tuple[tuple[int, ...], ...]:
    """Canonical form: blocks sorted internally and by least element."""
    bs = [tuple(sorted(b)) for b in blocks]
    bs.sort(key=lambda b: b[0])
    return tuple(bs)


@dataclass
class PartitionLattice:
    """Set partitions of a weighted ground set with the pairwise-merge
    generator of the multiplicative coalescent.

    weights[i] is the mass of ground element i; block mass is the sum of its
    element weights, and distinct blocks A, B merge at rate mass(A)*mass(B).
    """

    weights: tuple[float, ...]
    partitions: tuple
    index: dict
    generator: np.ndarray

    @classmethod
    def build(cls, weights) -> "PartitionLattice":
        weights = tuple(float(w) for w in weights)
        k = len(weights)
        if k == 0:
            raise ValueError("ground set must be non-empty")
        if k > MAX_GROUND:
            raise ValueError(f"ground set of {k} exceeds the exact-oracle cap {MAX_GROUND}")
        if any(w <= 0 for w in weights):
            raise ValueError("element weights must be positive")
        parts = tuple(_canonical(p) for p in _partitions_rgs(k))
        index = {p: i for i, p in enumerate(parts)}
        gen = np.zeros((len(parts), len(parts)))
        for i, part in enumerate(parts):
            blocks = list(part)
            for a in range(len(blocks)):
                for b in range(a + 1, len(blocks)):
                    mass_a = sum(weights[e] for e in blocks[a])
                    mass_b = sum(weights[e] for e in blocks[b])
                    merged = [blk for c, blk in enumerate(blocks) if c not in (a, b)]
                    merged.append(tuple(sorted(blocks[a] + blocks[b])))
                    j = index[_canonical(merged)]
                    rate = mass_a * mass_b
                    gen[i, j] += rate
                    gen[i, i] -= rate
        return cls(weights, parts, index, gen)

    def block_masses(self, part) -> list[float]:
        return [sum(self.weights[e] for e in blk) for blk in part]

    def singletons(self) -> tuple[tuple[int, ...], ...]:
        return _canonical([(i,) for i in range(len(self.weights))])


@lru_cache(maxsize=32)
def lattice_for_masses(masses: tuple) -> PartitionLattice:
    """Partition lattice for an integer mass list: each mass-m entry becomes m
    unit-weight ground elements, initially glued into one block."""
    total = int(sum(masses))
    if total > MAX_GROUND:
        raise ValueError(f"total mass {total} exceeds the exact-oracle cap {MAX_GROUND}")
    return PartitionLattice.build([1.0] * total)


def initial_partition_for_masses(masses) -> tuple:
    """Consecutive-run partition of the unit ground set realizing a mass list."""
    blocks = []
    at = 0
    for m in masses:
        m = int(m)
        if m <= 0:
            raise ValueError("masses must be positive integers")
        blocks.append(tuple(range(at, at + m)))
        at += m
    return _canonical(blocks)


def exact_coalescent_law(
    lat: PartitionLattice, initial, t: float, tol: float = 1e-10
) -> np.ndarray:
    """Row of exp(t*G) from the initial partition, by uniformization.

    Uniformization is unconditionally stable for generator matrices: with
    lam = max_i |G_ii| and P = I + G/lam, the law is the Poisson(lam*t) mixture
    of powers of P, truncated once the remaining Poisson mass drops below tol.
    """
    if t < 0:
        raise ValueError("time must be >= 0")
    start = lat.index[_canonical(initial)]
    v = np.zeros(len(lat.partitions))
    v[start] = 1.0
    lam = float(np.max(-np.diag(lat.generator)))
    if lam == 0.0 or t == 0.0:
        return v
    trans = np.eye(len(lat.partitions)) + lat.generator / lam
    mu = lam * t
    log_weight = -mu  # log of Poisson pmf at j=0
    weight = math.exp(log_weight)
    out = weight * v
    consumed = weight
    j = 0
    # iterate until the Poisson tail is below tol
    while 1.0 - consumed > tol:
        j += 1
        v = v @ trans
        log_weight += math.log(mu) - math.log(j)
        weight = math.exp(log_weight)
        out += weight * v
        consumed += weight
        if j > 100 * (mu + 10):
            raise RuntimeError("uniformization failed to converge")
    # the truncated tail is a sub-probability defect below tol
    return out


def exact_percolation_law(n: int, params: ModelParams) -> tuple[PartitionLattice, np.ndarray]:
    """Exact law of the cluster partition of the scale-n configuration, by
    enumerating all edge subsets.  Limited to boxes of at most 4 vertices."""
    size = params.n_sites(n)
    if size > 4:
        raise ValueError(f"exact percolation law capped at 4 vertices, got {size}")
    lat = PartitionLattice.build([1.0] * size)
    pairs = [(x, y) for x in range(size) for y in range(x + 1, size)]
    t_n = params.time_horizon(n)
    # pair inclusion probability 1 - exp(-beta * J) with J the full scale-n weight
    probs = [
        1.0 - math.exp(-params.beta * kernel_interpolated(x, y, n, t_n, params))
        for (x, y) in pairs
    ]
    law = np.zeros(len(lat.partitions))
    for mask in range(1 << len(pairs)):
        weight = 1.0
        parent = list(range(size))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for bit, (x, y) in enumerate(pairs):
            if mask >> bit & 1:
                weight *= probs[bit]
                parent[find(x)] = find(y)
            else:
                weight *= 1.0 - probs[bit]
        if weight == 0.0:
            continue
        blocks: dict[int, list[int]] = {}
        for v in range(size):
            blocks.setdefault(find(v), []).append(v)
        law[lat.index[_canonical(blocks.values())]] += weight
    return lat, law


def exact_moments(lat: PartitionLattice, law: np.ndarray, p: float, tol: float = 1e-9) -> float:
    """E sum_{blocks} mass**p under a law on the partition lattice."""
    total = float(np.sum(law))
    if abs(total - 1.0) > tol:
        raise ValueError(f"law is not normalized: sums to {total}")
    acc = 0.0
    for part, weight in zip(lat.partitions, law):
        if weight == 0.0:
            continue
        acc += weight * sum(m ** p for m in lat.block_masses(part))
    return acc


def exact_cross_moment(
    lat: PartitionLattice, law: np.ndarray, a: int, b: int, tol: float = 1e-9
) -> float:
    """E[(sum mass**a)(sum mass**b)] under a law on the partition lattice."""
    total = float(np.sum(law))
    if abs(total - 1.0) > tol:
        raise ValueError(f"law is not normalized: sums to {total}")
    acc = 0.0
    for part, weight in zip(lat.partitions, law):
        if weight == 0.0:
            continue
        masses = lat.block_masses(part)
        acc += weight * sum(m ** a for m in masses) * sum(m ** b for m in masses)
    return acc


def exact_survival(lat: PartitionLattice, law: np.ndarray, stat, threshold: float) -> float:
    """P(stat(partition) >= threshold) under a law; stat maps mass lists to reals."""
    acc = 0.0
    for part, weight in zip(lat.partitions, law):
        if stat(lat.block_masses(part)) >= threshold:
            acc += weight
    return acc


def compose_product_law(
    lat_children: list[tuple[PartitionLattice, np.ndarray]],
    lat_parent: PartitionLattice,
) -> np.ndarray:
    """Product law of independent child partitions, embedded as a law on the
    parent lattice via the disjoint union (children occupy consecutive index
    ranges of the parent ground set)."""
    sizes = [len(lat.weights) for lat, _ in lat_children]
    if sum(sizes) != len(lat_parent.weights):
        raise ValueError("child ground sets must tile the parent ground set")
    out = np.zeros(len(lat_parent.partitions))

    def rec(i: int, offset: int, blocks: list, weight: float):
        if weight == 0.0:
            return
        if i == len(lat_children):
            out[lat_parent.index[_canonical(blocks)]] += weight
            return
        lat, law = lat_children[i]
        for part, w in zip(lat.partitions, law):
            shifted = [tuple(e + offset for e in blk) for blk in part]
            rec(i + 1, offset + sizes[i], blocks + shifted, weight * w)

    rec(0, 0, [], 1.0)
    return out
