"""Numba kernels for the merge engine's two hot loops.

Both kernels are drop-in replacements for numpy code paths and produce
identical outputs: endpoint resolution does the same bounded bisection into
the mass prefix sums, and the union pass merges the same multigraph with the
component root fixed at the smallest node index (matching the first-seen
labeling of the sparse fallback).  Importing this module is optional; the
engine falls back to pure numpy/scipy when numba is unavailable.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def bounded_pick(cum, vals, lo, hi, out):
    """out[k] = index in [lo[k], hi[k]) of the cumsum cell containing vals[k]."""
    for k in range(vals.size):
        a = lo[k]
        b = hi[k] - 1
        v = vals[k]
        # first index with cum[index] > v, clipped into [lo, hi)
        while a < b:
            mid = (a + b) >> 1
            if cum[mid] > v:
                b = mid
            else:
                a = mid + 1
        out[k] = a


@numba.njit(cache=True)
def union_pass(n_nodes, ea, eb, masses, tag_pos):
    """Union the edge list over n_nodes; roots are minimal node indices.

    Returns (root, mass_at_root, new_tag_roots): root[i] is the component
    representative of node i (== i iff i survives), masses accumulate at
    roots, and tag positions are remapped to their roots.
    """
    parent = np.arange(n_nodes)
    acc = masses.copy()
    for k in range(ea.size):
        a = ea[k]
        b = eb[k]
        # find with path halving
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if a > b:
            a, b = b, a
        parent[b] = a
        acc[a] += acc[b]
    # final compression so parent[i] is the true minimal-index root
    for i in range(n_nodes):
        r = i
        while parent[r] != r:
            r = parent[r]
        j = i
        while parent[j] != r:
            parent[j], j = r, parent[j]
    tags = np.empty(tag_pos.size, dtype=np.int64)
    for k in range(tag_pos.size):
        tags[k] = parent[tag_pos[k]]
    return parent, acc, tags
