import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from hierperc.coalescent import (
    drop_mass_floor,
    recursive_batch,
    recursive_state,
    run_final,
    run_final_batch,
    run_gillespie,
)
from hierperc.lattice import ModelParams
from hierperc.oracle import exact_coalescent_law, exact_moments, initial_partition_for_masses, \
    lattice_for_masses
from hierperc.percsim import sizes_batch


def test_single_mass_unchanged():
    st = run_gillespie([5.0], 10.0, seed=1)
    assert st.sizes.as_array().tolist() == [5.0]
    st2 = run_final([5.0], 10.0, seed=2)
    assert st2.sizes.as_array().tolist() == [5.0]


def test_pair_merge_probability():
    # masses {1,1}: a single rate-1 clock
    t = 0.6
    merged = 0
    reps = 4000
    for r in range(reps):
        st = run_gillespie([1.0, 1.0], t, seed=100 + r)
        merged += st.sizes.count == 1
    p_hat = merged / reps
    p = 1 - math.exp(-t)
    assert abs(p_hat - p) <= 4 * math.sqrt(p * (1 - p) / reps)


def test_gillespie_vs_generator_exponential():
    # spec oracle check on three singletons
    lat = lattice_for_masses((1, 1, 1))
    law = exact_coalescent_law(lat, initial_partition_for_masses([1, 1, 1]), 1.0)
    p_exact = sum(w for part, w in zip(lat.partitions, law) if len(part) == 1)
    reps = 20000
    hits = sum(run_gillespie([1, 1, 1], 1.0, seed=r).sizes.count == 1 for r in range(reps))
    p_hat = hits / reps
    assert abs(p_hat - p_exact) <= 4 * math.sqrt(p_exact * (1 - p_exact) / reps)


def test_final_agrees_with_gillespie_in_law():
    # KS on the sum of squares over replicas, initial {1,1,1,1}, duration 0.7
    reps = 4000
    g = np.array([run_gillespie([1, 1, 1, 1], 0.7, seed=r).sizes.power_sum(2)
                  for r in range(reps)])
    f = np.array([np.sum(d * d) for d in run_final_batch([1, 1, 1, 1], 0.7, reps, seed=9)])
    assert ks_2samp(g, f).pvalue > 1e-3


def test_final_duration_zero_and_infinity():
    st = run_final([2.0, 1.0, 1.0], 0.0, seed=3)
    assert sorted(st.sizes.as_array().tolist()) == [1.0, 1.0, 2.0]
    st = run_final([1.0] * 4, 200.0, seed=4)
    assert st.sizes.count == 1 and st.sizes.total == 4.0


def test_gillespie_negative_duration_and_empty():
    with pytest.raises(ValueError):
        run_gillespie([1.0], -1.0, seed=0)
    with pytest.raises(ValueError):
        run_final([], 1.0, seed=0)


def test_power_sums_monotone_along_path():
    # merges only increase p-power sums for p >= 2: (a+b)^p >= a^p + b^p
    st = run_gillespie([1.0] * 6, 5.0, seed=11, keep_trace=True)
    masses = [1.0] * 6
    for p in (2, 3):
        vals = [sum(m ** p for m in masses)]
        sim = list(masses)
        for (_, a, b) in st.trace:
            sim.remove(a)
            sim.remove(b)
            sim.append(a + b)
            vals.append(sum(m ** p for m in sim))
        assert all(y >= x - 1e-12 for x, y in zip(vals, vals[1:]))


def test_recursive_state_trivial():
    p = ModelParams(1, 2, 0.5, 0.8)
    st = recursive_state(p, 0, 0.3, seed=5)
    assert st.sizes.total == 1.0
    # E sum m^2 at (1, t=0) is exactly L^d (two singletons)
    b = recursive_batch(p, 1, 0.0, 500, seed=6, powers=(2,))
    assert np.all(b.power_sums[2] == 2.0)


def test_recursive_full_time_matches_sizes_batch():
    # recursive_state(n, t_n) has the same law as the scale-n configuration
    p = ModelParams(1, 2, 0.5, 1.0)
    a = recursive_batch(p, 5, p.time_horizon(5), 3000, seed=7, powers=(2,))
    b = sizes_batch(p, 5, 3000, seed=8, powers=(2,))
    assert ks_2samp(a.power_sums[2], b.power_sums[2]).pvalue > 1e-3


def test_disjoint_union_step_identity():
    # E sum m^p at (n+1, 0) = L^d * E sum m^p at (n, t_n), by construction
    p = ModelParams(1, 2, 0.5, 1.0)
    top = recursive_batch(p, 5, 0.0, 2500, seed=9, powers=(2, 3))
    base = sizes_batch(p, 4, 2500, seed=10, powers=(2, 3))
    for q in (2, 3):
        a = top.power_sums[q]
        b = 2 * base.power_sums[q]
        se = math.hypot(a.std(ddof=1) / math.sqrt(a.size), b.std(ddof=1) / math.sqrt(b.size))
        assert abs(a.mean() - b.mean()) <= 4 * se


def test_recursive_time_range_check():
    p = ModelParams(1, 2, 0.5, 1.0)
    with pytest.raises(ValueError):
        recursive_batch(p, 3, 2 * p.time_horizon(3), 10, seed=1)


def test_drop_mass_floor():
    kept, deficit = drop_mass_floor(np.array([1.0, 1e-15, 2.0]), 1e-12)
    assert kept.tolist() == [1.0, 2.0]
    assert abs(deficit - 1e-15) < 1e-20
