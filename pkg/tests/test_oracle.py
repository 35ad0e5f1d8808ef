import math

import numpy as np
import pytest

from hierperc.lattice import ModelParams
from hierperc.oracle import (
    PartitionLattice,
    compose_product_law,
    exact_coalescent_law,
    exact_cross_moment,
    exact_moments,
    exact_percolation_law,
    initial_partition_for_masses,
    lattice_for_masses,
)


def test_partition_count():
    assert len(PartitionLattice.build([1.0] * 4).partitions) == 15
    assert len(PartitionLattice.build([1.0] * 5).partitions) == 52
    with pytest.raises(ValueError):
        PartitionLattice.build([1.0] * 7)


def test_generator_rows_sum_zero():
    lat = PartitionLattice.build([1.0, 2.0, 1.0])
    assert np.allclose(lat.generator.sum(axis=1), 0.0, atol=1e-12)
    # merge rate out of all-singletons: 1*2 + 1*1 + 2*1 = 5
    i = lat.index[lat.singletons()]
    assert abs(lat.generator[i, i] + 5.0) < 1e-12


def test_law_t0_point_mass():
    lat = lattice_for_masses((1, 1))
    law = exact_coalescent_law(lat, initial_partition_for_masses([1, 1]), 0.0)
    assert law[lat.index[initial_partition_for_masses([1, 1])]] == 1.0


def test_two_singletons_merge_probability():
    lat = lattice_for_masses((1, 1))
    for t in (0.1, 0.9, 3.0):
        law = exact_coalescent_law(lat, initial_partition_for_masses([1, 1]), t)
        merged = sum(w for part, w in zip(lat.partitions, law) if len(part) == 1)
        assert abs(merged - (1 - math.exp(-t))) < 1e-9


def test_three_singletons_closed_form():
    lat = lattice_for_masses((1, 1, 1))
    law = exact_coalescent_law(lat, initial_partition_for_masses([1, 1, 1]), 1.0)
    merged = sum(w for part, w in zip(lat.partitions, law) if len(part) == 1)
    assert abs(merged - (1 - 3 * math.exp(-2) + 2 * math.exp(-3))) < 1e-9
    assert abs(law.sum() - 1.0) < 1e-9


def test_chapman_kolmogorov():
    lat = lattice_for_masses((1, 1, 1, 1))
    init = initial_partition_for_masses([1, 1, 1, 1])
    s, t = 0.37, 0.58
    direct = exact_coalescent_law(lat, init, s + t)
    via = np.zeros_like(direct)
    mid = exact_coalescent_law(lat, init, s)
    for part, w in zip(lat.partitions, mid):
        if w:
            via += w * exact_coalescent_law(lat, part, t)
    assert np.abs(via - direct).max() < 1e-8


def test_exact_moments_basics():
    lat = lattice_for_masses((1, 1, 1))
    point = np.zeros(len(lat.partitions))
    point[lat.index[lat.singletons()]] = 1.0
    for p in (1, 2, 3):
        assert exact_moments(lat, point, p) == 3.0
    merged = np.zeros(len(lat.partitions))
    merged[lat.index[initial_partition_for_masses([3])]] = 1.0
    assert exact_moments(lat, merged, 4) == 81.0
    # linearity in the law
    mix = 0.25 * point + 0.75 * merged
    assert abs(exact_moments(lat, mix, 2) - (0.25 * 3 + 0.75 * 9)) < 1e-12
    with pytest.raises(ValueError):
        exact_moments(lat, point * 0.5, 2)


def test_cross_moment_consistency():
    lat = lattice_for_masses((2, 1))
    law = exact_coalescent_law(lat, initial_partition_for_masses([2, 1]), 0.4, tol=1e-13)
    # on a two-cluster system (sum m^2)(sum m^1) enumerated by hand
    val = exact_cross_moment(lat, law, 2, 1)
    p_merged = 1 - math.exp(-0.4 * 2)
    expect = p_merged * 9 * 3 + (1 - p_merged) * 5 * 3
    assert abs(val - expect) < 1e-9


def test_percolation_law_beta_zero():
    lat, law = exact_percolation_law(2, ModelParams(1, 2, 0.5, 0.0))
    assert abs(law[lat.index[lat.singletons()]] - 1.0) < 1e-12


def test_percolation_two_vertices_bernoulli():
    p = ModelParams(1, 2, 0.7, 1.3)
    lat, law = exact_percolation_law(1, p)
    theta = p.layer_ratio
    prob = 1 - math.exp(-1.3 * theta)
    merged = sum(w for part, w in zip(lat.partitions, law) if len(part) == 1)
    assert abs(merged - prob) < 1e-12


def test_percolation_cap():
    with pytest.raises(ValueError):
        exact_percolation_law(3, ModelParams(1, 2, 0.5, 1.0))


def test_composition_equals_enumeration():
    # recursive coalescent construction == direct percolation law, 4 vertices
    p = ModelParams(1, 2, 0.5, 1.0)
    lat4, law4 = exact_percolation_law(2, p)
    lat2 = PartitionLattice.build([1.0, 1.0])
    law2 = exact_coalescent_law(lat2, ((0,), (1,)), p.time_horizon(1), tol=1e-12)
    prod = compose_product_law([(lat2, law2), (lat2, law2)], lat4)
    composed = np.zeros(len(lat4.partitions))
    for part, w in zip(lat4.partitions, prod):
        if w:
            composed += w * exact_coalescent_law(lat4, part, p.time_horizon(2), tol=1e-12)
    assert np.abs(composed - law4).max() < 1e-8
