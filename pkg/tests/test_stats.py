import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierperc.lattice import ModelParams
from hierperc.percsim import SizeMultiset, sizes_batch
from hierperc.stats import (
    MomentEstimate,
    cluster_moments,
    error_terms,
    estimate_typical_max,
    fit_line,
    ghost_transform,
    lp_normalized,
    size_biased_moments,
    tail_curve,
    truncated_sum_sq,
    var_cov_ratios,
)


def test_estimate_from_samples():
    e = MomentEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
    assert e.mean == 2.5 and e.count == 4
    assert abs(e.stderr - np.std([1, 2, 3, 4], ddof=1) / 2) < 1e-15


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=40),
       st.lists(st.floats(-100, 100), min_size=2, max_size=40))
def test_merge_is_exact_pooling(a, b):
    merged = MomentEstimate.from_samples(a).merge(MomentEstimate.from_samples(b))
    pooled = MomentEstimate.from_samples(a + b)
    assert math.isclose(merged.mean, pooled.mean, rel_tol=1e-9, abs_tol=1e-9)
    if math.isfinite(pooled.stderr):
        assert math.isclose(merged.stderr, pooled.stderr, rel_tol=1e-7, abs_tol=1e-9)
    assert merged.count == pooled.count


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=15),
       st.lists(st.floats(-10, 10), min_size=2, max_size=15),
       st.lists(st.floats(-10, 10), min_size=2, max_size=15))
def test_merge_associative_commutative(a, b, c):
    ea, eb, ec = (MomentEstimate.from_samples(x) for x in (a, b, c))
    m1 = ea.merge(eb).merge(ec)
    m2 = ea.merge(eb.merge(ec))
    m3 = ec.merge(ea).merge(eb)
    for x, y in ((m1, m2), (m1, m3)):
        assert math.isclose(x.mean, y.mean, rel_tol=1e-9, abs_tol=1e-12)
        assert math.isclose(x.stderr, y.stderr, rel_tol=1e-7, abs_tol=1e-12) or \
            (math.isnan(x.stderr) and math.isnan(y.stderr))


def test_typical_max_examples():
    # all samples equal 5: survival at 5 is 1 > 1/e, at 6 is 0
    assert estimate_typical_max([5] * 100) == 6
    # single-vertex box: max is always 1, so the typical value is 2
    assert estimate_typical_max([1] * 200) == 2
    with pytest.raises(ValueError):
        estimate_typical_max([3] * 50)


def test_cluster_moments_beta_zero():
    p = ModelParams(1, 2, 0.5, 0.0)
    b = sizes_batch(p, 4, 50, seed=1, powers=(2, 3))
    for q in (1, 2):
        est = cluster_moments(b, q, p)
        assert est.mean == 1.0 and est.stderr == 0.0


def test_cluster_moments_two_routes_agree():
    p = ModelParams(1, 2, 0.5, 1.0)
    b = sizes_batch(p, 6, 3000, seed=2, powers=(2, 3), tags=(0,))
    for q in (1, 2):
        norm = cluster_moments(b, q, p, mode="norm")
        tagged = cluster_moments(b, q, p, mode="tagged")
        se = math.hypot(norm.stderr, tagged.stderr)
        assert abs(norm.mean - tagged.mean) <= 4 * se


def test_cluster_moments_two_vertex_closed_form():
    beta, alpha = 0.8, 0.4
    p = ModelParams(1, 2, alpha, beta)
    b = sizes_batch(p, 1, 20000, seed=3, powers=(2,))
    est = cluster_moments(b, 1, p)
    target = 1 + (1 - math.exp(-beta * 2 ** -(1 + alpha)))
    assert abs(est.mean - target) <= 4 * est.stderr


def test_tail_curve_power_law():
    rng = np.random.default_rng(0)
    # pareto tail with exponent -2, scaled so the fit window is wide
    samples = 100.0 * (1 - rng.random(200000)) ** (-1 / 2.0)
    grid = np.geomspace(1, 3000, 40)
    c = tail_curve(samples, grid)
    assert c.check_monotone()
    assert abs(c.slope + 2.0) < 0.1
    assert np.all(c.ci_low <= c.survival) and np.all(c.survival <= c.ci_high)


def test_tail_curve_degenerate():
    with pytest.raises(ValueError):
        tail_curve([7.0] * 500, [1, 2, 4, 8, 16])


def test_size_biased_moments():
    assert abs(size_biased_moments([3.0] * 50, 2) - 1.0) < 1e-12
    rng = np.random.default_rng(1)
    chi2 = rng.standard_normal(10 ** 6) ** 2
    # plug-in values for chi-squared(1) input: (2p+1)!! / 3^p
    targets = {1: 1.0, 2: 5.0 / 3.0, 3: 35.0 / 9.0}
    for p, target in targets.items():
        assert abs(size_biased_moments(chi2, p) / target - 1) < 0.02
    with pytest.raises(ValueError):
        size_biased_moments([0.0, 0.0], 1)


def test_lp_normalized_beta_zero():
    p = ModelParams(1, 2, 0.6, 0.0)
    n = 5
    b = sizes_batch(p, n, 20, seed=4, powers=(2,), keep_multisets=True)
    est2 = lp_normalized(b, 2, p)
    assert abs(est2.mean - 2.0 ** (-0.6 * n)) < 1e-12
    # at p = 2d/(d+alpha) the normalized sum is exactly 1 for all n
    pc = 2 * 1 / (1 + 0.6)
    est = lp_normalized(b, pc, p)
    assert abs(est.mean - 1.0) < 1e-12


def test_truncated_sum_sq_examples():
    ms = [SizeMultiset(np.array([3.0, 2.0]))]
    assert truncated_sum_sq(ms, 2).mean == 10.0  # 3*2 + 2*2
    assert truncated_sum_sq(ms, 1).mean == 5.0  # total mass
    assert truncated_sum_sq(ms, 10).mean == 13.0  # full sum of squares
    with pytest.raises(ValueError):
        truncated_sum_sq(ms, 0)


@given(st.lists(st.integers(1, 20), min_size=1, max_size=10), st.integers(1, 25))
def test_truncated_sum_sq_brute_force(sizes, m):
    ms = [SizeMultiset(np.array(sizes, dtype=float))]
    expect = sum(s * min(s, m) for s in sizes)
    assert truncated_sum_sq(ms, m).mean == expect


def test_error_terms_deterministic_state():
    p = ModelParams(1, 2, 0.5, 1.0)
    b = sizes_batch(p, 3, 64, seed=5, powers=(2, 3, 4, 5))
    # overwrite with a deterministic state: every replica identical
    for q in (2, 3, 4, 5):
        b.power_sums[q] = np.full(64, float(b.power_sums[q][0]))
    et = error_terms(b, p.time_horizon(3), p)
    m2, m4 = b.power_sums[2][0], b.power_sums[4][0]
    assert abs(et.e2 - m4 / m2 ** 2) < 1e-12
    with pytest.raises(ValueError):
        error_terms(sizes_batch(p, 3, 20, seed=6), p.time_horizon(3), p)


def test_error_terms_e2_nonnegative():
    p = ModelParams(1, 2, 0.4, 0.8)
    b = sizes_batch(p, 8, 400, seed=7, powers=(2, 3, 4, 5))
    et = error_terms(b, p.time_horizon(8), p)
    assert et.e2_ci[1] >= 0.0  # nonnegative within CI
    assert et.e2 >= -4 * (et.e2_ci[1] - et.e2_ci[0])
    assert et.e2_ci[0] <= et.e2 <= et.e2_ci[1]


def test_var_cov_ratios_iid_copies_invariance():
    p = ModelParams(1, 2, 0.3, 0.6)
    b = sizes_batch(p, 6, 1500, seed=8, powers=(2, 3, 4, 5))
    r1 = var_cov_ratios(b)
    # disjoint union of k iid states: all power sums add, so Var and the
    # fourth-power mean both scale by k and the ratio is unchanged
    k = 3
    b2 = sizes_batch(p, 6, 1500 * k, seed=8, powers=(2, 3, 4, 5))
    stacked = type(b)(reps=1500, n=6)
    for q in (2, 3, 4, 5):
        stacked.power_sums[q] = b2.power_sums[q].reshape(k, 1500).sum(axis=0)
    r2 = var_cov_ratios(stacked)
    assert abs(r1.var_ratio - r2.var_ratio) < 0.15
    with pytest.raises(ValueError):
        var_cov_ratios(sizes_batch(p, 4, 100, seed=9))


def test_ghost_transform():
    assert ghost_transform([5, 7], 0.0).mean == 0.0
    assert abs(ghost_transform([5, 7], 1e9).mean - 1.0) < 1e-12
    est = ghost_transform([1.0, 2.0], 0.5)
    expect = np.mean([1 - math.exp(-0.5), 1 - math.exp(-1.0)])
    assert abs(est.mean - expect) < 1e-12
    with pytest.raises(ValueError):
        ghost_transform([1.0], -0.1)


def test_fit_line():
    x = np.arange(10.0)
    slope, se, intercept, r2 = fit_line(x, 3 * x + 1)
    assert abs(slope - 3) < 1e-12 and abs(intercept - 1) < 1e-12 and r2 > 0.999999
