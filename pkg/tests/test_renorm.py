import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from hierperc.lattice import ModelParams
from hierperc.percsim import sizes_batch
from hierperc.renorm import EmpiricalLaw, iterate_renorm, renorm_step

P = ModelParams(1, 2, 0.6, 0.0)


def test_dirac_law():
    law = EmpiricalLaw.dirac(1.5, 10)
    assert len(law.draws) == 10
    assert np.all(law.totals() == 1.5)


def test_zero_mass_law_stays_zero():
    law = EmpiricalLaw([np.array([0.0])] * 20)
    out = renorm_step(law, P, seed=1)
    assert np.all(out.totals() == 0.0)


def test_mass_bookkeeping():
    # output total = L^{-(d+alpha)/2} * sum of the L^d input totals, per draw
    law = EmpiricalLaw.dirac(2.0, 64)
    out = renorm_step(law, P, seed=2, mass_floor=0.0)
    scale = 2.0 ** (-(1 + 0.6) / 2)
    assert np.allclose(out.totals(), scale * 2 * 2.0, atol=1e-12)
    assert out.steps_taken == 1
    assert len(out.mass_deficit_log) == 1


def test_one_step_matches_scale_one_law():
    # one step from the point mass at sqrt(beta) is the law of
    # sqrt(beta) L^{-(d+alpha)/2} times the scale-1 cluster sizes; comparing
    # on the integer lattice of the statistic avoids float-atom mismatches
    beta = 0.9
    draws = 4000
    law = renorm_step(EmpiricalLaw.dirac(math.sqrt(beta), draws), P, seed=3)
    direct = sizes_batch(P.with_beta(beta), 1, draws, seed=4, powers=(2,))
    factor = beta * 2.0 ** -(1 + 0.6)
    assert ks_2samp(np.rint(law.sum_sq() / factor), direct.power_sums[2]).pvalue > 1e-3


def test_multi_step_bridge():
    # n steps reproduce the normalized scale-n cluster sizes, here n = 3
    beta, steps, draws = 1.1, 3, 3000
    traj = iterate_renorm(P, beta, steps, draws, seed=5, keep_laws=True)
    law = traj.laws[-1]
    direct = sizes_batch(P.with_beta(beta), steps, draws, seed=6, powers=(2,),
                         keep_multisets=True)
    factor = beta * 2.0 ** (-(1 + 0.6) * steps)
    assert ks_2samp(np.rint(law.sum_sq() / factor), direct.power_sums[2]).pvalue > 1e-3
    largest_direct = np.array([ms.largest() for ms in direct.multisets])
    assert ks_2samp(np.rint(law.largest() / math.sqrt(factor)), largest_direct).pvalue > 1e-3


def test_trajectory_summaries_and_deficit():
    traj = iterate_renorm(P, 0.4, 4, 500, seed=7)
    assert len(traj.steps) == 4
    for s in traj.steps:
        assert s["mass_deficit"] < 1e-6
    # far below the critical coupling the mean sum of squares decays
    assert traj.steps[-1]["mean_sum_sq"] < traj.steps[0]["mean_sum_sq"]


def test_empty_law_rejected():
    with pytest.raises(ValueError):
        renorm_step(EmpiricalLaw([]), P, seed=1)
