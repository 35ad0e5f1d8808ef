"""Estimators for the quantities the scaling theory quantifies.

All estimators are fold-style: replicas can be distributed over any workers
and partial results merge associatively (the pooled mean and variance are
combined exactly, so the merged estimate does not depend on the merge order).
Ratio statistics whose delta-method errors are unreliable carry bootstrap
confidence intervals with a fixed resample count and sub-seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .lattice import ModelParams
from .percsim import BatchStats

BOOTSTRAP_RESAMPLES = 200
MIN_REPLICAS_ERROR_TERMS = 50
MIN_REPLICAS_RATIOS = 1000


@dataclass
class MomentEstimate:
    """(value, standard error, replica count), mergeable across workers."""

    mean: float
    stderr: float
    count: int
    exact: bool = False

    @classmethod
    def from_samples(cls, samples) -> "MomentEstimate":
        arr = np.asarray(samples, dtype=float)
        if arr.size == 0:
            raise ValueError("no samples")
        mean = float(arr.mean())
        if arr.size == 1:
            return cls(mean, float("inf"), 1)
        # two-pass variance avoids the cancellation of mean-of-squares forms
        var = float(np.sum((arr - mean) ** 2)) / (arr.size - 1)
        return cls(mean, math.sqrt(var / arr.size), arr.size)

    def merge(self, other: "MomentEstimate") -> "MomentEstimate":
        """Exact pooled combination (count-weighted mean, parallel-axis M2)."""
        n1, n2 = self.count, other.count
        n = n1 + n2
        delta = other.mean - self.mean
        mean = self.mean + delta * n2 / n
        m2_self = self.stderr ** 2 * n1 * (n1 - 1) if n1 > 1 else 0.0
        m2_other = other.stderr ** 2 * n2 * (n2 - 1) if n2 > 1 else 0.0
        m2 = m2_self + m2_other + delta * delta * n1 * n2 / n
        stderr = math.sqrt(m2 / (n - 1) / n) if n > 1 else float("inf")
        return MomentEstimate(mean, stderr, n, exact=self.exact and other.exact)

    def agrees_with(self, value: float, n_se: float = 4.0) -> bool:
        return abs(self.mean - value) <= n_se * self.stderr


def bootstrap_ci(values: np.ndarray, statistic, seed: int, resamples: int = BOOTSTRAP_RESAMPLES,
                 level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap interval for a statistic of replica rows."""
    rng = rngmod.stream(seed, rngmod.KIND_BOOTSTRAP)
    n = values.shape[-1]
    stats = []
    for _ in range(resamples):
        idx = rng.integers(0, n, n)
        stats.append(statistic(values[..., idx]))
    lo, hi = np.quantile(stats, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def estimate_typical_max(max_samples) -> int:
    """Plug-in typical value of the largest cluster: the smallest integer m
    with empirical P(max >= m) <= 1/e."""
    arr = np.asarray(max_samples, dtype=float)
    if arr.size < 100:
        raise ValueError(f"need at least 100 samples, got {arr.size}")
    threshold = arr.size / math.e
    m = 0
    # survival is nonincreasing; scan candidate integers up to max+1
    top = int(arr.max()) + 1
    sorted_arr = np.sort(arr)
    while m <= top:
        exceed = arr.size - np.searchsorted(sorted_arr, m, side="left")
        if exceed <= threshold:
            return m
        m += 1
    return m


def cluster_moments(
    batch: BatchStats, p: int, params: ModelParams, *, mode: str = "norm"
) -> MomentEstimate:
    """Estimate E|K_n|**p for the cluster of a uniform vertex.

    mode="norm" uses the mass-transport identity E|K_n|**p =
    L**(-d n) E sum_C |C|**(p+1) on per-replica power sums; mode="tagged"
    averages the p-th power of a tagged vertex's cluster size.  The two agree
    in expectation and the suite enforces 4-SE agreement.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if mode == "norm":
        if p + 1 not in batch.power_sums:
            raise KeyError(f"batch lacks power sums of order {p + 1}")
        scale = float(params.branching) ** -batch.n
        return MomentEstimate.from_samples(batch.power_sums[p + 1] * scale)
    if mode == "tagged":
        if batch.tagged_sizes is None:
            raise ValueError("batch has no tagged sizes")
        vals = batch.tagged_sizes[0].astype(np.longdouble) ** p
        return MomentEstimate.from_samples(np.asarray(vals, dtype=float))
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class TailCurve:
    """Empirical survival of cluster sizes on a threshold grid, with binomial
    CIs and a weighted log-log slope over the configured middle window."""

    grid: np.ndarray
    survival: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_samples: int
    slope: float = float("nan")
    slope_se: float = float("nan")
    window: tuple[int, int] = (0, 0)

    def check_monotone(self) -> bool:
        return bool(np.all(np.diff(self.survival) <= 1e-12))


def tail_curve(samples, grid, *, drop_low_decade: bool = True, top_quantile: float = 0.98) -> TailCurve:
    """Survival curve of cluster-size samples plus a fitted log-log slope.

    The slope window excludes thresholds below 10x the smallest grid point
    (lattice discreteness) and above the ``top_quantile`` order statistic of
    the samples (extreme-value noise); both cuts are fixed so fits are
    reproducible.  Weights are inverse variances of log survival.
    """
    arr = np.asarray(samples, dtype=float)
    grid = np.asarray(sorted(grid), dtype=float)
    if arr.size == 0 or grid.size == 0:
        raise ValueError("empty samples or grid")
    n = arr.size
    sorted_arr = np.sort(arr)
    exceed = n - np.searchsorted(sorted_arr, grid, side="left")
    survival = exceed / n
    # normal-approximation binomial CI, clipped
    se = np.sqrt(np.maximum(survival * (1 - survival), 0.0) / n)
    ci_low = np.maximum(survival - 1.96 * se, 0.0)
    ci_high = np.minimum(survival + 1.96 * se, 1.0)
    curve = TailCurve(grid, survival, ci_low, ci_high, n)

    lo_cut = 10.0 * grid[0] if drop_low_decade else grid[0]
    hi_cut = float(np.quantile(arr, top_quantile))
    mask = (grid >= lo_cut) & (grid <= hi_cut) & (survival > 0) & (survival < 1)
    if int(mask.sum()) < 2:
        raise ValueError("empty or degenerate slope window")
    x = np.log(grid[mask])
    y = np.log(survival[mask])
    w = exceed[mask] * (1 - survival[mask])  # 1/var(log p_hat) ~ n p/(1-p)
    w = np.maximum(w, 1e-12)
    slope, slope_se = _weighted_slope(x, y, w)
    curve.slope = slope
    curve.slope_se = slope_se
    curve.window = (int(np.flatnonzero(mask)[0]), int(np.flatnonzero(mask)[-1]))
    return curve


def _weighted_slope(x, y, w) -> tuple[float, float]:
    wsum = w.sum()
    xbar = (w * x).sum() / wsum
    ybar = (w * y).sum() / wsum
    sxx = (w * (x - xbar) ** 2).sum()
    slope = (w * (x - xbar) * (y - ybar)).sum() / sxx
    resid = y - ybar - slope * (x - xbar)
    dof = max(x.size - 2, 1)
    sigma2 = (w * resid ** 2).sum() / dof
    return float(slope), float(math.sqrt(sigma2 / sxx))


def fit_line(x, y) -> tuple[float, float, float, float]:
    """Ordinary least squares: slope, slope SE, intercept, R**2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xbar, ybar = x.mean(), y.mean()
    sxx = np.sum((x - xbar) ** 2)
    slope = np.sum((x - xbar) * (y - ybar)) / sxx
    intercept = ybar - slope * xbar
    resid = y - intercept - slope * x
    dof = max(x.size - 2, 1)
    se = math.sqrt(np.sum(resid ** 2) / dof / sxx)
    ss_tot = np.sum((y - ybar) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(se), float(intercept), float(r2)


def size_biased_moments(samples, p: int) -> float:
    """p-th moment of the size-biased, mean-rescaled law of the samples:
    E[K**(p+1)] E[K]**(p-1) / E[K**2]**p, plug-in."""
    if p < 1:
        raise ValueError("p must be >= 1")
    arr = np.asarray(samples, dtype=np.longdouble)
    m1 = arr.mean()
    m2 = (arr ** 2).mean()
    if m2 == 0:
        raise ValueError("zero second moment")
    mp1 = (arr ** (p + 1)).mean()
    return float(mp1 * m1 ** (p - 1) / m2 ** p)


def size_biased_moments_from_cluster_moments(m: dict[int, float], p: int) -> float:
    """Same plug-in from estimated cluster moments m[j] ~ E|K|**j."""
    return m[p + 1] * m[1] ** (p - 1) / m[2] ** p


def lp_normalized(batch: BatchStats, p: float, params: ModelParams) -> MomentEstimate:
    """Estimate of E sum_i (L**(-(d+alpha) n / 2) |K_{n,i}|)**p.

    Integer p uses the batch's power sums; non-integer p needs multisets.
    """
    scale = float(params.L) ** (-(params.d + params.alpha) * batch.n / 2.0)
    if float(p).is_integer() and int(p) in batch.power_sums:
        vals = batch.power_sums[int(p)] * scale ** p
        return MomentEstimate.from_samples(vals)
    if batch.multisets is None:
        raise ValueError("non-integer p needs multisets in the batch")
    vals = np.array([ms.power_sum(p) for ms in batch.multisets]) * scale ** p
    return MomentEstimate.from_samples(vals)


def truncated_sum_sq(batch_or_multisets, m: int) -> MomentEstimate:
    """Estimate of E sum_A |A| * min(|A|, m), the truncated second power sum."""
    if m < 1:
        raise ValueError("m must be >= 1")
    multisets = batch_or_multisets.multisets if isinstance(batch_or_multisets, BatchStats) \
        else batch_or_multisets
    if multisets is None:
        raise ValueError("need per-replica multisets")
    vals = []
    for ms in multisets:
        masses = ms.masses
        vals.append(float(np.sum(masses * np.minimum(masses, m))) + ms.singletons)
    return MomentEstimate.from_samples(np.asarray(vals))


@dataclass
class ErrorTerms:
    """Plug-in flow error terms with bootstrap CIs.

    e2 = (E S4 - Var S2)/(E S2)**2, e3 = (E S5 + E S2 E S3 - E[S2 S3])/(E S2 E S3),
    h = (L**a/(L**a-1) - t/t_n) t_n E S2 - 1, where Sp is the p-th power sum.
    """

    e2: float
    e2_ci: tuple[float, float]
    e3: float
    e3_ci: tuple[float, float]
    h: float
    h_ci: tuple[float, float]
    replicas: int


def error_terms(batch: BatchStats, t: float, params: ModelParams, seed: int = 0) -> ErrorTerms:
    """Estimate the three flow error terms from one replica set.

    All constituent moments come from the same replicas, so the cross terms
    are internally consistent.  Requires at least 50 replicas.
    """
    reps = batch.reps
    if reps < MIN_REPLICAS_ERROR_TERMS:
        raise ValueError(f"need >= {MIN_REPLICAS_ERROR_TERMS} replicas, got {reps}")
    for p in (2, 3, 4, 5):
        if p not in batch.power_sums:
            raise KeyError(f"batch lacks power sums of order {p}")
    s2 = batch.power_sums[2]
    s3 = batch.power_sums[3]
    s4 = batch.power_sums[4]
    s5 = batch.power_sums[5]
    t_n = params.time_horizon(batch.n)
    La = float(params.L) ** params.alpha
    flow = La / (La - 1.0) - (t / t_n if t_n > 0 else 0.0)

    def compute(rows) -> tuple[float, float, float]:
        r2, r3, r4, r5 = rows
        m2, m3, m4, m5 = r2.mean(), r3.mean(), r4.mean(), r5.mean()
        var2 = np.mean((r2 - m2) ** 2)
        cross23 = np.mean(r2 * r3)
        e2 = (m4 - var2) / m2 ** 2
        e3 = (m5 + m2 * m3 - cross23) / (m2 * m3)
        h = flow * t_n * m2 - 1.0
        return e2, e3, h

    rows = np.vstack([s2, s3, s4, s5])
    e2, e3, h = compute(rows)
    e2_ci = bootstrap_ci(rows, lambda r: compute(r)[0], seed)
    e3_ci = bootstrap_ci(rows, lambda r: compute(r)[1], seed + 1)
    h_ci = bootstrap_ci(rows, lambda r: compute(r)[2], seed + 2)
    return ErrorTerms(e2, e2_ci, e3, e3_ci, h, h_ci, reps)


@dataclass
class VarCovRatios:
    var_ratio: float
    var_ratio_ci: tuple[float, float]
    cov_ratio: float
    cov_ratio_ci: tuple[float, float]
    replicas: int


def var_cov_ratios(batch: BatchStats, seed: int = 0) -> VarCovRatios:
    """(Var S2 / E S4, Cov(S2, S3) / E S5) with bootstrap CIs.

    The near-deterministic flow predicts 2/3 and 4/5 in the regimes where the
    largest cluster is sub-characteristic.
    """
    reps = batch.reps
    if reps < MIN_REPLICAS_RATIOS:
        raise ValueError(f"need >= {MIN_REPLICAS_RATIOS} replicas, got {reps}")
    s2 = batch.power_sums[2]
    s3 = batch.power_sums[3]
    s4 = batch.power_sums[4]
    s5 = batch.power_sums[5]

    def ratios(rows):
        r2, r3, r4, r5 = rows
        m2, m3 = r2.mean(), r3.mean()
        var2 = np.mean((r2 - m2) ** 2)
        cov23 = np.mean((r2 - m2) * (r3 - m3))
        if var2 == 0:
            raise ValueError("degenerate variance")
        return var2 / r4.mean(), cov23 / r5.mean()

    rows = np.vstack([s2, s3, s4, s5])
    vr, cr = ratios(rows)
    vr_ci = bootstrap_ci(rows, lambda r: ratios(r)[0], seed)
    cr_ci = bootstrap_ci(rows, lambda r: ratios(r)[1], seed + 1)
    return VarCovRatios(vr, vr_ci, cr, cr_ci, reps)


def ghost_transform(samples, h: float) -> MomentEstimate:
    """Estimate of E[1 - exp(-h |K|)], the ghost-marking transform of the
    tagged cluster-size law."""
    if h < 0:
        raise ValueError("intensity h must be >= 0")
    arr = np.asarray(samples, dtype=float)
    return MomentEstimate.from_samples(-np.expm1(-h * arr))
