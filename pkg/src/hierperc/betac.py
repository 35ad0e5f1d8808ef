"""Critical-point estimation by bisection on a scale-flow indicator.

The normalized susceptibility g_n = L**(-(d+alpha) n) E sum_C |C|**2 is
asymptotically flat in n exactly at the critical coupling; it decays like
L**(-alpha n) below and grows like L**((d-alpha) n) above.  A probe classifies
a coupling by the fitted slope of log_L g_n over a window of consecutive
scales, with a 4-standard-error margin against the threshold tau = alpha/4
(splitting the theoretical slope gap with margin on both sides).

One run at the window's top scale estimates every g_m in the window at once:
the scale-m sub-boxes of a larger box are iid copies of the scale-m model, so
sub-box averages are unbiased and the slope's standard error accounts for the
across-scale correlation within a replica.  Unclassifiable probes escalate
replicas and window scale alternately (variance first, bias second) within an
explicit work budget measured in vertex units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import ModelParams
from .percsim import sizes_batch
from .stats import MomentEstimate


@dataclass
class FlowProbe:
    """Diagnostics of one coupling classification."""

    beta: float
    slope: float
    se: float
    window: tuple[int, int]
    reps: int
    verdict: str  # "sub", "super", "flat"
    g_values: dict[int, float] = field(default_factory=dict)


@dataclass
class BetacBracket:
    """A bracket [lower, upper] for the critical coupling with the per-probe
    evidence that classified each endpoint."""

    lower: float
    upper: float
    probes: list[FlowProbe] = field(default_factory=list)
    conclusive: bool = True
    budget_used: int = 0

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def relative_width(self) -> float:
        return (self.upper - self.lower) / self.midpoint


def normalized_susceptibility(
    params: ModelParams, beta: float, n: int, reps: int, seed: int
) -> MomentEstimate:
    """g_n = L**(-(d+alpha) n) * (estimate of E sum_C |C|**2)."""
    p = params.with_beta(beta)
    scale = float(params.L) ** (-(params.d + params.alpha) * n)
    if beta == 0.0:
        return MomentEstimate(p.n_sites(n) * scale, 0.0, reps, exact=True)
    batch = sizes_batch(p, n, reps, seed, powers=(2,))
    return MomentEstimate.from_samples(batch.power_sums[2] * scale)


def flow_slope(
    params: ModelParams,
    beta: float,
    window: tuple[int, int],
    reps: int,
    seed: int,
) -> tuple[float, float, dict[int, float]]:
    """Mean slope of log_L g_n over a window of consecutive scales, with SE.

    The mean of successive log ratios telescopes to the endpoints; both
    endpoint estimates come from the same scale-n_hi replicas (the n_lo value
    from sub-box averages), and the SE is the delta-method variance of the log
    ratio including their covariance.
    """
    n_lo, n_hi = window
    if n_hi - n_lo < 2:
        raise ValueError("window must span at least 3 consecutive scales")
    p = params.with_beta(beta)
    span = (n_hi - n_lo) * math.log(params.L)
    if beta == 0.0:
        g = {m: float(params.L) ** (-params.alpha * m) for m in range(n_lo, n_hi + 1)}
        return -params.alpha, 0.0, g
    batch = sizes_batch(
        p, n_hi, reps, seed, powers=(2,),
        record_scales=tuple(range(n_lo, n_hi + 1)),
    )
    norm = {m: float(params.L) ** (-(params.d + params.alpha) * m) for m in range(n_lo, n_hi + 1)}
    per_rep = {m: batch.scale_sums[m][2] * norm[m] for m in batch.scale_sums}
    g = {m: float(v.mean()) for m, v in per_rep.items()}
    lo, hi = per_rep[n_lo], per_rep[n_hi]
    slope = (math.log(g[n_hi]) - math.log(g[n_lo])) / span
    r = reps
    cov = np.cov(np.vstack([lo, hi]))  # 2x2, sample covariance
    var_log = cov[0, 0] / g[n_lo] ** 2 + cov[1, 1] / g[n_hi] ** 2 \
        - 2 * cov[0, 1] / (g[n_lo] * g[n_hi])
    se = math.sqrt(max(var_log, 0.0) / r) / span
    return slope, se, g


def window_cost(params: ModelParams, window: tuple[int, int], reps: int,
                beta: float = 0.0) -> int:
    """Work of one probe attempt: vertices of the top-scale run, weighted by
    the expected merge events per vertex (which grow with the coupling)."""
    density = 1.0 + beta / (float(params.L) ** params.alpha - 1.0)
    return int(reps * params.branching ** window[1] * density)


def classify_beta(
    params: ModelParams,
    beta: float,
    seed: int,
    *,
    window: tuple[int, int],
    reps: int,
    max_work: int,
    max_scale: int,
) -> tuple[FlowProbe, int]:
    """Classify one coupling, escalating replicas and scale alternately.

    Returns the probe (verdict "flat" when the work budget ran out before the
    slope separated from the threshold band) and the vertex-work consumed.
    """
    tau = params.alpha / 4.0
    used = 0
    n_lo, n_hi = window
    attempt = 0
    doublings = 0
    while True:
        slope, se, g = flow_slope(params, beta, (n_lo, n_hi), reps, seed + attempt)
        used += window_cost(params, (n_lo, n_hi), reps, beta)
        if slope + 4 * se < -tau:
            return FlowProbe(beta, slope, se, (n_lo, n_hi), reps, "sub", g), used
        if slope - 4 * se > tau:
            return FlowProbe(beta, slope, se, (n_lo, n_hi), reps, "super", g), used
        # escalate: while the 4-SE interval straddles a threshold the probe is
        # variance-limited, so replicas double (at most twice per window);
        # otherwise the window deepens, because the drift signal grows
        # geometrically with scale while replicas only buy sqrt factors
        attempt += 1
        straddles = abs(abs(slope) - tau) < 4 * se
        more_reps = ((n_lo, n_hi), reps * 2)
        deeper = ((n_lo + 2, n_hi + 2), max(reps // 2, 12))
        if n_hi + 2 > max_scale:
            choices = [more_reps]
        elif straddles and doublings < 2:
            choices = [more_reps, deeper]
        else:
            choices = [deeper, more_reps]
        chosen = None
        for nxt_window, nxt_reps in choices:
            if used + window_cost(params, nxt_window, nxt_reps, beta) <= max_work:
                chosen = (nxt_window, nxt_reps)
                break
        if chosen is None:
            return FlowProbe(beta, slope, se, (n_lo, n_hi), reps, "flat", g), used
        doublings = doublings + 1 if chosen == more_reps else 0
        (n_lo, n_hi), reps = chosen


def mean_field_coupling(params: ModelParams) -> float:
    """1 / sum_y J(0, y), a rigorous lower bound and useful starting scale."""
    params.require_finite_critical()
    d, L, a = params.d, float(params.L), params.alpha
    total = (1 - L ** -d) * (L ** (d + a) / (L ** (d + a) - 1.0)) * (L ** -a / (1 - L ** -a))
    return 1.0 / total


def default_window(params: ModelParams) -> tuple[int, int]:
    """Starting probe window; escalation deepens it for near-critical probes."""
    return (10, 14)


def bisect_betac(
    params: ModelParams,
    tolerance: float,
    seed: int,
    *,
    window: tuple[int, int] | None = None,
    reps: int = 128,
    budget: int = 700_000_000,
    max_scale: int = 24,
) -> BetacBracket:
    """Bracket the critical coupling to a relative width by bisection.

    Starts from the mean-field lower bound, expands geometrically until both
    endpoints classify, then bisects.  A probe that stays unclassifiable after
    escalation ends the search with the current bracket flagged inconclusive
    (near-critical probes are the expensive ones, so this is the expected exit
    when the tolerance outruns the budget).  Deterministic for fixed
    (params, seed, budget).
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    params.require_finite_critical()
    if window is None:
        window = default_window(params)
    bracket = BetacBracket(0.0, 0.0)
    used = 0
    probe_idx = 0

    def probe(beta: float) -> FlowProbe:
        nonlocal used, probe_idx
        per_probe = max(budget // 3, 1)
        p, cost = classify_beta(
            params, beta, seed + 104729 * probe_idx,
            window=window, reps=reps,
            max_work=min(per_probe, max(budget - used, 1)),
            max_scale=max_scale,
        )
        probe_idx += 1
        used += cost
        bracket.probes.append(p)
        return p

    base = mean_field_coupling(params)
    lower, upper = 0.85 * base, 1.7 * base

    def finish(lo: float, hi: float, conclusive: bool) -> BetacBracket:
        bracket.lower, bracket.upper = lo, hi
        bracket.conclusive = conclusive
        bracket.budget_used = used
        return bracket

    # expansion: a flat endpoint is near-critical, so keep moving outward
    for _ in range(12):
        p = probe(lower)
        if p.verdict == "sub":
            break
        lower *= 0.7
        if used >= budget:
            return finish(lower, upper, False)
    else:
        raise RuntimeError("failed to find a subcritical endpoint")
    for _ in range(12):
        p = probe(upper)
        if p.verdict == "super":
            break
        upper *= 1.6
        if used >= budget:
            return finish(lower, upper, False)
    else:
        raise RuntimeError("failed to find a supercritical endpoint")

    while (upper - lower) / (0.5 * (upper + lower)) > tolerance:
        if used >= budget:
            return finish(lower, upper, False)
        mid = 0.5 * (lower + upper)
        p = probe(mid)
        if p.verdict == "sub":
            lower = mid
        elif p.verdict == "super":
            upper = mid
        else:
            # the midpoint sits inside the critical blur; quarter-point probes
            # can still shrink the bracket from both sides
            moved = False
            q1 = lower + 0.25 * (upper - lower)
            q3 = upper - 0.25 * (upper - lower)
            if used < budget:
                p1 = probe(q1)
                if p1.verdict == "sub":
                    lower, moved = q1, True
                elif p1.verdict == "super":
                    upper, moved = q1, True
            if used < budget:
                p3 = probe(q3)
                if p3.verdict == "super":
                    upper, moved = q3, True
                elif p3.verdict == "sub":
                    lower, moved = q3, True
            if not moved:
                return finish(lower, upper, False)
    return finish(lower, upper, True)


def audit_lower_bound(
    params: ModelParams,
    beta: float,
    scales,
    reps: int,
    seed: int,
    *,
    t_fractions=(0.5, 1.0),
    n_se: float = 4.0,
) -> list[dict]:
    """Check the exact mean-field lower bound on E sum_C |C|**2 at a coupling.

    The bound (1/beta)(L**a/(L**a - 1) - t/t_n)**-1 L**((d+alpha) n) holds for
    every n, t at and above the critical coupling; violations beyond noise
    flag the coupling as too low.  Returns one record per (n, t).
    """
    from .momentode import sum_sq_asymptote

    p = params.with_beta(beta)
    out = []
    for n in scales:
        t_n = p.time_horizon(n)
        for frac in t_fractions:
            t = frac * t_n
            batch = sizes_batch(p, n, reps, seed + n, top_time=t, powers=(2,))
            est = MomentEstimate.from_samples(batch.power_sums[2])
            bound = sum_sq_asymptote(params, beta, n, t)
            ok = est.mean >= bound - n_se * est.stderr
            out.append({
                "n": n, "t": t, "estimate": est.mean, "stderr": est.stderr,
                "bound": bound, "ok": bool(ok),
            })
    return out
