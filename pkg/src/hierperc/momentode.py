"""Deterministic moment machinery.

Closed forms for the expected power sums of the coalescent state under the
near-deterministic (hydrodynamic) flow, the exact derivative of an expected
power sum, double-factorial combinatorics, the analytic identities used by the
verification suite, and the decaying-sequence recursion that governs the
logarithmic corrections at the critical dimension d = 3*alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .lattice import ModelParams

Regime = str  # one of "low", "high", "critical"


def double_factorial(k: int) -> int:
    """Product of the positive integers <= k with k's parity, exact.

    By convention 0!! = (-1)!! = 1.
    """
    if k < -1 or int(k) != k:
        raise ValueError(f"double factorial needs an integer >= -1, got {k}")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def merge_identity(n: int) -> tuple[int, int]:
    """Both sides of sum_{k=1}^{n-1} C(n,k) (2k-3)!! (2n-2k-3)!! = 2 (2n-3)!!,
    as exact integers."""
    if n < 2:
        raise ValueError("identity needs n >= 2")
    lhs = sum(
        math.comb(n, k) * double_factorial(2 * k - 3) * double_factorial(2 * (n - k) - 3)
        for k in range(1, n)
    )
    rhs = 2 * double_factorial(2 * n - 3)
    return lhs, rhs


def double_factorial_egf(x: float, terms: int) -> float:
    """Partial sum of sum_{n>=1} (2n-3)!! x^n / n!, which converges to
    1 - sqrt(1-2x) for |x| < 1/2."""
    total = 0.0
    for n in range(1, terms + 1):
        total += double_factorial(2 * n - 3) * x ** n / math.factorial(n)
    return total


@dataclass
class MomentVector:
    """Estimates of expected power sums of a coalescent state at one (n, t).

    marginal[p] holds E sum_C |C|**p and cross[(a, b)] holds the cross moment
    E[(sum |C|**a)(sum |C|**b)], with a <= b in the key.  Cross moments must
    come from the same replica set as the marginals so that the exact
    derivative below is evaluated on internally consistent estimates.
    """

    n: int = 0
    t: float = 0.0
    marginal: dict[int, float] = field(default_factory=dict)
    cross: dict[tuple[int, int], float] = field(default_factory=dict)

    def get_cross(self, a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        if key not in self.cross:
            raise KeyError(f"missing cross moment {key}")
        return self.cross[key]


def power_sum_rate(moments: MomentVector, p: int) -> float:
    """Exact time derivative of E sum_C |C|**p along the multiplicative
    coalescent:

        (1/2) sum_{k=1}^{p-1} C(p,k) E[S_{k+1} S_{p-k+1}] - (2**(p-1) - 1) E S_{p+2}

    where S_q = sum_C |C|**q.  Needs the cross moments for k = 1..p-1 and the
    marginal of order p+2.
    """
    if p < 2:
        raise ValueError("derivative formula needs integer p >= 2")
    acc = 0.0
    for k in range(1, p):
        acc += math.comb(p, k) * moments.get_cross(k + 1, p - k + 1)
    if p + 2 not in moments.marginal:
        raise KeyError(f"missing marginal moment {p + 2}")
    return 0.5 * acc - (2 ** (p - 1) - 1) * moments.marginal[p + 2]


def sum_sq_asymptote(params: ModelParams, beta_c: float, n: int, t: float) -> float:
    """Near-deterministic closed form for E sum_C |C|**2 at scale n, top-layer
    time t:

        (1/beta_c) * (L**alpha/(L**alpha - 1) - t/t_n)**-1 * L**(d+alpha)n.

    Exact lower bound for every n, t; asymptotically sharp when the largest
    cluster is o(L**((d+alpha)n/2)).
    """
    if beta_c <= 0:
        raise ValueError("beta_c must be positive")
    t_n = params.with_beta(beta_c).time_horizon(n)
    if not (0.0 <= t <= t_n * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, t_n={t_n}]")
    La = float(params.L) ** params.alpha
    frac = t / t_n if t_n > 0 else 0.0
    scale = float(params.L) ** ((params.d + params.alpha) * n)
    return scale / (beta_c * (La / (La - 1.0) - frac))


def higher_power_asymptote(p: int, m2: float, m3: float) -> float:
    """Asymptote of E sum_C |C|**p for p >= 3 in terms of the second and third
    power sums: (2p-5)!! * m3**(p-2) / m2**(p-3)."""
    if p < 3:
        raise ValueError("higher-power form needs p >= 3")
    if m2 <= 0 or m3 <= 0:
        raise ValueError("m2 and m3 must be positive")
    return double_factorial(2 * p - 5) * m3 ** (p - 2) / m2 ** (p - 3)


def critical_dim_amplitude(params: ModelParams, beta_c: float, tol: float = 1e-12) -> float:
    """The explicit amplitude entering the critical-dimension (d = 3*alpha)
    moment asymptotics:

        A = sqrt((L**alpha - 1) / (beta_c * (5 L**(4 alpha) - 2 L**alpha - 3))).

    Self-checks the algebraic identity relating this to the equivalent
    third-power-sum amplitude

        (L**alpha-1)**(3/2) beta_c**(-3/2) (5 L**(6a) - 2 L**(3a) - 3 L**(2a))**(-1/2)
            = A (L**alpha - 1) / (L**alpha beta_c),

    which holds because 5 L**(6a) - 2 L**(3a) - 3 L**(2a) = L**(2a)(5 L**(4a) - 2 L**a - 3).
    """
    if beta_c <= 0:
        raise ValueError("beta_c must be positive")
    if abs(params.d - 3 * params.alpha) > 1e-12 * max(1.0, params.d):
        raise ValueError(f"amplitude defined only at d = 3*alpha, got d={params.d}, alpha={params.alpha}")
    L, a = float(params.L), params.alpha
    amp = math.sqrt((L ** a - 1.0) / (beta_c * (5 * L ** (4 * a) - 2 * L ** a - 3.0)))
    lhs = (L ** a - 1.0) ** 1.5 * beta_c ** -1.5 / math.sqrt(
        5 * L ** (6 * a) - 2 * L ** (3 * a) - 3 * L ** (2 * a)
    )
    rhs = amp * (L ** a - 1.0) / (L ** a * beta_c)
    if abs(lhs - rhs) > tol * max(abs(lhs), abs(rhs)):
        raise AssertionError(f"amplitude self-check failed: {lhs!r} vs {rhs!r}")
    return amp


def cluster_moment_prediction(
    params: ModelParams,
    beta_c: float,
    regime: Regime,
    p: int,
    n: int,
    amplitude: float | None = None,
) -> float:
    """Predicted E|K_n|**p for the cluster of a uniform vertex in the scale-n box.

    low:      order L**((alpha + (d+alpha)(p-1)/2) n); the constant is unknown,
              so the bare power is returned and only ratios are meaningful.
    high:     (2p-3)!! A**(p-1) ((L**alpha-1)/(L**alpha beta_c)) L**((2p-1) alpha n),
              with A a model-dependent amplitude.
    critical: the high form with an extra n**(-(p-1)/2) and the explicit
              amplitude of ``critical_dim_amplitude``.
    """
    if p < 1:
        raise ValueError("moment order p must be >= 1")
    d, L, a = params.d, float(params.L), params.alpha
    if regime == "low":
        if not a > d / 3:
            raise ValueError("low regime requires alpha > d/3")
        return L ** ((a + (d + a) * (p - 1) / 2.0) * n)
    if regime == "high":
        if not a < d / 3:
            raise ValueError("high regime requires alpha < d/3")
        if amplitude is None:
            raise ValueError("high regime needs the amplitude constant")
    elif regime == "critical":
        if abs(d - 3 * a) > 1e-12 * max(1.0, d):
            raise ValueError("critical regime requires d = 3*alpha")
        if amplitude is None:
            amplitude = critical_dim_amplitude(params, beta_c)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    base = (
        double_factorial(2 * p - 3)
        * amplitude ** (p - 1)
        * (L ** a - 1.0)
        / (L ** a * beta_c)
        * L ** ((2 * p - 1) * a * n)
    )
    if regime == "critical" and p >= 2:
        base *= float(n) ** (-(p - 1) / 2.0) if n > 0 else float("nan")
    return base


def tail_exponent(params: ModelParams, regime: Regime) -> float:
    """Predicted log-log slope of the cluster-volume tail P(|K| >= k).

    low: -(d-alpha)/(d+alpha); high and critical: -1/2 (the critical dimension
    carries an additional (log k)**(1/4) factor that the slope fit ignores).
    """
    if regime == "low":
        return -(params.d - params.alpha) / (params.d + params.alpha)
    if regime in ("high", "critical"):
        return -0.5
    raise ValueError(f"unknown regime {regime!r}")


def flow_log_integral(t: float, n: int, params: ModelParams) -> float:
    """Closed form of (1/t_n) * int_0^t (L**alpha/(L**alpha-1) - s/t_n)**-1 ds:

        -log(1 - (t/t_n) (L**alpha - 1)/L**alpha).

    Equals alpha*log(L) at t = t_n.
    """
    t_n = params.time_horizon(n)
    if not (0.0 <= t <= t_n * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, t_n={t_n}]")
    La = float(params.L) ** params.alpha
    frac = t / t_n if t_n > 0 else 0.0
    return -math.log(1.0 - frac * (La - 1.0) / La)


def flow_log_integral_quadrature(t: float, n: int, params: ModelParams) -> float:
    """Adaptive-quadrature reference for ``flow_log_integral`` (oracle path)."""
    from scipy.integrate import quad

    t_n = params.time_horizon(n)
    if t_n == 0:
        return 0.0
    La = float(params.L) ** params.alpha

    def integrand(s: float) -> float:
        return 1.0 / (La / (La - 1.0) - s / t_n)

    value, _ = quad(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-13)
    return value / t_n


def decay_recursion(a0: float, amp: float, gamma: float, deltas, steps: int):
    """Iterate a_{k+1} = exp(-(1 + delta_k) * amp * a_k**gamma) * a_k.

    Returns the full trajectory [a_0, ..., a_steps].  When delta_k -> 0 the
    iterates satisfy a_k ~ (gamma * amp * k)**(-1/gamma).
    """
    if a0 <= 0 or amp <= 0 or gamma <= 0:
        raise ValueError("a0, amp and gamma must all be positive")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    deltas = list(deltas)
    if len(deltas) < steps:
        raise ValueError(f"need {steps} delta values, got {len(deltas)}")
    out = [float(a0)]
    a = float(a0)
    for k in range(steps):
        a = math.exp(-(1.0 + deltas[k]) * amp * a ** gamma) * a
        out.append(a)
    return out


def decay_recursion_check(a0: float, amp: float, gamma: float, deltas, steps: int) -> float:
    """Companion diagnostic: a_N * (gamma * amp * N)**(1/gamma), which tends to 1."""
    traj = decay_recursion(a0, amp, gamma, deltas, steps)
    return traj[-1] * (gamma * amp * steps) ** (1.0 / gamma)
