"""Index arithmetic for the hierarchical lattice.

Vertices of the scale-n box are flat integers in [0, L**(d*n)), read as n
base-L**d digits; digit i (1-based, least significant first) is the coordinate
of the vertex at the i-th coarsening level.  The m-blocks are exactly the
aligned ranges of L**(d*m) consecutive indices, so block membership is integer
division and the ultrametric is a most-significant-differing-digit scan.

All kernel evaluations use closed-form geometric sums.  The only truncated
series in the module is the partial-sum self-check guarding the closed form of
the periodic (quotient-kernel) surplus constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Counts of vertices, pairs and masses are manipulated as exact Python ints or
# as float64; the scale cap keeps L**(d*n) < 2**62 so either is safe.
MAX_SITES = 1 << 62


class ScaleCapError(ValueError):
    """Scale too large for exact 64-bit index arithmetic."""


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of the model: dimension d, branching side L,
    kernel decay exponent alpha, coupling beta."""

    d: int
    L: int
    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if self.d < 1 or int(self.d) != self.d:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if self.L < 2 or int(self.L) != self.L:
            raise ValueError(f"L must be an integer >= 2, got {self.L}")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")

    @property
    def branching(self) -> int:
        """Number of children of a block, L**d."""
        return self.L ** self.d

    @property
    def layer_ratio(self) -> float:
        """L**-(d+alpha), the per-scale decay of layer weights."""
        return float(self.L) ** -(self.d + self.alpha)

    def with_beta(self, beta: float) -> "ModelParams":
        return ModelParams(self.d, self.L, self.alpha, beta)

    def require_finite_critical(self) -> None:
        """Operations that presume a finite critical point need 0 < alpha < d."""
        if not (0 < self.alpha < self.d):
            raise ValueError(
                f"finite critical point requires 0 < alpha < d, got alpha={self.alpha}, d={self.d}"
            )

    def n_sites(self, n: int) -> int:
        """Number of vertices of the scale-n box, exact."""
        if n < 0:
            raise ValueError("scale must be >= 0")
        count = self.branching ** n
        if count > MAX_SITES:
            raise ScaleCapError(f"L^(d n) = {count} exceeds the 64-bit scale cap")
        return count

    def time_horizon(self, n: int) -> float:
        """t_n = beta * L**-(d+alpha)n, the duration of the scale-n layer."""
        if n < 0:
            raise ValueError("scale must be >= 0")
        return self.beta * float(self.L) ** (-(self.d + self.alpha) * n)


def check_vertex(v: int, n: int, params: ModelParams) -> None:
    if not (0 <= v < params.n_sites(n)):
        raise ValueError(f"vertex {v} out of range for scale {n}")


def digits(v: int, n: int, params: ModelParams) -> list[int]:
    """Base-L**d digits of a vertex, least significant (finest level) first."""
    check_vertex(v, n, params)
    base = params.branching
    out = []
    for _ in range(n):
        out.append(v % base)
        v //= base
    return out


def from_digits(ds: list[int], params: ModelParams) -> int:
    base = params.branching
    v = 0
    for digit in reversed(ds):
        if not 0 <= digit < base:
            raise ValueError(f"digit {digit} out of range for base {base}")
        v = v * base + digit
    return v


def hdist(x: int, y: int, n: int, params: ModelParams) -> int:
    """1-based position of the most significant differing base-L**d digit.

    Returns 0 when x == y.  The ultrametric norm of y - x is L**hdist.
    """
    check_vertex(x, n, params)
    check_vertex(y, n, params)
    if x == y:
        return 0
    base = params.branching
    h = 0
    i = 1
    while x != y:
        if x % base != y % base:
            h = i
        x //= base
        y //= base
        i += 1
    return h


def norm(x: int, y: int, n: int, params: ModelParams) -> float:
    h = hdist(x, y, n, params)
    return 0.0 if h == 0 else float(params.L) ** h


def group_add(x: int, y: int, n: int, params: ModelParams) -> int:
    """Group operation of the lattice: digitwise base-L addition without carry.

    Each base-L**d digit is a point of the d-torus (Z/L)**d, so the group sum
    adds every base-L coordinate modulo L independently.
    """
    check_vertex(x, n, params)
    check_vertex(y, n, params)
    L = params.L
    out = 0
    mult = 1
    for _ in range(n * params.d):
        out += ((x % L + y % L) % L) * mult
        x //= L
        y //= L
        mult *= L
    return out


def group_neg(x: int, n: int, params: ModelParams) -> int:
    """Group inverse: digitwise base-L negation."""
    check_vertex(x, n, params)
    L = params.L
    out = 0
    mult = 1
    for _ in range(n * params.d):
        out += ((L - x % L) % L) * mult
        x //= L
        mult *= L
    return out


def kernel_free(x: int, y: int, n: int, params: ModelParams) -> float:
    """Infinite-volume kernel: sum over scales m >= hdist of L**-(d+alpha)m.

    Closed form L**(d+alpha)/(L**(d+alpha)-1) * norm**-(d+alpha).  Undefined on
    the diagonal.
    """
    h = hdist(x, y, n, params)
    if h == 0:
        raise ValueError("kernel is undefined for x == y")
    theta = params.layer_ratio
    return theta ** h / (1.0 - theta)


def kernel_interpolated(x: int, y: int, n: int, t: float, params: ModelParams) -> float:
    """Edge weight of the intermediate-time configuration at top-layer time t.

    Equals (t / t_n) * L**-(d+alpha)n plus the full weight of all scales from
    hdist up to n-1.  Requires 0 <= t <= t_n and beta > 0 (t is a time, and the
    schedule t_n is proportional to beta).
    """
    t_n = params.time_horizon(n)
    if not (0.0 <= t <= t_n * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, t_n={t_n}]")
    h = hdist(x, y, n, params)
    if h == 0:
        raise ValueError("kernel is undefined for x == y")
    theta = params.layer_ratio
    # sum_{m=h}^{n-1} theta^m, empty when h == n
    inner = theta ** h * (1.0 - theta ** (n - h)) / (1.0 - theta) if h < n else 0.0
    frac = t / t_n if t_n > 0 else 0.0
    return frac * theta ** n + inner


def periodic_constant(params: ModelParams, check_terms: int = 1000, check_tol: float = 1e-12) -> float:
    """Surplus of the quotient kernel over the free kernel, in units of the
    top-layer weight L**-(d+alpha)n.

    Folding the infinite lattice onto the scale-n box adds, for each vertex
    pair, the kernel mass of all translates of the target by elements of the
    complement subgroup.  Summing the geometric series gives

        A = L**(d+alpha)/(L**(d+alpha)-1) * [L**-(d+alpha) + (1 - L**-d)/(L**alpha - 1)],

    independent of n.  The closed form is re-verified here against a 10**3-term
    partial sum before being returned.
    """
    if params.alpha <= 0:
        raise ValueError("periodic surplus series diverges for alpha <= 0")
    d, L, alpha = params.d, float(params.L), params.alpha
    prefactor = L ** (d + alpha) / (L ** (d + alpha) - 1.0)
    closed = prefactor * (L ** -(d + alpha) + (1.0 - L ** -d) / (L ** alpha - 1.0))
    partial = L ** -(d + alpha)
    for m in range(1, check_terms + 1):
        # L^{d(m-1)} (L^d - 1) L^{-(d+alpha)m} = (1 - L^-d) L^{-alpha m}
        partial += (1.0 - L ** -d) * L ** (-alpha * m)
    partial *= prefactor
    if abs(closed - partial) > check_tol * max(1.0, abs(closed)):
        raise AssertionError(
            f"periodic constant self-check failed: closed={closed!r} partial={partial!r}"
        )
    return closed
