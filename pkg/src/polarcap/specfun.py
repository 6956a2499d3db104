"""Scalar special functions behind every probability computation in the package.

All entropic quantities are in base 2.
"""

import math

import numpy as np
from scipy import special as sp

__all__ = ["gaussian_q", "marcum_q1", "xlogx", "binary_entropy"]

_SQRT2 = math.sqrt(2.0)


def gaussian_q(x):
    """Tail probability of the standard normal, Q(x) = P(N(0,1) > x).

    Evaluated through erfc to stay accurate for large positive x.
    Accepts scalars or arrays.
    """
    return 0.5 * sp.erfc(np.asarray(x, dtype=float) / _SQRT2) if np.ndim(x) else 0.5 * sp.erfc(x / _SQRT2)


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum-Q function Q1(a, b).

    Survival function of a Rician envelope with noncentrality a and unit
    per-component scale: Q1(a, b) = P(X > b).

    Computed as a Poisson mixture of upper incomplete gamma tails,

        Q1(a, b) = sum_k  Pois(k; a^2/2) * Q_gamma(k + 1, b^2/2),

    summed over a window around the Poisson mode.  Every term is positive,
    so there is no cancellation even when b >> a.
    """
    if a < 0.0 or b < 0.0 or not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("marcum_q1 requires finite nonnegative arguments")
    if b == 0.0:
        return 1.0
    x = 0.5 * a * a
    y = 0.5 * b * b
    if x == 0.0:
        return math.exp(-y)
    # window wide enough that the discarded Poisson mass is < 1e-20
    half = int(10.0 * math.sqrt(x) + 25.0)
    k = np.arange(max(0, int(x) - half), int(x) + half + 1)
    log_w = k * math.log(x) - x - sp.gammaln(k + 1.0)
    val = float(np.dot(np.exp(log_w), sp.gammaincc(k + 1.0, y)))
    return min(1.0, max(0.0, val))


def xlogx(p: float) -> float:
    """p * log2(p) with the convention 0 * log2(0) = 0.

    Inputs are clamped into [0, 1] with a 1e-12 round-off allowance.
    """
    if p < -1e-12 or p > 1.0 + 1e-12:
        raise ValueError(f"probability out of range: {p}")
    p = min(1.0, max(0.0, p))
    if p == 0.0:
        return 0.0
    return p * math.log2(p)


def binary_entropy(p: float) -> float:
    """Binary entropy H_b(p) = -p log2 p - (1-p) log2 (1-p), in bits.

    Canonicalized to p <= 1/2 so that H(p) == H(1-p) bit-for-bit whenever
    the complement 1-p is exactly representable.
    """
    if p > 0.5:
        p = 1.0 - p
    return -xlogx(p) - xlogx(1.0 - p)
