"""
Special functions used by the closed-form bounds
"""

import math

from scipy import integrate

from errors import DivergenceError

UPSILON_ABS_TOL = 1e-10
AGM_REL_TOL = 1e-15


def _upsilon_integrand(x: float, a: float) -> float:
    return (a - math.cos(x)) / math.sqrt(1.0 - 2.0 * a * math.cos(x) + a * a)


def upsilon(alpha: float) -> float:
    """Mean over a full turn of (a - cos x) / sqrt(1 - 2 a cos x + a^2).

    The integrand stays bounded at a = 1 where it reduces to |sin(x/2)|.
    Tends to 0 at a = 0 and to 1 as a grows.
    """
    if alpha < 0:
        raise ValueError(f"upsilon is defined for alpha >= 0, got {alpha}")
    if alpha == 0:
        return 0.0
    # the kink at x = 0 (alpha = 1) sits on the interval ends
    value, _ = integrate.quad(
        _upsilon_integrand, 0.0, 2.0 * math.pi, args=(float(alpha),),
        epsabs=UPSILON_ABS_TOL, epsrel=1e-12, limit=200,
    )
    return value / (2.0 * math.pi)


def elliptic_k(k: float) -> float:
    """Complete elliptic integral of the first kind K(k) with modulus k, by the AGM"""
    if not 0.0 <= k < 1.0:
        raise DivergenceError(f"K(k) diverges for modulus k = {k}")
    a, b = 1.0, math.sqrt(1.0 - k * k)
    for _ in range(64):
        if abs(a - b) <= AGM_REL_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def elliptic_k_quadrature(k: float) -> float:
    """Direct quadrature of K(k), the reference the AGM is checked against"""
    value, _ = integrate.quad(
        lambda t: 1.0 / math.sqrt(1.0 - (k * math.sin(t)) ** 2), 0.0, math.pi / 2.0,
        epsabs=1e-13, epsrel=1e-13, limit=200,
    )
    return value


def mean_sin2_over_distance2(alpha: float) -> float:
    """Mean over a turn of sin^2 x / (1 - 2 a cos x + a^2): 1/2 inside the unit circle, 1/(2a^2) outside"""
    if alpha < 1.0:
        return 0.5
    return 0.5 / (alpha * alpha)


__all__ = ["upsilon", "elliptic_k", "elliptic_k_quadrature", "mean_sin2_over_distance2"]
