"""Real-axis Laplace inversion by Post's formula.

The ``k``-th approximant of ``w(v, t)`` is

    (-1)^k / k! * (k/v)^(k+1) * d^k/dx^k image(x, t)  at  x = k/v.

The derivative comes from jet arithmetic.  Expanding in the scaled variable
``x = x0 (1 + h)`` with ``x0 = k/v`` makes the ``h^k`` coefficient equal to
``x0^k / k! * image^(k)(x0)``, so the factorial and the power fold into the
jet and the approximant is ``(-1)^k (k/v) * coefficient[k]`` without
overflow for ``k <= 64``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

from .jets import JetOverflowError, TaylorJet

K_CAP = 64


class InversionConvergenceError(ArithmeticError):
    """Extrapolated Post approximants did not settle within tolerance."""

    def __init__(self, message: str, best: float, ks: List[int], error: float):
        super().__init__(f"{message}: best={best!r}, error estimate={error:.3e}, k={ks}")
        self.best = best
        self.ks = ks
        self.error = error


@dataclass
class PostApproximant:
    k: int
    value: float
    richardson_value: Optional[float] = None


@dataclass
class InversionResult:
    value: float
    error: float
    ks: List[int]
    approximants: List[float] = field(default_factory=list)


def jet_derivative(family, x: float, t: float, order: int) -> float:
    """``order``-th derivative of ``family.image(., t)`` at ``x``."""
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    if t <= 0:
        raise ValueError("t must be positive")
    jet = family.image_jet(TaylorJet.variable(x, order), t)
    value = jet.derivative(order)
    if not math.isfinite(value):
        raise JetOverflowError(f"order-{order} derivative overflowed at x={x}; use a lower order")
    return value


def post_invert(family, v: float, t: float, k: int) -> PostApproximant:
    """The ``k``-th Post approximant of the density at ``v``."""
    if not (v > 0 and t > 0):
        raise ValueError("v and t must be positive")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > K_CAP:
        raise ValueError(f"k is capped at {K_CAP} in double precision")
    x0 = k / v
    jet = family.image_jet(TaylorJet.variable(x0, k, scale=x0), t)
    value = (-1) ** k * x0 * float(jet.coefficients[k])
    if not math.isfinite(value):
        raise JetOverflowError(f"non-finite Post approximant at v={v}, k={k}")
    return PostApproximant(k, value)


def gamma_post_approximant(b: float, c: float, t: float, v: float, k: int) -> float:
    """Closed form of the ``k``-th approximant for the Gamma family.

    ``(k/v)^(k+1)/k! * (bt)^(ct) Gamma(ct+k)/Gamma(ct) * (k/v + bt)^(-ct-k)``,
    evaluated in logs.
    """
    from scipy.special import gammaln

    a, r = c * t, b * t
    x = k / v
    if a == 0:
        return 0.0
    logval = (
        (k + 1) * math.log(x) - gammaln(k + 1) + a * math.log(r)
        + gammaln(a + k) - gammaln(a) - (a + k) * math.log(x + r)
    )
    return math.exp(logval)


def _k_ladder(k_max: int) -> List[int]:
    ks = [k_max]
    while len(ks) < 4 and ks[0] % 2 == 0 and ks[0] // 2 >= 1:
        ks.insert(0, ks[0] // 2)
    return ks


def invert_with_extrapolation(family, v: float, t: float, k_max: int = K_CAP, tol: float = 1e-3) -> InversionResult:
    """Richardson-extrapolated Post inversion (first-order error in ``1/k``).

    Approximants at ``k_max/8, k_max/4, k_max/2, k_max`` are combined
    pairwise as ``2 f(2k) - f(k)``; the spread of the last two combinations is
    the error estimate.  Raises :class:`InversionConvergenceError` when that
    estimate exceeds ``tol`` or exceeds the value itself.
    """
    if k_max < 4:
        raise ValueError("k_max must be at least 4")
    ks = _k_ladder(min(k_max, K_CAP))
    approx = [post_invert(family, v, t, k).value for k in ks]
    rich = [2.0 * f2 - f1 for f1, f2 in zip(approx, approx[1:])]
    value = rich[-1]
    error = abs(rich[-1] - rich[-2]) if len(rich) > 1 else abs(approx[-1] - approx[-2])
    if not math.isfinite(value) or error > tol or error > abs(value):
        raise InversionConvergenceError("Post inversion did not converge", value, ks, error)
    return InversionResult(value, error, ks, approx)
