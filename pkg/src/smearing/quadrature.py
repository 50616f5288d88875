"""Adaptive quadrature helpers shared by the verifiers.

Thin wrappers over QUADPACK (``scipy.integrate.quad``) that raise on
non-convergence instead of warning, and a semi-infinite helper based on the
map ``v = s * u / (1 - u)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from scipy import integrate as _spi


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, value: float, abserr: float):
        super().__init__(f"{message} (value={value!r}, error estimate={abserr:.3e})")
        self.value = value
        self.abserr = abserr


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the adaptive Gauss-Kronrod / Clenshaw-Curtis rules.

    ``slack`` is how far past the requested tolerance a QUADPACK warning is
    still accepted (round-off warnings are common near 1e-13).
    """

    epsabs: float = 1e-13
    epsrel: float = 1e-10
    limit: int = 500
    slack: float = 100.0

    def target(self, value: float) -> float:
        return max(self.epsabs, self.epsrel * abs(value))


DEFAULT_QUAD = QuadratureConfig()


def _check(result, cfg: QuadratureConfig, what: str) -> Tuple[float, float]:
    value, abserr = result[0], result[1]
    if not math.isfinite(value):
        raise QuadratureError(f"{what}: non-finite integral", value, abserr)
    if len(result) > 3 and abserr > cfg.slack * cfg.target(value):
        raise QuadratureError(f"{what}: {result[3].splitlines()[0]}", value, abserr)
    return value, abserr


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    cfg: QuadratureConfig = DEFAULT_QUAD,
    *,
    alg: Optional[Tuple[float, float]] = None,
    points=None,
    what: str = "integral",
) -> Tuple[float, float]:
    """Integrate ``f`` over the finite interval ``[a, b]``.

    With ``alg=(alpha, beta)`` the integrand is ``f(x) (x-a)^alpha (b-x)^beta``
    and the algebraic endpoint factors are integrated exactly (QUADPACK qaws),
    which is how Gamma densities with shape below one are handled.
    Returns ``(value, abserr)``.
    """
    kw = dict(epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=cfg.limit, full_output=1)
    if b <= a:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        if alg is not None:
            res = _spi.quad(f, a, b, weight="alg", wvar=alg, **kw)
        else:
            res = _spi.quad(f, a, b, points=points, **kw)
    return _check(res, cfg, what)


def integrate_semi_infinite(
    f: Callable[[float], float],
    cfg: QuadratureConfig = DEFAULT_QUAD,
    *,
    scale: float = 1.0,
    what: str = "integral",
) -> Tuple[float, float]:
    """Integrate ``f`` over ``(0, inf)`` using ``v = scale * u / (1 - u)``.

    ``scale`` should be a characteristic size of the integrand's support (for
    a density, its mean). ``f`` must return 0 rather than overflow for huge v.
    """

    def g(u):
        w = 1.0 - u
        return f(scale * u / w) * scale / (w * w)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        res = _spi.quad(
            g, 0.0, 1.0, epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=cfg.limit,
            full_output=1,
        )
    return _check(res, cfg, what)
