"""Smearing-distribution families and their Chapman-Kolmogorov checks.

A family preserving the Chapman-Kolmogorov property is fully described by an
exponent function ``F`` with ``F(0) = 0``; its Laplace image in the variance
variable is

    image(xi, t) = exp(-t * F(xi / t))          (t > 0)
    image(xi, 0) = kappa ** xi

:class:`GammaFamily` is the closed-form member ``F(x) = c log(1 + x / b)``
whose density is a Gamma law with shape ``c t`` and rate ``b t``.
:class:`StaticFamily` deliberately breaks the time scaling (weights that do
not depend on ``t``) and serves as the negative control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special, stats

from . import jets
from .jets import TaylorJet
from .quadrature import DEFAULT_QUAD, QuadratureConfig, integrate


class DomainError(ValueError):
    """The exponent function is undefined at the requested argument."""


class DegenerateDensityError(ValueError):
    """The density is the point mass ``delta+(v + log kappa)``, not a function."""


@dataclass(frozen=True)
class PointMass:
    """Tagged degenerate density: all mass at ``location``."""

    location: float


class SmearingFamily:
    """Base class for families defined by an exponent ``F``.

    Subclasses provide :meth:`F`; ``kappa`` fixes the ``t = 0`` branch.
    ``analytic`` marks families whose exponent may be continued to complex
    arguments (closed forms built from numpy ufuncs).
    """

    kappa: float = 1.0
    label: str = "family"
    analytic: bool = False

    def F(self, x):
        raise NotImplementedError

    def G(self, x):
        return jets.exp(-self.F(x))

    def image(self, xi, t):
        """Laplace image ``[G(xi/t)]**t``; ``kappa**xi`` at ``t = 0``."""
        if np.iscomplexobj(xi) and not self.analytic:
            raise DomainError(f"{self.label}: no complex continuation for this family")
        if np.ndim(t) == 0:
            t = float(t)
            if t < 0:
                raise ValueError("t must be non-negative")
            if t == 0:
                return self.kappa ** xi
        else:
            t = np.asarray(t, dtype=float)
            if np.any(t <= 0):
                raise ValueError("array t must be positive")
        with np.errstate(divide="ignore", invalid="ignore"):
            f = self.F(xi / t)
        if not np.all(np.isfinite(f)):
            raise DomainError(f"{self.label}: exponent undefined at xi/t = {xi / t!r}")
        return np.exp(-t * f)

    def image_jet(self, x: TaylorJet, t: float) -> TaylorJet:
        if t <= 0:
            raise ValueError("jets of the image need t > 0")
        return jets.exp(-t * self.F(x / t))

    def time_zero_density(self) -> PointMass:
        return PointMass(-math.log(self.kappa))


@dataclass(frozen=True)
class CustomFamily(SmearingFamily):
    """Family from a user-supplied exponent callable (jet-aware)."""

    exponent: Callable = field(compare=False)
    kappa: float = 1.0
    label: str = "custom"
    expression: Optional[str] = None

    def F(self, x):
        return self.exponent(x)


@dataclass(frozen=True)
class GammaFamily(SmearingFamily):
    """``F(x) = c log(1 + x/b)``: Gamma densities of shape ``c t``, rate ``b t``."""

    b: float
    c: float

    analytic = True
    kappa = 1.0

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"Gamma rate scale b must be positive, got {self.b}")
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError(f"Gamma shape scale c must be non-negative, got {self.c}")

    @property
    def label(self) -> str:
        return f"gamma(b={self.b:g}, c={self.c:g})"

    @property
    def mean(self) -> float:
        return self.c / self.b

    def F(self, x):
        if isinstance(x, TaylorJet):
            return self.c * jets.log1p(x / self.b)
        arg = 1.0 + np.asarray(x) / self.b
        if np.any((np.real(arg) <= 0) & (np.imag(arg) == 0)):
            raise DomainError(f"{self.label}: 1 + x/b <= 0 is outside the domain")
        return self.c * np.log1p(np.asarray(x) / self.b)

    def shape(self, t: float) -> float:
        return self.c * t

    def rate(self, t: float) -> float:
        return self.b * t

    def gamma_params(self, t: float) -> Tuple[float, float]:
        """``(shape, rate)`` of the density at ``t``."""
        return self._require_shape(t), self.b * t

    def variance(self, t: float) -> float:
        return self.c / (self.b * self.b * t)

    def image_derivative(self, x: float, t: float, order: int) -> float:
        """Closed-form ``order``-th derivative of the image in ``x``."""
        a, r = self.c * t, self.b * t
        if a == 0:
            return 1.0 if order == 0 else 0.0
        logmag = a * math.log(r) + special.gammaln(a + order) - special.gammaln(a) - (a + order) * math.log(x + r)
        return (-1) ** order * math.exp(logmag)

    def _require_shape(self, t: float) -> float:
        if t <= 0:
            raise ValueError("density needs t > 0")
        a = self.c * t
        if a == 0:
            raise DegenerateDensityError(
                f"{self.label}: c*t = 0, the density is the point mass at v = 0"
            )
        return a

    def log_density(self, v, t: float):
        a = self._require_shape(t)
        r = self.b * t
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            return a * math.log(r) + (a - 1.0) * np.log(v) - r * v - special.gammaln(a)

    def density(self, v, t: float):
        """``(bt)^{ct} v^{ct-1} e^{-btv} / Gamma(ct)`` for ``v > 0``."""
        self._require_shape(t)
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(self.log_density(v, t))
        out = np.where(v > 0, out, 0.0)
        return out if out.ndim else float(out)

    def density_parts(self, t: float) -> Tuple[float, Callable[[float], float]]:
        """Split ``density(v) = v**power * regular(v)`` for weighted quadrature."""
        a = self._require_shape(t)
        r = self.b * t
        lognorm = a * math.log(r) - special.gammaln(a)
        return a - 1.0, lambda v: math.exp(lognorm - r * v)

    def distribution(self, t: float):
        a = self._require_shape(t)
        return stats.gamma(a, scale=1.0 / (self.b * t))

    def quantile(self, q: float, t: float) -> float:
        return float(self.distribution(t).ppf(q))

    def upper_quantile(self, tail: float, t: float) -> float:
        """Point beyond which the mass is ``tail`` (accurate for tiny tails)."""
        return float(self.distribution(t).isf(tail))


@dataclass(frozen=True)
class DeltaFamily(SmearingFamily):
    """No smearing: all weight at ``v0`` (``F(x) = v0 x``)."""

    v0: float

    analytic = True

    def __post_init__(self):
        if not self.v0 > 0:
            raise ValueError("v0 must be positive")

    @property
    def kappa(self) -> float:
        return math.exp(-self.v0)

    @property
    def label(self) -> str:
        return f"delta(v0={self.v0:g})"

    @property
    def mean(self) -> float:
        return self.v0

    def F(self, x):
        return self.v0 * x


@dataclass(frozen=True)
class StaticFamily:
    """Time-independent mixing weights, image ``exp(-F(xi))`` for every ``t``.

    This is the ad-hoc smearing that does *not* preserve the
    Chapman-Kolmogorov property; it exists so the residual checkers can
    demonstrate violation.
    """

    exponent: Callable = field(compare=False)
    label: str = "static"
    weights: Optional[GammaFamily] = None
    analytic: bool = False

    @classmethod
    def gamma(cls, b: float, c: float) -> "StaticFamily":
        """Gamma(shape c, rate b) weights regardless of ``t``."""
        g = GammaFamily(b, c)
        return cls(lambda x: g.F(x), label=f"static-gamma(b={b:g}, c={c:g})", weights=g, analytic=True)

    def F(self, x):
        return self.exponent(x)

    def image(self, xi, t):
        if np.iscomplexobj(xi) and not self.analytic:
            raise DomainError(f"{self.label}: no complex continuation for this family")
        return jets.exp(-self.F(xi))

    def image_jet(self, x: TaylorJet, t: float) -> TaylorJet:
        return jets.exp(-self.F(x))

    def _weights(self) -> GammaFamily:
        if self.weights is None:
            raise DegenerateDensityError(f"{self.label}: no closed-form density")
        return self.weights

    @property
    def mean(self) -> float:
        return self._weights().mean

    def density(self, v, t: float):
        return self._weights().density(v, 1.0)

    def gamma_params(self, t: float):
        return self._weights().gamma_params(1.0)

    def density_parts(self, t: float):
        return self._weights().density_parts(1.0)

    def upper_quantile(self, tail: float, t: float) -> float:
        return self._weights().upper_quantile(tail, 1.0)


@dataclass(frozen=True)
class CkePair:
    """The pair ``(a, b_cke)`` of the convolution identity, ``1 + 1/a = 1/b_cke``."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")

    @property
    def b_cke(self) -> float:
        return self.a / (self.a + 1.0)


# -- verifiers -------------------------------------------------------------

def image(family, xi, t):
    return family.image(xi, t)


def density(family: GammaFamily, v, t: float):
    return family.density(v, t)


def functional_equation_residual(family, xi: float, t: float, alpha: float) -> float:
    """``image(xi,t) image(alpha xi, alpha t) - image(xi + alpha xi, t + alpha t)``."""
    if not (xi > 0 and t > 0 and alpha > 0):
        raise ValueError("xi, t and alpha must be positive")
    lhs = family.image(xi, t) * family.image(alpha * xi, alpha * t)
    return float(lhs - family.image(xi + alpha * xi, t + alpha * t))


def residual_grid(n: int = 5):
    """The log-spaced ``(xi, t, alpha)`` sweep used by the family checks."""
    xis = np.geomspace(0.1, 10.0, n)
    ts = np.geomspace(0.1, 5.0, n)
    alphas = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    return [(float(x), float(t), float(a)) for x in xis for t in ts for a in alphas]


def convolution_grid():
    """The 27 ``(z, t, a)`` points of the convolution-identity sweep."""
    vals = (0.5, 1.0, 2.0)
    return [(z, t, a) for z in vals for t in vals for a in vals]


def convolution_identity_residual(
    family: GammaFamily,
    z: float,
    t: float,
    a: float,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Residual of the convolution form of the Chapman-Kolmogorov condition.

    ``int_0^z w(z',t) a w(a(z-z'), t/a) dz' - b w(b z, t/b)`` with
    ``b = a/(a+1)``.  The endpoint power laws of both densities are passed to
    the algebraic-weight rule so shapes below one are integrated accurately.
    """
    if not (z > 0 and t > 0 and a > 0):
        raise ValueError("z, t and a must be positive")
    b_cke = CkePair(a).b_cke
    p1, reg1 = family.density_parts(t)
    p2, reg2 = family.density_parts(t / a)
    # a * w(a u, t/a) = a**(p2+1) * u**p2 * reg2(a u)
    pref = a ** (p2 + 1.0)

    def f(zp):
        return reg1(zp) * pref * reg2(a * (z - zp))

    lhs, _ = integrate(f, 0.0, z, quad, alg=(p1, p2), what="convolution identity")
    rhs = b_cke * family.density(b_cke * z, t / b_cke)
    return lhs - rhs


def is_non_increasing(family, t: float, xis) -> bool:
    vals = np.array([family.image(float(x), t) for x in np.sort(xis)])
    return bool(np.all(np.diff(vals) <= 1e-15))


def complete_monotonicity_violation(family, t: float, xis, max_order: int = 4, h: Optional[float] = None) -> float:
    """Largest violation of ``(-1)^n Delta_h^n image >= 0`` for ``n <= max_order``.

    Returns 0.0 when the forward differences alternate in sign as a Laplace
    image of a positive measure must; a positive number measures the worst
    offending difference, scaled by ``h**n``.
    """
    worst = 0.0
    for x in xis:
        step = h if h is not None else 0.05 * max(float(x), 0.02)
        vals = np.array([family.image(float(x) + j * step, t) for j in range(max_order + 1)])
        for n in range(1, max_order + 1):
            d = np.diff(vals, n)[0] * (-1) ** n / step ** n
            scale = abs(vals[0]) * 1e-7 / step ** n
            if d < -scale:
                worst = max(worst, -d)
    return worst


def density_normalization(family: GammaFamily, t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    p, reg = family.density_parts(t)
    mean = family.mean if family.mean > 0 else 1.0
    cut = family.upper_quantile(1e-14, t) * 4.0
    head, _ = integrate(reg, 0.0, mean, quad, alg=(p, 0.0))
    tail, _ = integrate(lambda v: family.density(v, t), mean, cut, quad)
    return head + tail


def density_mean(family: GammaFamily, t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    p, reg = family.density_parts(t)
    mean = family.mean
    cut = family.upper_quantile(1e-14, t) * 4.0
    head, _ = integrate(lambda v: v * reg(v), 0.0, mean, quad, alg=(p, 0.0))
    tail, _ = integrate(lambda v: v * family.density(v, t), mean, cut, quad)
    return head + tail
