"""Markov kernel of the variance process and its Kramers-Moyal coefficients.

A CKE-preserving smearing density propagates itself in ``t`` with the kernel

    P(z, t | z', t') = t/(t-t') * theta(t z - t' z') * w((t z - t' z')/(t - t'), t - t')

The short-time moments of this kernel give the drift and diffusion of the
variance process; for the Gamma family they are ``(vbar - v)/t`` and
``c / (2 b^2 t^2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .families import GammaFamily
from .propagators import HamiltonianSpec, kernel_density_v
from .quadrature import DEFAULT_QUAD, QuadratureConfig, integrate

DEFAULT_TAU_FRACTIONS = (0.08, 0.04, 0.02, 0.01)
MOMENT_TAIL = 1e-12


class ExtrapolationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class OmegaKernel:
    family: GammaFamily

    def __call__(self, z, t, z_prev, t_prev):
        return omega_kernel(z, t, z_prev, t_prev, self.family)


@dataclass
class KmEstimate:
    n: int
    v: float
    t: float
    value: float
    tau_sequence: List[float]
    extrapolation_error: float
    raw: List[float] = field(default_factory=list)
    converged: bool = True


def omega_kernel(z: float, t: float, z_prev: float, t_prev: float, family: GammaFamily) -> float:
    """Transition density of the variance process from ``(z_prev, t_prev)`` to ``(z, t)``.

    On the support boundary ``t z = t' z'`` the value is the right limit of
    the density when finite and 0 when it diverges (shape below one).
    """
    if not t > t_prev > 0:
        raise ValueError("need t > t_prev > 0")
    tau = t - t_prev
    u = (t * z - t_prev * z_prev) / tau
    if u < 0:
        return 0.0
    if u == 0:
        shape, rate = family.gamma_params(tau)
        return (t / tau) * rate if shape == 1.0 else 0.0
    return (t / tau) * family.density(u, tau)


def kernel_normalization(z_prev: float, t_prev: float, t: float, family: GammaFamily,
                         quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    return kernel_moment(0, z_prev, t_prev, t, family, quad, center=0.0)


def kernel_moment(n: int, z_prev: float, t_prev: float, t: float, family: GammaFamily,
                  quad: QuadratureConfig = DEFAULT_QUAD, center: Optional[float] = None) -> float:
    """``int (z - center)^n P(z, t | z_prev, t_prev) dz`` (center defaults to z_prev).

    Integrated over the kernel's support up to its ``1 - 1e-12`` quantile; the
    power-law factor at the support boundary goes to the algebraic weight.
    """
    if not t > t_prev > 0:
        raise ValueError("need t > t_prev > 0")
    center = z_prev if center is None else center
    tau = t - t_prev
    power, regular = family.density_parts(tau)
    z_lo = t_prev * z_prev / t
    u_hi = family.upper_quantile(MOMENT_TAIL, tau)
    z_hi = (t_prev * z_prev + tau * u_hi) / t
    # kernel = (t/tau) * u^power * regular(u),  u = (t/tau) (z - z_lo)
    pref = (t / tau) ** (power + 1.0)

    def f(z):
        return (z - center) ** n * pref * regular((t / tau) * (z - z_lo))

    value, _ = integrate(f, z_lo, z_hi, quad, alg=(power, 0.0), what=f"kernel moment n={n}")
    return value


def smearing_consistency_residual(z: float, t: float, t_prev: float, family: GammaFamily,
                                  quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``w(z, t) - int_0^inf w(z', t') P(z, t | z', t') dz'``."""
    if not t > t_prev > 0:
        raise ValueError("need t > t_prev > 0")
    if z <= 0:
        raise ValueError("z must be positive")
    tau = t - t_prev
    p_prev, reg_prev = family.density_parts(t_prev)
    p_tau, reg_tau = family.density_parts(tau)
    z_hi = t * z / t_prev
    # u = (t z - t' z')/tau = (t'/tau) (z_hi - z')
    pref = (t / tau) * (t_prev / tau) ** p_tau

    def f(zp):
        return reg_prev(zp) * pref * reg_tau((t_prev / tau) * (z_hi - zp))

    integral, _ = integrate(f, 0.0, z_hi, quad, alg=(p_prev, p_tau), what="consistency integral")
    return family.density(z, t) - integral


def _richardson(taus: Sequence[float], values: Sequence[float]) -> Tuple[float, float, bool]:
    """Linear-in-tau extrapolation to 0 over successive pairs."""
    rich = []
    for (t1, f1), (t2, f2) in zip(zip(taus, values), zip(taus[1:], values[1:])):
        rich.append((t1 * f2 - t2 * f1) / (t1 - t2))
    value = rich[-1]
    err = abs(rich[-1] - rich[-2]) if len(rich) > 1 else abs(values[-1] - values[-2])
    # successive extrapolants must contract, unless already at quadrature noise
    noise = 1e-6 * max(1.0, max(abs(x) for x in values))
    converged = len(rich) < 3 or err <= max(abs(rich[-2] - rich[-3]), noise)
    return value, err, converged


def km_coefficient_estimate(n: int, v: float, t: float, family: GammaFamily,
                            tau_sequence: Optional[Sequence[float]] = None,
                            quad: QuadratureConfig = DEFAULT_QUAD) -> KmEstimate:
    """``lim_{tau->0} 1/(n! tau) int (x - v)^n P(x, t+tau | v, t) dx`` by extrapolation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (v > 0 and t > 0):
        raise ValueError("v and t must be positive")
    taus = list(tau_sequence) if tau_sequence is not None else [f * t for f in DEFAULT_TAU_FRACTIONS]
    if len(taus) < 4 or any(b >= a for a, b in zip(taus, taus[1:])) or taus[-1] <= 0:
        raise ValueError("tau_sequence must hold >= 4 strictly decreasing positive values")
    raw = [kernel_moment(n, v, t, t + tau, family, quad) / (math.factorial(n) * tau) for tau in taus]
    value, err, converged = _richardson(taus, raw)
    if not converged:
        warnings.warn(f"K^({n}) extrapolation diverging at v={v}, t={t}", ExtrapolationWarning, stacklevel=2)
    return KmEstimate(n, v, t, value, taus, err, raw, converged)


def km_analytic_gamma(n: int, v: float, t: float, family: GammaFamily) -> float:
    """Closed-form drift (n=1) and diffusion (n=2) of the Gamma variance process."""
    if n == 1:
        return (family.mean - v) / t
    if n == 2:
        return family.c / (2.0 * family.b ** 2 * t ** 2)
    raise ValueError(f"closed form known only for n = 1, 2 (got {n})")


def x_process_coefficients(v: float, spec: HamiltonianSpec) -> Tuple[float, float]:
    """Drift ``r - v/2`` and diffusion ``v/2`` of the log-price at fixed variance."""
    if not v > 0:
        raise ValueError("v must be positive")
    return spec.r - 0.5 * v, 0.5 * v


def x_km_estimate(n: int, v: float, spec: HamiltonianSpec, tau_sequence=(0.08, 0.04, 0.02, 0.01),
                  quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Short-time moment estimate of the log-price coefficients from the Gaussian kernel."""
    raw = []
    for tau in tau_sequence:
        sd = math.sqrt(v * tau)
        mu = (spec.r - 0.5 * v) * tau
        m, _ = integrate(lambda y: y ** n * float(kernel_density_v(y, tau, v, spec)),
                         mu - 12 * sd, mu + 12 * sd, quad)
        raw.append(m / (math.factorial(n) * tau))
    return _richardson(list(tau_sequence), raw)[0]
