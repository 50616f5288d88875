"""
Drift and diffusion of the variance process
===========================================

Short-time moments of the transition kernel, extrapolated to tau -> 0.
"""

from smearing.families import GammaFamily
from smearing.km import km_analytic_gamma, km_coefficient_estimate

g = GammaFamily(1.0, 2.0)
print(" v    t    K1 est     K1 exact   K2 est     K2 exact")
for t in (0.5, 1.0, 2.0):
    for v in (1.0, 2.0, 4.0):
        k1 = km_coefficient_estimate(1, v, t, g)
        k2 = km_coefficient_estimate(2, v, t, g)
        print(f"{v:4.1f} {t:4.1f} {k1.value:10.6f} {km_analytic_gamma(1, v, t, g):10.6f} "
              f"{k2.value:10.6f} {km_analytic_gamma(2, v, t, g):10.6f}")

## Third coefficient: nonzero, so the two-term SDE is a truncation
print("K3 at v=1, t=1:", km_coefficient_estimate(3, 1.0, 1.0, g).value)
