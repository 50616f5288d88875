"""
The smeared log-price propagator
================================

Fourier inversion of exp(-t H2) image(t H1, t) against a direct mixture of
Gaussian kernels over the variance density.
"""

import numpy as np

from smearing.families import GammaFamily, StaticFamily
from smearing.propagators import (
    GridSpec,
    HamiltonianSpec,
    cke_residual,
    density_via_fourier,
    smeared_density_quadrature,
)

g = GammaFamily(1.0, 2.0)
spec = HamiltonianSpec(r=0.05)
grid = GridSpec.default(g, 1.0, n=1024)

fourier = density_via_fourier(grid, 1.0, g, spec)
mixture = smeared_density_quadrature(grid, 1.0, g, spec)
print("sup |fourier - mixture|", np.max(np.abs(fourier.values - mixture.values)))
print("mass", fourier.integral(), " E[exp(x)]", fourier.expectation(np.exp), " exp(rt)", np.exp(0.05))
print("excess kurtosis", fourier.excess_kurtosis())

## Passing through an intermediate time
for t_c in (0.25, 0.5, 0.75):
    print(t_c, cke_residual(0.0, t_c, 1.0, g, spec), cke_residual(0.0, t_c, 1.0, StaticFamily.gamma(1.0, 2.0), spec))

fourier.to_csv("propagator_t1.csv")
