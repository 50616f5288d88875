"""
The Gamma smearing family
=========================

Laplace image, functional equation, and what goes wrong without time
dependence in the mixing weights.
"""

import numpy as np

from smearing.families import (
    GammaFamily,
    StaticFamily,
    complete_monotonicity_violation,
    convolution_identity_residual,
    functional_equation_residual,
    residual_grid,
)

g = GammaFamily(b=1.0, c=2.0)
print(g.label, "mean variance", g.mean)

## The image exp(-t F(xi/t)) at a few points
for t in (0.5, 1.0, 2.0):
    print(t, [round(float(g.image(xi, t)), 6) for xi in (0.1, 1.0, 10.0)])

## Composition in t: image(xi,t) image(a xi, a t) = image((1+a) xi, (1+a) t)
worst = max(abs(functional_equation_residual(g, *p)) for p in residual_grid())
print("functional equation, worst over 125 points:", worst)

## Same weights frozen in time do not compose
static = StaticFamily.gamma(1.0, 2.0)
worst_static = max(abs(functional_equation_residual(static, *p)) for p in residual_grid())
print("static mixture, worst:", worst_static)

## The convolution form, by quadrature with the endpoint power laws as weights
print("convolution identity at (z,t,a)=(1,1,2):", convolution_identity_residual(g, 1.0, 1.0, 2.0))

## Positivity: an image must be completely monotone in xi
print("gamma violation:", complete_monotonicity_violation(g, 1.0, np.geomspace(0.1, 10, 5)))
print("exp(-xi^2) violation:", complete_monotonicity_violation(StaticFamily(lambda x: x * x), 1.0, [1.0]))
