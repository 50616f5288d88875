"""
Recovering the smearing density from its image
==============================================

Post's formula needs k-th derivatives of the image; Taylor jets supply them
exactly and a Richardson step removes the leading 1/k error.
"""

import numpy as np

from smearing.families import GammaFamily
from smearing.inversion import InversionConvergenceError, invert_with_extrapolation, post_invert

g = GammaFamily(1.0, 2.0)
vs = np.linspace(0.05, 10.0, 100)
exact = g.density(vs, 1.0)

for k in (8, 16, 32, 64):
    approx = np.array([post_invert(g, v, 1.0, k).value for v in vs])
    print(f"k={k:2d}  sup error {np.max(np.abs(approx - exact)):.2e}")

extrap = np.array([invert_with_extrapolation(g, v, 1.0).value for v in vs])
print("extrapolated sup error", np.max(np.abs(extrap - exact)))

## Far in the tail of a small-shape density the ladder stops converging
try:
    invert_with_extrapolation(GammaFamily(1.0, 0.5), 50.0, 1.0, tol=1e-12)
except InversionConvergenceError as exc:
    print("tail:", exc, "best", exc.best, "error", exc.error)
