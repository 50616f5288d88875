"""
European options two ways
=========================

Payoff against the Fourier density, and the same payoff averaged over
exact-transition paths.
"""

from smearing.families import GammaFamily
from smearing.pricing import OptionSpec, black_scholes, price_fourier, price_mc, put_call_gap
from smearing.sde import SimConfig

g = GammaFamily(100.0, 4.0)
sim = SimConfig(model="coupled_exact", b=100.0, c=4.0, t0=1.0, dt=0.02, n_paths=50_000, seed=11)

print(" K     fourier    mc         se        bs(vbar)")
for k in (0.9, 1.0, 1.1):
    opt = OptionSpec(k, 1.0, 1.0, 0.05)
    pm, se = price_mc(opt, sim, threads=4)
    print(f"{k:4.2f} {price_fourier(opt, g):10.6f} {pm:10.6f} {se:9.6f} {black_scholes(opt, g.mean):10.6f}")

print("put-call parity gap", put_call_gap(OptionSpec(1.0, 1.0, 1.0, 0.05), g))

## Large c concentrates the variance at vbar: Black-Scholes
opt = OptionSpec(1.0, 1.0, 1.0, 0.05)
for c in (4.0, 100.0, 1e4):
    print(c, price_fourier(opt, GammaFamily(c / 0.04, c)) - black_scholes(opt, 0.04))
