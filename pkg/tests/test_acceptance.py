"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

Each criterion prints one ``PASS``/``FAIL`` line.  Run with pytest or as a
script (``python tests/test_acceptance.py``).
"""

from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import dataclass

import numpy as np
import pytest
from scipy import stats

from smearing.families import (
    GammaFamily,
    StaticFamily,
    convolution_grid,
    convolution_identity_residual,
    functional_equation_residual,
    residual_grid,
)
from smearing.inversion import invert_with_extrapolation, post_invert
from smearing.km import km_analytic_gamma, km_coefficient_estimate
from smearing.pricing import OptionSpec, price_fourier, price_mc, put_call_gap
from smearing.propagators import (
    GridSpec,
    HamiltonianSpec,
    cke_residual,
    density_via_fourier,
    smeared_density_quadrature,
)
from smearing.sde import (
    SimConfig,
    heston_correspondence_test,
    ks_threshold,
    marginal_v_test,
    martingale_test,
    simulate,
)

N_MC = 100_000


@dataclass
class Verdict:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    @property
    def ok(self) -> bool:
        return self.passed and self.seconds < self.budget

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s / {self.budget:.0f}s)"


def _timed(number, name, budget, fn) -> Verdict:
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        passed, detail = fn()
    return Verdict(number, name, bool(passed), detail, time.perf_counter() - start, budget)


# -- criteria -------------------------------------------------------------------

def functional_equation():
    grid = residual_grid()
    gamma = max(abs(functional_equation_residual(GammaFamily(1.0, 2.0), *p)) for p in grid)
    square = StaticFamily(lambda x: x * x, label="x^2")
    control = max(abs(functional_equation_residual(square, *p)) for p in grid)
    return gamma < 1e-12 and control > 1e-2, f"gamma max {gamma:.1e} < 1e-12, x^2 control max {control:.2f} > 1e-2"


def convolution_identity():
    fam = GammaFamily(1.0, 2.0)
    worst = max(abs(convolution_identity_residual(fam, *p)) for p in convolution_grid())
    return worst < 1e-7, f"max residual {worst:.1e} < 1e-7 over {len(convolution_grid())} points"


def post_inversion():
    fam = GammaFamily(1.0, 2.0)
    vs = np.linspace(0.05, 10.0, 200)
    exact = fam.density(vs, 1.0)
    sups = [max(abs(post_invert(fam, float(v), 1.0, k).value - e) for v, e in zip(vs, exact))
            for k in (8, 16, 32, 64)]
    extrap = max(abs(invert_with_extrapolation(fam, float(v), 1.0).value - e) for v, e in zip(vs, exact))
    decreasing = all(b < a for a, b in zip(sups, sups[1:]))
    sup_text = ", ".join(f"{s:.1e}" for s in sups)
    return decreasing and extrap < 1e-3, f"sup errors k=8..64 [{sup_text}], extrapolated {extrap:.1e} < 1e-3"


def chapman_kolmogorov():
    spec = HamiltonianSpec(0.05)
    splits = [(0.0, t_c, 1.0) for t_c in (0.25, 0.5, 0.75)]
    smeared = [cke_residual(*s, GammaFamily(1.0, 2.0), spec) for s in splits]
    control = [cke_residual(*s, StaticFamily.gamma(1.0, 2.0), spec) for s in splits]
    ok = max(smeared) < 1e-6 and min(control) > 1e-2
    return ok, f"smeared max {max(smeared):.1e} < 1e-6, static control min {min(control):.3f} > 1e-2"


def hamiltonian_equivalence():
    worst = 0.0
    cases = list(itertools.product(((1.0, 2.0), (4.0, 2.0), (2.0, 4.0)), (0.0, 0.05), (1.0, 2.0)))
    for (b, c), r, t in cases:
        fam, spec = GammaFamily(b, c), HamiltonianSpec(r)
        grid = GridSpec.default(fam, t, n=1024)
        f = density_via_fourier(grid, t, fam, spec).values
        q = smeared_density_quadrature(grid, t, fam, spec).values
        worst = max(worst, float(np.max(np.abs(f - q))))
    return worst < 1e-8, f"sup |fourier - quadrature| {worst:.1e} < 1e-8 over {len(cases)} cases"


def kramers_moyal():
    fam = GammaFamily(1.0, 2.0)
    worst1 = worst2 = spread = 0.0
    for t in (0.5, 1.0, 2.0):
        k2 = []
        for v in (1.0, 2.0, 4.0):
            a1, a2 = km_analytic_gamma(1, v, t, fam), km_analytic_gamma(2, v, t, fam)
            e1 = km_coefficient_estimate(1, v, t, fam).value
            e2 = km_coefficient_estimate(2, v, t, fam).value
            # the drift vanishes at v = vbar; errors there are measured against vbar / t
            worst1 = max(worst1, abs(e1 - a1) / max(abs(a1), fam.mean / t))
            worst2 = max(worst2, abs(e2 - a2) / abs(a2))
            k2.append(e2)
        spread = max(spread, (max(k2) - min(k2)) / float(np.mean(k2)))
    ok = worst1 < 1e-2 and worst2 < 1e-2 and spread < 1e-2
    return ok, f"K1 rel {worst1:.1e}, K2 rel {worst2:.1e}, K2 v-spread {spread:.1e} (all < 1e-2)"


def _marginal_samples(model: str):
    out = []
    for seed in range(1, 6):
        cfg = SimConfig(model=model, b=1.0, c=2.0, t0=0.5, t_end=1.5, dt=0.01, n_paths=N_MC, seed=seed)
        out.append(simulate(cfg, threads=4, save_every=50))
    return out


def monte_carlo_marginal():
    results = [marginal_v_test(ens, 1.0) for ens in _marginal_samples("coupled_gamma")]
    ks = ", ".join(f"{r.ks_statistic:.4f}" for r in results)
    return all(r.passed for r in results), f"coupled_gamma KS [{ks}] vs {results[0].threshold:.4f}"


def monte_carlo_marginal_exact():
    """Exact-transition sampler: per-seed KS reported, pooled KS gated.

    A single pooled test keeps the false-alarm rate at ~1%; five separate
    1% gates would reject an exact sampler about one run in twenty.
    """
    ensembles = _marginal_samples("coupled_exact")
    per_seed = [marginal_v_test(ens, 1.0).ks_statistic for ens in ensembles]
    pooled = np.concatenate([ens.v_paths[:, ens.time_index(1.0)] for ens in ensembles])
    d = float(stats.kstest(pooled, stats.gamma(2.0, scale=1.0).cdf).statistic)
    thr = ks_threshold(pooled.size)
    seeds = ", ".join(f"{k:.4f}" for k in per_seed)
    return d < thr, f"coupled_exact pooled KS {d:.4f} < {thr:.4f} (per seed [{seeds}])"


def martingale():
    results = []
    for r in (0.0, 0.05):
        common = dict(t_end=1.5, dt=0.01, n_paths=N_MC, seed=8)
        cfgs = [
            SimConfig(model="coupled_exact", b=10.0, c=2.0, r=r, t0=0.5, **common),
            SimConfig(model="coupled_gamma", b=10.0, c=2.0, r=r, t0=0.5, **common),
            SimConfig.heston_matched(10.0, 2.0, r, 0.5, **common),
        ]
        for cfg in cfgs:
            m = martingale_test(simulate(cfg, threads=4, save_every=10 ** 6))
            results.append((cfg.model, r, (m.ratio - 1.0) / m.std_err, m.passed))
    z = ", ".join(f"{mdl}/r={r:g}: {zz:+.2f}" for mdl, r, zz, _ in results)
    return all(p for *_, p in results), f"(ratio-1)/SE [{z}] within 3"


def heston_correspondence():
    near = heston_correspondence_test(1.0, 2.0, 0.0, 10.0, N_MC, seed=7, threads=4)
    far = heston_correspondence_test(1.0, 2.0, 0.0, 40.0, N_MC, seed=7, threads=4)
    ok = far.ks_statistic < near.ks_statistic
    return ok, f"KS t_ref=10: {near.ks_statistic:.2e} > t_ref=40: {far.ks_statistic:.2e}"


def pricing_cross_oracle():
    fam = GammaFamily(100.0, 4.0)
    worst_z = worst_parity = 0.0
    for T in (0.5, 1.0, 2.0):
        sim = SimConfig(model="coupled_exact", b=100.0, c=4.0, t0=1.0, dt=T / 50, n_paths=N_MC, seed=11)
        for k in (0.9, 1.0, 1.1):
            opt = OptionSpec(k, T, 1.0, 0.05)
            pf = price_fourier(opt, fam)
            pm, se = price_mc(opt, sim, threads=4)
            worst_z = max(worst_z, abs(pm - pf) / se)
            worst_parity = max(worst_parity, abs(put_call_gap(opt, fam)))
    ok = worst_z < 3.0 and worst_parity < 1e-6
    return ok, f"max |mc - fourier|/SE {worst_z:.2f} < 3, parity gap {worst_parity:.1e} < 1e-6"


CRITERIA = [
    (1, "functional equation", 1, functional_equation),
    (2, "convolution identity", 10, convolution_identity),
    (3, "Post inversion", 30, post_inversion),
    (4, "Chapman-Kolmogorov", 30, chapman_kolmogorov),
    (5, "effective Hamiltonian", 60, hamiltonian_equivalence),
    (6, "Kramers-Moyal", 60, kramers_moyal),
    (7, "MC marginal", 120, monte_carlo_marginal),
    (8, "martingale", 120, martingale),
    (9, "Heston correspondence", 180, heston_correspondence),
    (10, "pricing cross-oracle", 180, pricing_cross_oracle),
]


@pytest.mark.parametrize("number,name,budget,fn", CRITERIA, ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, name, budget, fn, capsys):
    verdict = _timed(number, name, budget, fn)
    with capsys.disabled():
        print("\n" + verdict.line())
    assert verdict.passed, verdict.detail
    assert verdict.seconds < budget, f"took {verdict.seconds:.1f}s, budget {budget}s"


def test_marginal_with_exact_variance_transitions(capsys):
    """Companion to criterion 7: the same KS gate with exact Gamma-kernel transitions."""
    verdict = _timed(7, "MC marginal, exact transitions", 120, monte_carlo_marginal_exact)
    with capsys.disabled():
        print("\n" + verdict.line())
    assert verdict.ok, verdict.detail


if __name__ == "__main__":
    verdicts = [_timed(n, name, budget, fn) for n, name, budget, fn in CRITERIA]
    for v in verdicts:
        print(v.line())
    print(f"{sum(v.ok for v in verdicts)}/{len(verdicts)} criteria passed")
