import gzip
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from smearing.rng import path_generator
from smearing.sde import (
    ConfigError,
    SimConfig,
    heston_correspondence_test,
    ks_threshold,
    marginal_v_test,
    martingale_test,
    simulate,
    summary,
)

SMALL = dict(b=10.0, c=2.0, t0=0.5, t_end=1.5, dt=0.02, n_paths=4000, seed=3)


class TestConfig:
    @pytest.mark.parametrize("bad", [
        dict(dt=0.2), dict(t0=0.0), dict(n_paths=0), dict(model="sabr"), dict(rho=1.5),
        dict(antithetic=True, n_paths=3), dict(t_end=0.4), dict(seed=-1),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            SimConfig(**{**SMALL, **bad}).validate()

    def test_heston_needs_parameters(self):
        with pytest.raises(ConfigError):
            SimConfig(model="heston", **SMALL).validate()

    def test_heston_matched_relations(self):
        cfg = SimConfig.heston_matched(4.0, 2.0, 0.0, 10.0)
        assert cfg.gamma_rev == pytest.approx(0.1)
        assert cfg.epsilon == pytest.approx(1 / (10.0 * 2.0))
        assert cfg.t0 == 10.0 and cfg.t_ref == 10.0


class TestSimulation:
    def test_reproducible_across_threads(self):
        cfg = SimConfig(model="coupled_gamma", **SMALL)
        a = simulate(cfg, threads=1, block_size=512)
        b = simulate(cfg, threads=4, block_size=512)
        c = simulate(cfg, threads=2, block_size=1000)
        assert np.array_equal(a.x_paths, b.x_paths) and np.array_equal(a.v_paths, c.v_paths)

    def test_path_depends_only_on_its_index(self):
        cfg = SimConfig(model="coupled_exact", **SMALL)
        full = simulate(cfg)
        fewer = simulate(replace(cfg, n_paths=10))
        assert np.array_equal(full.x_paths[:10], fewer.x_paths)

    def test_initial_variance_draw(self):
        cfg = SimConfig(model="coupled_gamma", **SMALL)
        ens = simulate(replace(cfg, n_paths=3))
        g = path_generator(cfg.seed, 1)
        assert ens.v_paths[1, 0] == g.gamma(cfg.c * cfg.t0, 1 / (cfg.b * cfg.t0))

    @pytest.mark.parametrize("model", ["coupled_exact", "coupled_gamma", "heston"])
    def test_positivity(self, model):
        if model == "heston":
            cfg = SimConfig.heston_matched(1.0, 0.5, 0.0, 0.5, t_end=1.5, dt=0.02, n_paths=2000, seed=1)
        else:
            cfg = SimConfig(model=model, **{**SMALL, "b": 1.0, "c": 0.5})
        assert simulate(cfg).v_paths.min() >= 0.0

    def test_heston_noise_free_limit(self):
        cfg = SimConfig(model="heston", b=2.0, c=1.0, gamma_rev=0.8, epsilon=0.0, t0=1.0, t_end=3.0,
                        dt=0.001, n_paths=5, seed=9)
        ens = simulate(cfg, save_every=100)
        v0 = ens.v_paths[:, :1]
        s = ens.times - cfg.t0
        exact = cfg.vbar + (v0 - cfg.vbar) * np.exp(-cfg.gamma_rev * s)
        np.testing.assert_allclose(ens.v_paths, exact, atol=2e-3 * np.max(np.abs(v0 - cfg.vbar)) + 1e-12)

    def test_save_every_keeps_endpoints(self):
        ens = simulate(SimConfig(model="coupled_gamma", **SMALL), save_every=7)
        assert ens.times[0] == 0.5 and ens.times[-1] == pytest.approx(1.5)

    def test_halving_dt_weakly_consistent(self):
        cfg = SimConfig(model="coupled_gamma", **{**SMALL, "n_paths": 20000})
        a = simulate(cfg, save_every=10 ** 6).x_paths[:, -1]
        b = simulate(replace(cfg, dt=0.01, seed=4), save_every=10 ** 6).x_paths[:, -1]
        pooled = math.sqrt(a.var() / a.size + b.var() / b.size)
        assert abs(a.mean() - b.mean()) < 3 * pooled

    def test_csv_export(self, tmp_path):
        ens = simulate(SimConfig(model="coupled_exact", **{**SMALL, "n_paths": 3}), save_every=25)
        ens.to_csv(tmp_path / "p.csv")
        ens.to_csv(tmp_path / "p.csv.gz", compress=True)
        ens.to_csv(tmp_path / "q.csv.gz", compress=True)
        plain = (tmp_path / "p.csv").read_text()
        assert plain.splitlines()[0] == "path_id,time,x,v"
        assert len(plain.splitlines()) == 1 + 3 * ens.times.size
        assert gzip.decompress((tmp_path / "p.csv.gz").read_bytes()).decode() == plain
        assert (tmp_path / "p.csv.gz").read_bytes() == (tmp_path / "q.csv.gz").read_bytes()


class TestMarginal:
    def test_exact_transition_matches_gamma(self):
        cfg = SimConfig(model="coupled_exact", b=1.0, c=2.0, t0=0.5, t_end=1.5, dt=0.01, n_paths=20000, seed=5)
        res = marginal_v_test(simulate(cfg, save_every=50), 1.0)
        assert res.passed and res.threshold == pytest.approx(1.63 / math.sqrt(20000))

    def test_threshold_formula(self):
        assert ks_threshold(10) == pytest.approx(0.515, abs=1e-3)

    def test_time_not_on_grid(self):
        ens = simulate(SimConfig(model="coupled_exact", **SMALL), save_every=50)
        with pytest.raises(ValueError):
            marginal_v_test(ens, 0.77)


class TestMartingale:
    @pytest.mark.parametrize("model", ["coupled_exact", "coupled_gamma", "heston"])
    @pytest.mark.parametrize("r", [0.0, 0.05])
    def test_discounted_price_is_martingale(self, model, r):
        if model == "heston":
            cfg = SimConfig.heston_matched(10.0, 2.0, r, 0.5, t_end=1.5, dt=0.02, n_paths=20000, seed=2)
        else:
            cfg = SimConfig(model=model, **{**SMALL, "r": r, "n_paths": 20000, "seed": 2})
        assert martingale_test(simulate(cfg, save_every=10 ** 6)).passed

    def test_missing_convexity_drift_detected(self):
        cfg = SimConfig(model="coupled_gamma", **{**SMALL, "n_paths": 20000, "convexity_drift": False})
        res = martingale_test(simulate(cfg, save_every=10 ** 6))
        assert not res.passed
        # bias is exp(vbar T / 2)
        assert res.ratio == pytest.approx(math.exp(0.2 * 1.0 / 2), rel=0.02)

    def test_antithetic_pairs(self):
        cfg = SimConfig(model="coupled_exact", **{**SMALL, "antithetic": True})
        ens = simulate(cfg, save_every=10 ** 6)
        d0 = ens.x_paths[0, -1] - ens.x_paths[0, 0]
        d1 = ens.x_paths[1, -1] - ens.x_paths[1, 0]
        assert d0 != d1
        assert martingale_test(ens).passed

    def test_large_values_do_not_overflow(self):
        cfg = SimConfig(model="coupled_exact", **{**SMALL, "n_paths": 50, "x0": 800.0})
        res = martingale_test(simulate(cfg, save_every=10 ** 6))
        assert math.isfinite(res.ratio)

    def test_summary_fields(self):
        out = summary(simulate(SimConfig(model="coupled_exact", **SMALL), save_every=25), at_time=1.0)
        assert {"model", "seed", "n_paths", "martingale_ratio", "ks_v"} <= set(out)


class TestHestonCorrespondence:
    def test_improves_with_reference_time(self):
        near = heston_correspondence_test(1.0, 2.0, 0.0, 10.0, 20000, seed=7)
        far = heston_correspondence_test(1.0, 2.0, 0.0, 40.0, 20000, seed=7)
        assert far.ks_statistic < near.ks_statistic

    def test_short_reference_time_visibly_off(self):
        rep = heston_correspondence_test(1.0, 2.0, 0.0, 0.5, 20000, seed=7)
        assert rep.ks_statistic > ks_threshold(20000) / 2

    def test_self_comparison_is_zero(self):
        cfg = SimConfig.heston_matched(1.0, 2.0, 0.0, 10.0, t_end=11.0, n_paths=2000, seed=1)
        a = simulate(cfg, save_every=10 ** 6).x_paths[:, -1]
        b = simulate(cfg, save_every=10 ** 6).x_paths[:, -1]
        assert stats.ks_2samp(a, b).statistic == 0.0
