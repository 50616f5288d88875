"""Monte Carlo for the coupled log-price / variance system.

Three variance dynamics share one log-price step
``dx = (r - v/2) ds + sqrt(v) dW1``:

``coupled_gamma``
    Euler-Maruyama for ``dv = (vbar - v)/s ds + (1/s) sqrt(vbar/b) dW2``,
    the two-term (Fokker-Planck) truncation of the Gamma variance process.
``heston``
    Euler-Maruyama for ``dv = gamma (vbar - v) ds + eps sqrt(v) dW2``.
``coupled_exact``
    Exact transitions of the Gamma variance process:
    ``s' v' = s v + dA`` with ``dA ~ Gamma(c ds, rate b)``, and the log-price
    driven by the same variance increment,
    ``dx = r ds - dA/2 + sqrt(dA) Z``.  Its log-price law at elapsed time T
    is exactly the smeared propagator.

Euler variants use full truncation: ``max(v, 0)`` in drift and diffusion,
``max(v, 0)`` recorded.  The elapsed clock ``s`` starts at ``t0 > 0`` and
``v(t0)`` is drawn from the Gamma law with shape ``c t0`` and rate ``b t0``.
"""

from __future__ import annotations

import csv
import gzip
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special, stats

from .rng import path_generator

MODELS = ("coupled_exact", "coupled_gamma", "heston")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    model: str = "coupled_gamma"
    b: float = 1.0
    c: float = 2.0
    r: float = 0.0
    gamma_rev: Optional[float] = None
    epsilon: Optional[float] = None
    x0: float = 0.0
    t0: float = 0.5
    t_end: float = 1.5
    dt: float = 0.01
    n_paths: int = 10_000
    seed: int = 0
    rho: float = 0.0
    antithetic: bool = False
    t_ref: Optional[float] = None
    # False drops the -v/2 Ito correction; only useful as a negative control
    convexity_drift: bool = True

    @property
    def vbar(self) -> float:
        return self.c / self.b

    @property
    def n_steps(self) -> int:
        return max(1, int(round((self.t_end - self.t0) / self.dt)))

    @property
    def step(self) -> float:
        return (self.t_end - self.t0) / self.n_steps

    def validate(self) -> "SimConfig":
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if not (self.b > 0 and self.c > 0):
            raise ConfigError("b and c must be positive")
        if not self.t0 > 0:
            raise ConfigError("t0 must be positive: the variance coefficients are singular at s = 0")
        if not self.t_end > self.t0:
            raise ConfigError("t_end must exceed t0")
        if not 0 < self.dt < (self.t_end - self.t0) / 10:
            raise ConfigError("dt must be below (t_end - t0)/10")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if self.antithetic and self.n_paths % 2:
            raise ConfigError("antithetic sampling needs an even n_paths")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [-1, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.model == "heston":
            if self.gamma_rev is None or self.epsilon is None:
                raise ConfigError("heston needs gamma_rev and epsilon (see SimConfig.heston_matched)")
            if not (self.gamma_rev > 0 and self.epsilon >= 0):
                raise ConfigError("heston needs gamma_rev > 0 and epsilon >= 0")
        return self

    @classmethod
    def heston_matched(cls, b: float, c: float, r: float, t_ref: float, **kw) -> "SimConfig":
        """Heston with ``gamma = 1/t_ref`` and ``eps = 1/(t_ref sqrt(b))`` starting at ``t_ref``."""
        kw.setdefault("t0", t_ref)
        kw.setdefault("t_end", t_ref + 1.0)
        return cls(model="heston", b=b, c=c, r=r, gamma_rev=1.0 / t_ref,
                   epsilon=1.0 / (t_ref * math.sqrt(b)), t_ref=t_ref, **kw)


@dataclass
class PathEnsemble:
    times: np.ndarray
    x_paths: np.ndarray
    v_paths: np.ndarray
    config: SimConfig

    @property
    def n_paths(self) -> int:
        return self.x_paths.shape[0]

    def time_index(self, at_time: float) -> int:
        hits = np.flatnonzero(np.isclose(self.times, at_time, rtol=0, atol=1e-9 * max(1.0, abs(at_time))))
        if hits.size == 0:
            raise ValueError(f"time {at_time} is not on the ensemble grid")
        return int(hits[0])

    def to_csv(self, path, compress: bool = False) -> None:
        """Long format ``path_id,time,x,v``; gzip output is byte-reproducible (no name, mtime 0)."""
        with open(path, "wb") as raw:
            stream = gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) if compress else raw
            with io.TextIOWrapper(stream, encoding="ascii", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["path_id", "time", "x", "v"])
                times = [repr(float(t)) for t in self.times]
                for i in range(self.n_paths):
                    for j, t in enumerate(times):
                        w.writerow([i, t, repr(float(self.x_paths[i, j])), repr(float(self.v_paths[i, j]))])


def _draw_block(cfg: SimConfig, i0: int, i1: int, n_steps: int, ds: float):
    """Initial variances, normals and (exact model) Gamma increments for paths i0..i1."""
    B = i1 - i0
    v0 = np.empty(B)
    z = np.empty((B, n_steps, 2))
    da = np.empty((B, n_steps)) if cfg.model == "coupled_exact" else None
    shape0, scale0 = cfg.c * cfg.t0, 1.0 / (cfg.b * cfg.t0)
    for j, i in enumerate(range(i0, i1)):
        if cfg.antithetic and i % 2 == 1 and j > 0:
            v0[j] = v0[j - 1]
            z[j] = -z[j - 1]
            if da is not None:
                da[j] = da[j - 1]
            continue
        stream = i // 2 if cfg.antithetic else i
        g = path_generator(cfg.seed, stream)
        v0[j] = g.gamma(shape0, scale0)
        z[j] = g.standard_normal((n_steps, 2))
        if da is not None:
            da[j] = g.gamma(cfg.c * ds, 1.0 / cfg.b, size=n_steps)
        if cfg.antithetic and i % 2 == 1:
            z[j] = -z[j]
    return v0, z, da


def _simulate_block(cfg: SimConfig, i0: int, i1: int, save_idx: np.ndarray):
    n_steps, ds = cfg.n_steps, cfg.step
    v0, z, da = _draw_block(cfg, i0, i1, n_steps, ds)
    B = i1 - i0
    vbar, r, rho = cfg.vbar, cfg.r, cfg.rho
    rho_c = math.sqrt(1.0 - rho * rho)
    sq_ds = math.sqrt(ds)
    half = 0.5 if cfg.convexity_drift else 0.0
    x = np.full(B, float(cfg.x0))
    v = v0.copy()
    xs = np.empty((B, save_idx.size))
    vs = np.empty((B, save_idx.size))
    k_save = 0
    if save_idx[0] == 0:
        xs[:, 0], vs[:, 0] = x, v
        k_save = 1
    noise_gamma = math.sqrt(vbar / cfg.b)
    for k in range(n_steps):
        s = cfg.t0 + k * ds
        z2 = z[:, k, 1]
        w1 = rho * z2 + rho_c * z[:, k, 0]
        if cfg.model == "coupled_exact":
            dA = da[:, k]
            x = x + r * ds - half * dA + np.sqrt(dA) * w1
            v = (s * v + dA) / (s + ds)
        else:
            vp = np.maximum(v, 0.0)
            x = x + (r - half * vp) * ds + np.sqrt(vp) * sq_ds * w1
            if cfg.model == "coupled_gamma":
                v = v + (vbar - vp) / s * ds + noise_gamma / s * sq_ds * z2
            else:
                v = v + cfg.gamma_rev * (vbar - vp) * ds + cfg.epsilon * np.sqrt(vp) * sq_ds * z2
        if k_save < save_idx.size and save_idx[k_save] == k + 1:
            xs[:, k_save] = x
            vs[:, k_save] = np.maximum(v, 0.0)
            k_save += 1
    return xs, vs


def simulate(config: SimConfig, threads: int = 1, save_every: int = 1, block_size: int = 4096) -> PathEnsemble:
    """Simulate ``config.n_paths`` paths; output is independent of ``threads``."""
    cfg = config.validate()
    n_steps = cfg.n_steps
    save_idx = np.arange(0, n_steps + 1, max(1, save_every))
    if save_idx[-1] != n_steps:
        save_idx = np.append(save_idx, n_steps)
    if cfg.antithetic and block_size % 2:
        block_size += 1
    bounds = [(i, min(i + block_size, cfg.n_paths)) for i in range(0, cfg.n_paths, block_size)]
    work = lambda b: _simulate_block(cfg, b[0], b[1], save_idx)
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    x_paths = np.concatenate([p[0] for p in parts])
    v_paths = np.concatenate([p[1] for p in parts])
    times = cfg.t0 + save_idx * cfg.step
    return PathEnsemble(times, x_paths, v_paths, cfg)


# -- statistical checks --------------------------------------------------------

@dataclass(frozen=True)
class MarginalResult:
    ks_statistic: float
    passed: bool
    threshold: float


@dataclass(frozen=True)
class MartingaleResult:
    ratio: float
    std_err: float
    passed: bool


def ks_threshold(n: int) -> float:
    """Two-sided KS critical distance at alpha ~ 0.01."""
    return 1.63 / math.sqrt(n)


def marginal_v_test(ensemble: PathEnsemble, at_time: float) -> MarginalResult:
    """KS distance of the simulated variance at ``at_time`` to Gamma(c s, b s)."""
    j = ensemble.time_index(at_time)
    cfg = ensemble.config
    s = float(ensemble.times[j])
    law = stats.gamma(cfg.c * s, scale=1.0 / (cfg.b * s))
    ks = float(stats.kstest(ensemble.v_paths[:, j], law.cdf).statistic)
    thr = ks_threshold(ensemble.n_paths)
    return MarginalResult(ks, ks < thr, thr)


def _pair_means(w: np.ndarray, antithetic: bool) -> np.ndarray:
    return 0.5 * (w[0::2] + w[1::2]) if antithetic else w


def martingale_test(ensemble: PathEnsemble) -> MartingaleResult:
    """Mean of ``exp(x_T - x0 - r (T - t0))`` with its standard error; pass within 3 SE."""
    cfg = ensemble.config
    horizon = float(ensemble.times[-1] - ensemble.times[0])
    y = ensemble.x_paths[:, -1] - ensemble.x_paths[:, 0] - cfg.r * horizon
    if y.size == 0:
        raise ValueError("empty ensemble")
    m = float(np.max(y))
    w = _pair_means(np.exp(y - m), cfg.antithetic)
    # log-sum-exp form of the sample mean
    ratio = math.exp(float(special.logsumexp(np.log(w))) - math.log(w.size) + m)
    se = math.exp(m) * float(np.std(w, ddof=1)) / math.sqrt(w.size) if w.size > 1 else math.inf
    return MartingaleResult(ratio, se, abs(ratio - 1.0) < 3.0 * se)


@dataclass(frozen=True)
class CorrespondenceReport:
    t_ref: float
    window: float
    ks_statistic: float
    ks_pvalue: float
    gamma_rev: float
    epsilon: float
    mean_x_gamma: float
    mean_x_heston: float


def heston_correspondence_test(b: float, c: float, r: float, t_ref: float, n_paths: int, seed: int,
                               window: float = 1.0, dt: float = 0.01, threads: int = 1) -> CorrespondenceReport:
    """Terminal log-price KS distance between ``coupled_gamma`` and matched Heston.

    Both start at ``s = t_ref`` with identical seeds, hence identical initial
    variances and Brownian increments.
    """
    common = dict(b=b, c=c, r=r, t0=t_ref, t_end=t_ref + window, dt=dt, n_paths=n_paths, seed=seed)
    gam = simulate(SimConfig(model="coupled_gamma", **common), threads=threads, save_every=10 ** 9)
    hes_cfg = SimConfig.heston_matched(b, c, r, t_ref, **{k: v for k, v in common.items() if k not in ("b", "c", "r")})
    hes = simulate(hes_cfg, threads=threads, save_every=10 ** 9)
    res = stats.ks_2samp(gam.x_paths[:, -1], hes.x_paths[:, -1])
    return CorrespondenceReport(
        t_ref, window, float(res.statistic), float(res.pvalue), hes_cfg.gamma_rev, hes_cfg.epsilon,
        float(gam.x_paths[:, -1].mean()), float(hes.x_paths[:, -1].mean()),
    )


def summary(ensemble: PathEnsemble, at_time: Optional[float] = None) -> dict:
    cfg = ensemble.config
    mart = martingale_test(ensemble)
    out = {
        "model": cfg.model,
        "seed": cfg.seed,
        "n_paths": cfg.n_paths,
        "martingale_ratio": mart.ratio,
        "martingale_stderr": mart.std_err,
        "martingale_pass": mart.passed,
        "min_v": float(ensemble.v_paths.min()),
    }
    if at_time is not None:
        marg = marginal_v_test(ensemble, at_time)
        out.update(ks_v=marg.ks_statistic, ks_threshold=marg.threshold, ks_pass=marg.passed, ks_time=at_time)
    return out
