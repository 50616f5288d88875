"""Command-line entry point: ``smearing <command> [flags]``.

Every run writes its primary outputs plus ``manifest.json`` into ``--out``
and prints one JSON summary line on stdout.  Exit codes: 0 pass, 1 check
failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .expressions import ExpressionError, compile_expression
from .families import (
    CustomFamily,
    DeltaFamily,
    DomainError,
    GammaFamily,
    StaticFamily,
    complete_monotonicity_violation,
    convolution_grid,
    convolution_identity_residual,
    functional_equation_residual,
    residual_grid,
)
from .inversion import InversionConvergenceError, invert_with_extrapolation, post_invert
from .km import km_analytic_gamma, km_coefficient_estimate
from .pricing import OptionSpec, price_fourier, price_mc
from .propagators import GridSpec, HamiltonianSpec, cke_residual
from .sde import ConfigError, SimConfig, simulate, summary

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- family files ---------------------------------------------------------------

def load_family(path):
    """Read a family description.

    ``{"family": "gamma", "b": 1, "c": 2}``, ``{"family": "delta", "v0": 1}``,
    ``{"family": "static_gamma", "b": 1, "c": 2}`` or
    ``{"family": "custom", "F": "x^2", "kappa": 1.0, "label": "..."}``.
    """
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read family file {path}: {exc}") from None
    if not isinstance(spec, dict) or "family" not in spec:
        raise UsageError("family file must be a JSON object with a 'family' key")
    kind = spec["family"]
    try:
        if kind == "gamma":
            return GammaFamily(float(spec["b"]), float(spec["c"]))
        if kind == "delta":
            return DeltaFamily(float(spec["v0"]))
        if kind == "static_gamma":
            return StaticFamily.gamma(float(spec["b"]), float(spec["c"]))
        if kind == "custom":
            return custom_family(spec["F"], float(spec.get("kappa", 1.0)), spec.get("label", "custom"))
    except KeyError as exc:
        raise UsageError(f"family {kind!r} needs key {exc}") from None
    except (TypeError, ValueError, ExpressionError) as exc:
        raise UsageError(f"invalid family parameters: {exc}") from None
    raise UsageError(f"unknown family {kind!r}")


def custom_family(expression: str, kappa: float = 1.0, label: str = "custom") -> CustomFamily:
    F = compile_expression(expression)
    probe = np.concatenate(([0.0], np.geomspace(1e-6, 1e6, 61)))
    with np.errstate(all="ignore"):
        vals = np.array([float(F(float(x))) for x in probe])
    if not np.all(np.isfinite(vals)):
        raise ExpressionError(f"F(x) = {expression} is not finite on [0, inf)")
    if abs(vals[0]) > 1e-12:
        raise ExpressionError(f"F(0) must be 0, got {vals[0]}")
    if not 0.0 < kappa <= 1.0:
        raise ExpressionError("kappa must lie in (0, 1]")
    return CustomFamily(F, kappa, label, expression)


# -- output helpers -------------------------------------------------------------

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


class Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.started = _now()
        self.files = []

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def finish(self, summary_obj: dict, passed: bool) -> int:
        summary_obj = dict(summary_obj, command=self.args.command, passed=bool(passed))
        _write_json(self.path("summary.json"), summary_obj)
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func",)}
        manifest = {
            "command": self.args.command,
            "config": config,
            "seed": getattr(self.args, "seed", None),
            "version": __version__,
            "started": self.started,
            "finished": _now(),
            "outputs": {p.name: _sha256(p) for p in self.files},
        }
        _write_json(self.out / "manifest.json", manifest)
        print(json.dumps(summary_obj, sort_keys=True))
        return EXIT_PASS if passed else EXIT_FAIL


# -- commands -------------------------------------------------------------------

def cmd_check_family(args) -> int:
    family = load_family(args.family_file)
    run = Run(args)
    rows = []
    fe_max = 0.0
    for xi, t, a in residual_grid():
        try:
            r = abs(functional_equation_residual(family, xi, t, a))
        except DomainError:
            r = math.inf
        fe_max = max(fe_max, r)
        rows.append(("functional_equation", xi, t, a, r))
    cm_max = 0.0
    xis = np.geomspace(0.1, 10.0, 5)
    for t in sorted({t for _, t, _ in residual_grid()}):
        v = complete_monotonicity_violation(family, t, xis)
        cm_max = max(cm_max, v)
        rows.append(("complete_monotonicity", math.nan, t, math.nan, v))
    conv_max = None
    if isinstance(family, GammaFamily) and not args.skip_convolution:
        conv_max = 0.0
        for z, t, a in convolution_grid():
            r = abs(convolution_identity_residual(family, z, t, a))
            conv_max = max(conv_max, r)
            rows.append(("convolution_identity", z, t, a, r))
    _write_csv(run.path("residuals.csv"), ["check", "xi_or_z", "t", "alpha", "residual"], rows)
    passed = fe_max < args.tol and cm_max <= 0.0 and (conv_max is None or conv_max < args.conv_tol)
    out = {
        "family": getattr(family, "label", type(family).__name__),
        "functional_equation_max": fe_max,
        "complete_monotonicity_violation": cm_max,
        "convolution_identity_max": conv_max,
    }
    return run.finish(out, passed)


def cmd_invert(args) -> int:
    family = GammaFamily(args.b, args.c)
    run = Run(args)
    vs = np.linspace(args.v_min, args.v_max, args.n_v)
    rows, worst, failures = [], 0.0, 0
    ks = [args.k_max // 8, args.k_max // 4, args.k_max // 2, args.k_max]
    sup = {k: 0.0 for k in ks}
    for v in vs:
        exact = float(family.density(v, args.t))
        raw = [post_invert(family, float(v), args.t, k).value for k in ks]
        for k, f in zip(ks, raw):
            sup[k] = max(sup[k], abs(f - exact))
        try:
            res = invert_with_extrapolation(family, float(v), args.t, args.k_max, tol=args.tol)
            value, est = res.value, res.error
        except InversionConvergenceError as exc:
            value, est = exc.best, exc.error
            failures += 1
        worst = max(worst, abs(value - exact))
        rows.append([v, exact, *raw, value, est])
    header = ["v", "exact"] + [f"post_k{k}" for k in ks] + ["extrapolated", "error_estimate"]
    _write_csv(run.path("inversion.csv"), header, rows)
    out = {"b": args.b, "c": args.c, "t": args.t, "max_error": worst, "unconverged": failures,
           "sup_error_by_k": {str(k): e for k, e in sup.items()}}
    return run.finish(out, worst < args.tol and failures == 0)


def cmd_cke(args) -> int:
    family = StaticFamily.gamma(args.b, args.c) if args.control else GammaFamily(args.b, args.c)
    spec = HamiltonianSpec(args.r)
    run = Run(args)
    grid = GridSpec.centered(args.half_width, args.n) if args.half_width else None
    rows = []
    for t_c in args.t_c:
        res = cke_residual(args.t_a, t_c, args.t_b, family, spec, grid=grid, method=args.method,
                           comoving=not args.lab_frame)
        rows.append([args.t_a, t_c, args.t_b, res])
    _write_csv(run.path("cke.csv"), ["t_a", "t_c", "t_b", "l1_residual"], rows)
    worst = max(r[-1] for r in rows)
    out = {"family": family.label, "max_l1_residual": worst, "splits": len(rows)}
    return run.finish(out, worst < args.tol)


def cmd_km(args) -> int:
    family = GammaFamily(args.b, args.c)
    run = Run(args)
    out = {"b": args.b, "c": args.c, "v": args.v, "t": args.t}
    rows, passed = [], True
    for n in (1, 2):
        est = km_coefficient_estimate(n, args.v, args.t, family)
        ana = km_analytic_gamma(n, args.v, args.t, family)
        # drift vanishes at v = vbar; measure it against the drift scale vbar/t
        denom = max(abs(ana), family.mean / args.t) if n == 1 else abs(ana)
        rel = abs(est.value - ana) / denom
        passed &= rel < args.tol
        out[f"K{n}"] = {"estimate": est.value, "analytic": ana, "relative_error": rel}
        rows.append([n, est.value, ana, rel, est.extrapolation_error])
    _write_csv(run.path("km.csv"), ["n", "estimate", "analytic", "relative_error", "extrapolation_error"], rows)
    return run.finish(out, passed)


def _sim_config(args) -> SimConfig:
    kw = dict(b=args.b, c=args.c, r=args.r, x0=args.x0, t0=args.t0, t_end=args.t_end, dt=args.dt,
              n_paths=args.n_paths, seed=args.seed, rho=args.rho, antithetic=args.antithetic)
    if args.model == "heston" and (args.gamma_rev is None or args.epsilon is None):
        t_ref = args.t_ref if args.t_ref is not None else args.t0
        kw.pop("b"), kw.pop("c"), kw.pop("r")
        return SimConfig.heston_matched(args.b, args.c, args.r, t_ref, **kw).validate()
    return SimConfig(model=args.model, gamma_rev=args.gamma_rev, epsilon=args.epsilon,
                     t_ref=args.t_ref, **kw).validate()


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    run = Run(args)
    ens = simulate(cfg, threads=args.threads, save_every=args.save_every)
    name = "paths.csv.gz" if args.gzip else "paths.csv"
    ens.to_csv(run.path(name), compress=args.gzip)
    out = summary(ens, at_time=args.ks_time)
    passed = out["martingale_pass"] and out.get("ks_pass", True)
    return run.finish(out, passed)


def cmd_price(args) -> int:
    family = GammaFamily(args.b, args.c)
    sim = SimConfig(model=args.model, b=args.b, c=args.c, t0=args.t0, t_end=args.t0 + args.T,
                    dt=args.dt, n_paths=args.n_paths, seed=args.seed, antithetic=args.antithetic)
    if args.model == "heston":
        sim = SimConfig.heston_matched(args.b, args.c, args.r, args.t0, t_end=args.t0 + args.T, dt=args.dt,
                                       n_paths=args.n_paths, seed=args.seed, antithetic=args.antithetic)
    run = Run(args)
    rows = []
    for strike in args.strike:
        opt = OptionSpec(strike, args.T, args.spot, args.r, call=not args.put)
        pf = price_fourier(opt, family, tail_tol=args.tail_tol)
        pm, se = price_mc(opt, sim, threads=args.threads)
        rows.append({"strike": strike, "maturity": args.T, "fourier_price": pf, "mc_price": pm,
                     "mc_stderr": se, "agree": abs(pm - pf) < args.n_se * se})
    _write_csv(run.path("prices.csv"), list(rows[0]), [list(r.values()) for r in rows])
    out = rows[0] if len(rows) == 1 else {"prices": rows}
    return run.finish(out, all(r["agree"] for r in rows))


# -- parser ---------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, tol: float, tol_help: str):
    p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--out", default="smearing-out", help="output directory")
    p.add_argument("--tol", type=float, default=tol, help=tol_help)
    p.add_argument("--config", help="JSON file of flag values; explicit flags take precedence")


def _gamma_args(p, b=1.0, c=2.0):
    p.add_argument("--b", type=float, default=b, help="Gamma rate parameter")
    p.add_argument("--c", type=float, default=c, help="Gamma shape parameter")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="smearing", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-family", help="functional-equation and positivity sweeps", formatter_class=fmt)
    p.add_argument("family_file", help="JSON family description")
    _common(p, 1e-12, "functional-equation residual threshold")
    p.add_argument("--conv-tol", type=float, default=1e-7, help="convolution-identity residual threshold")
    p.add_argument("--skip-convolution", action="store_true", help="skip the quadrature convolution sweep")
    p.set_defaults(func=cmd_check_family)

    p = sub.add_parser("invert", help="Post-formula inversion of the Gamma image", formatter_class=fmt)
    _gamma_args(p)
    _common(p, 1e-3, "max |extrapolated - exact| allowed")
    p.add_argument("--t", type=float, default=1.0, help="elapsed time")
    p.add_argument("--v-min", type=float, default=0.05, help="lowest variance node")
    p.add_argument("--v-max", type=float, default=10.0, help="highest variance node")
    p.add_argument("--n-v", type=int, default=50, help="number of variance nodes")
    p.add_argument("--k-max", type=int, default=64, help="largest Post order (ladder k/8..k)")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("cke", help="Chapman-Kolmogorov residual of the smeared propagator", formatter_class=fmt)
    _gamma_args(p)
    _common(p, 1e-6, "L1 residual threshold")
    p.add_argument("--r", type=float, default=0.0, help="drift rate")
    p.add_argument("--t-a", type=float, default=0.0, help="start time")
    p.add_argument("--t-c", type=float, nargs="+", default=[0.25, 0.5, 0.75], help="intermediate times")
    p.add_argument("--t-b", type=float, default=1.0, help="end time")
    p.add_argument("--n", type=int, default=4096, help="grid nodes (power of two)")
    p.add_argument("--half-width", type=float, default=None, help="grid half width (default: 10 sigma)")
    p.add_argument("--method", choices=("fourier", "quadrature"), default="fourier", help="density construction")
    p.add_argument("--control", action="store_true", help="use the t-independent mixture (expected to fail)")
    p.add_argument("--lab-frame", action="store_true", help="sample densities in the lab frame, not the drift frame")
    p.set_defaults(func=cmd_cke)

    p = sub.add_parser("km", help="Kramers-Moyal coefficients from the variance kernel", formatter_class=fmt)
    _gamma_args(p)
    _common(p, 1e-2, "relative error threshold")
    p.add_argument("--v", type=float, default=1.0, help="current variance")
    p.add_argument("--t", type=float, default=1.0, help="elapsed time")
    p.set_defaults(func=cmd_km)

    p = sub.add_parser("simulate", help="Monte Carlo path ensemble", formatter_class=fmt)
    _gamma_args(p)
    _common(p, 0.0, "unused")
    p.add_argument("--model", choices=("coupled_exact", "coupled_gamma", "heston"), default="coupled_gamma")
    p.add_argument("--r", type=float, default=0.0, help="drift rate")
    p.add_argument("--x0", type=float, default=0.0, help="initial log-price")
    p.add_argument("--t0", type=float, default=0.5, help="start of the elapsed clock")
    p.add_argument("--t-end", type=float, default=1.5, help="end of the elapsed clock")
    p.add_argument("--dt", type=float, default=0.01, help="time step")
    p.add_argument("--n-paths", type=int, default=1000, help="number of paths")
    p.add_argument("--rho", type=float, default=0.0, help="correlation of the two Brownian motions")
    p.add_argument("--gamma-rev", type=float, default=None, help="Heston mean reversion (default 1/t_ref)")
    p.add_argument("--epsilon", type=float, default=None, help="Heston vol-of-vol (default 1/(t_ref sqrt(b)))")
    p.add_argument("--t-ref", type=float, default=None, help="Heston reference time (default t0)")
    p.add_argument("--antithetic", action="store_true", help="antithetic pairs")
    p.add_argument("--save-every", type=int, default=10, help="record every n-th step")
    p.add_argument("--gzip", action="store_true", help="gzip the path CSV")
    p.add_argument("--ks-time", type=float, default=None, help="also gate the variance KS test at this time")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("price", help="European option: Fourier vs Monte Carlo", formatter_class=fmt)
    _gamma_args(p, b=100.0, c=4.0)
    _common(p, 0.0, "unused")
    p.add_argument("--strike", type=float, nargs="+", default=[1.0], help="strike(s)")
    p.add_argument("--spot", type=float, default=1.0, help="spot price")
    p.add_argument("--T", type=float, default=1.0, help="maturity")
    p.add_argument("--r", type=float, default=0.0, help="rate")
    p.add_argument("--put", action="store_true", help="price puts instead of calls")
    p.add_argument("--model", choices=("coupled_exact", "coupled_gamma", "heston"), default="coupled_exact")
    p.add_argument("--t0", type=float, default=1.0, help="start of the simulation clock")
    p.add_argument("--dt", type=float, default=0.02, help="time step")
    p.add_argument("--n-paths", type=int, default=100_000, help="Monte Carlo paths")
    p.add_argument("--antithetic", action="store_true", help="antithetic pairs")
    p.add_argument("--n-se", type=float, default=3.0, help="agreement band in standard errors")
    p.add_argument("--tail-tol", type=float, default=1e-9, help="grid-widening tolerance")
    p.set_defaults(func=cmd_price)
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    known = set(vars(args)) - {"func", "command", "config"}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, ConfigError, ExpressionError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
