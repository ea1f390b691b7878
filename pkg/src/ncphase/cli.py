"""Command-line experiments.

    ncphase params     --hbar 1 --theta 1
    ncphase smooth     --function f.json --r 0,0,0,0 --sweep theta:1e-3:1e-1:5 --order 128
    ncphase limits     --sweep s:1e-4:1e-2:5
    ncphase dynamics   --hbar 1e-6 --theta 0 --format csv
    ncphase dynamics   --mode hbar0 --theta 0.5
    ncphase oracle     --hbar 0.25 --theta 1 --n-max 12
    ncphase kernel-fit --hbar 0.25 --theta 1 --out fit.csv

Exit codes: 0 success, 1 configuration error, 2 quadrature non-convergence,
3 oracle failure (the first failing check is named on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import evolution_matrix, evolved_hbar0, smooth_evolved
from .functions import GaussFactor, NotSeparableError, SepGaussFunction
from .oracle import FockOracle, TruncationError, TruncationWarning, select_variant
from .params import ParameterError, PhysParams, derive, limit_regime
from .reports import emit, to_csv, to_json
from .smoothing import (
    VARIANTS,
    ConvergenceError,
    QuadratureSpec,
    smooth,
    smooth_closed_form,
    smooth_hbar0,
    smooth_mc,
    smooth_theta0,
)

EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_ORACLE = 1, 2, 3
EXPERIMENTS = ("params", "smooth", "limits", "dynamics", "oracle", "kernel-fit")


class ConfigError(ValueError):
    pass


class OracleFailure(RuntimeError):
    def __init__(self, check: str, report=None):
        super().__init__(check)
        self.check = check
        self.report = report


def demo_function() -> SepGaussFunction:
    """``(exp(-x1^2) + 1)(exp(-x2^2) + 1) exp(-y1^2) exp(-y2^2)``."""
    bump = GaussFactor(1.0, 0.0, 1.0, 1.0)
    gauss = GaussFactor(1.0, 0.0, 1.0, 0.0)
    return SepGaussFunction(factors=(bump, bump, gauss, gauss))


def dynamics_function() -> SepGaussFunction:
    return SepGaussFunction.gaussian(centers=(0.5, -0.3, 0.2, 0.4))


def hbar0_function() -> SepGaussFunction:
    """A function whose limit along x1, x2, y1 is a non-trivial profile in y2."""
    bump = GaussFactor(1.0, 0.0, 1.0, 1.0)
    return SepGaussFunction(factors=(bump, bump, bump, GaussFactor(1.0, 0.3, 1.0, 0.0)))


DYNAMICS_POINT = (0.4, -0.2, 0.6, 0.1)


@dataclass
class Sweep:
    axis: str
    values: np.ndarray

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        try:
            axis, start, stop, points = text.split(":")
            start, stop, points = float(start), float(stop), int(points)
        except ValueError:
            raise ConfigError(f"sweep must look like axis:start:stop:points, got {text!r}") from None
        if not (start > 0 and stop > 0):
            raise ConfigError("sweep range must be positive")
        if points < 3:
            raise ConfigError("sweep needs at least 3 points")
        return cls(axis, np.logspace(math.log10(start), math.log10(stop), points))


@dataclass
class ExperimentConfig:
    experiment: str
    params: PhysParams = field(default_factory=PhysParams)
    sweep: Optional[Sweep] = None
    function: Optional[SepGaussFunction] = None
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    out: Optional[str] = None
    fmt: str = "json"
    variant: str = "A"
    r: Optional[tuple] = None
    n_max: int = 12
    method: str = "gh"
    mode: str = "classical"
    points: int = 65
    times: tuple = (0.0, 1.0, 10.0)
    resolution: bool = False

    def point(self, default=(0.0, 0.0, 0.0, 0.0)) -> tuple:
        return self.r if self.r is not None else default


def _threads() -> int:
    env = os.environ.get("NCPHASE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("NCPHASE_THREADS must be an integer") from None
    return min(8, os.cpu_count() or 1)


def pool_map(func, items):
    """Ordered parallel map capped by ``NCPHASE_THREADS``."""
    items = list(items)
    n = min(_threads(), len(items))
    if n <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(func, items))


def resolve_variant(cfg: ExperimentConfig, params: Optional[PhysParams] = None) -> str:
    if cfg.variant != "auto":
        return cfg.variant
    p = params or cfg.params
    if p.hbar > 0 and p.theta > 0:
        try:
            return select_variant(p)
        except TruncationError:
            pass
    return "A"


def _swept(params: PhysParams, axis: str, value: float) -> PhysParams:
    if axis not in ("hbar", "theta", "mass", "omega"):
        raise ConfigError(f"cannot sweep {axis!r}; use hbar, theta, mass or omega")
    return params.replace(**{axis: float(value)})


# -- experiments --------------------------------------------------------------

def run_params(cfg: ExperimentConfig):
    def one(p):
        d = derive(p)
        return {**p.as_dict(), **d.as_dict(), "ground_state_trace": d.ground_state_trace,
                "regime": limit_regime(p, 1e-3).value}
    if cfg.sweep:
        rows = pool_map(lambda v: one(_swept(cfg.params, cfg.sweep.axis, v)), cfg.sweep.values)
    else:
        rows = [one(cfg.params)]
    header = list(rows[0].keys())
    return rows, header


def _smooth_record(cfg: ExperimentConfig, p: PhysParams):
    F = cfg.function or demo_function()
    variant = resolve_variant(cfg, p)
    if cfg.method == "mc":
        res = smooth_mc(F, cfg.point(), p, cfg.quad, variant)
        value, err = res.value, res.std_error
    elif cfg.method == "closed":
        value, err = smooth_closed_form(F, cfg.point(), p, variant), 0.0
    else:
        res = smooth(F, cfg.point(), p, cfg.quad, variant)
        value, err = res.value, res.error_estimate
    return {"op": "smooth", "params": p.as_dict(), "r": list(cfg.point()), "value": value,
            "error_estimate": err, "variant": variant, "method": cfg.method}


def run_smooth(cfg: ExperimentConfig):
    if cfg.sweep:
        recs = pool_map(lambda v: _smooth_record(cfg, _swept(cfg.params, cfg.sweep.axis, v)),
                        cfg.sweep.values)
    else:
        recs = [_smooth_record(cfg, cfg.params)]
    header = ["hbar", "theta", "mass", "omega", "value", "error_estimate", "variant"]
    return recs, header


def _flatten_smooth(rec):
    return [*rec["params"].values(), rec["value"], rec["error_estimate"], rec["variant"]]


LIMIT_COLUMNS = ["theta", "hbar", "F_theta_first", "F_hbar_first", "F_diagonal", "gap"]


def run_limits_experiment(cfg: ExperimentConfig):
    """Iterated limits along a common scale ``s`` (``hbar = theta = s``).

    ``F_theta_first`` removes theta exactly and keeps ``hbar = s``;
    ``F_hbar_first`` removes hbar exactly and keeps ``theta = s``;
    ``F_diagonal`` keeps both equal to ``s``. The last row extrapolates each
    column linearly to ``s = 0`` from the two smallest scales.
    """
    F = cfg.function or demo_function()
    sweep = cfg.sweep or Sweep("s", np.logspace(-4, -2, 5))
    p0, r = cfg.params, cfg.point()

    def row(s):
        s = float(s)
        theta_first = smooth_theta0(F, r, s, p0, cfg.quad).value
        hbar_first = smooth_hbar0(F, r, s, p0)
        p = p0.replace(hbar=s, theta=s)
        diag = smooth(F, r, p, cfg.quad, resolve_variant(cfg, p)).value
        return [s, s, theta_first, hbar_first, diag, theta_first - hbar_first]

    rows = pool_map(row, sorted(sweep.values))
    (s0, *_, a0, b0, c0, _), (s1, *_, a1, b1, c1, _) = rows[0], rows[1]
    lin = lambda v0, v1: v0 - s0 * (v1 - v0) / (s1 - s0)
    ta, tb, tc = lin(a0, a1), lin(b0, b1), lin(c0, c1)
    rows.append([0.0, 0.0, ta, tb, tc, ta - tb])
    return rows, LIMIT_COLUMNS


DYNAMICS_COLUMNS = ["t", "smoothed_value", "classical_value", "abs_error"]


def run_dynamics_experiment(cfg: ExperimentConfig):
    p = cfg.params
    if cfg.mode == "hbar0":
        if not p.theta > 0:
            raise ConfigError("hbar0 mode needs --theta > 0")
        F = cfg.function or hbar0_function()
        r = cfg.point(DYNAMICS_POINT)
        rows = [[float(t), evolved_hbar0(F, r, float(t), p.theta, p)] for t in cfg.times]
        return rows, ["t", "value"]
    if cfg.mode != "classical":
        raise ConfigError(f"unknown dynamics mode {cfg.mode!r}")
    F = cfg.function or dynamics_function()
    variant = resolve_variant(cfg, p)
    period = 2 * math.pi / p.omega
    ts = np.linspace(0.0, period, cfg.points)
    r = np.asarray(cfg.point(DYNAMICS_POINT), dtype=float)

    def row(t):
        val = smooth_evolved(F, r, float(t), p, cfg.quad, variant).value
        cls = float(F(evolution_matrix(-float(t), p).matrix @ r))
        return [float(t), val, cls, abs(val - cls)]

    return pool_map(row, ts), DYNAMICS_COLUMNS


def run_oracle_suite(cfg: ExperimentConfig):
    p = cfg.params
    if not (p.hbar > 0 and p.theta > 0):
        raise ConfigError("the oracle needs hbar > 0 and theta > 0")
    base = {"params": p.as_dict(), "n_max": cfg.n_max}
    try:
        oracle = FockOracle(p, cfg.n_max)
    except TruncationError as exc:
        report = [{"check_name": "ground_state", **base, "residual": math.inf, "passed": False,
                   "error": str(exc)}]
        raise OracleFailure("ground_state", report) from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        checks = oracle.run_checks(seed=cfg.quad.rng_seed, include_resolution=cfg.resolution)
    report = []
    for c in checks:
        rec = c.as_dict()
        report.append({"check_name": rec.pop("check_name"), **base, **rec})
    failing = [c.name for c in checks if not c.passed]
    if failing:
        raise OracleFailure(failing[0], report)
    return report


def run_kernel_fit(cfg: ExperimentConfig):
    p = cfg.params
    if not (p.hbar > 0 and p.theta > 0):
        raise ConfigError("the oracle needs hbar > 0 and theta > 0")
    try:
        oracle = FockOracle(p, cfg.n_max)
    except TruncationError as exc:
        raise OracleFailure("ground_state") from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        fit = oracle.kernel_fit(seed=cfg.quad.rng_seed)
    summary = {"selected_variant": fit.selected, "n_pairs": len(fit.oracle), "n_max": cfg.n_max,
               "params": p.as_dict(),
               **{f"max_rel_error_{k}": fit.max_rel_error(k) for k in fit.predictions},
               **{f"sse_{k}": fit.sse(k) for k in VARIANTS}}
    return fit, summary


# -- argument handling ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with any of the flags below; flags win")
    common.add_argument("--hbar", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--mass", type=float)
    common.add_argument("--omega", type=float)
    common.add_argument("--order", type=int, help="Gauss-Hermite nodes per axis")
    common.add_argument("--mc-samples", type=int, dest="mc_samples")
    common.add_argument("--seed", type=int)
    common.add_argument("--function", help="JSON file describing a separable function")
    common.add_argument("--sweep", help="axis:start:stop:points, log-spaced")
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--variant", choices=(*VARIANTS, "auto"))
    common.add_argument("--r", help="phase-space point x1,x2,y1,y2")
    common.add_argument("--n-max", type=int, dest="n_max")

    parser = _Parser(prog="ncphase", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    sub.add_parser("params", parents=[common], help="derived constants")
    sm = sub.add_parser("smooth", parents=[common], help="smoothed observable")
    sm.add_argument("--method", choices=("gh", "closed", "mc"), default=argparse.SUPPRESS)
    sub.add_parser("limits", parents=[common], help="iterated classical limits")
    dy = sub.add_parser("dynamics", parents=[common], help="evolved smoothed observable")
    dy.add_argument("--mode", choices=("classical", "hbar0"), default=argparse.SUPPRESS)
    dy.add_argument("--points", type=int, default=argparse.SUPPRESS)
    dy.add_argument("--times", default=argparse.SUPPRESS, help="comma-separated times for the hbar0 mode")
    orc = sub.add_parser("oracle", parents=[common], help="Fock-space residual checks")
    orc.add_argument("--resolution", action="store_true", default=argparse.SUPPRESS, help="also check the resolution of identity")
    sub.add_parser("kernel-fit", parents=[common], help="oracle overlaps vs kernel variants")
    return parser


def _floats(text, n=None, what="value"):
    try:
        vals = tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigError(f"bad {what}: {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what} needs {n} comma-separated numbers")
    return vals


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    opts = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                opts.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        opts = {k.replace("-", "_"): v for k, v in opts.items()}
    opts.update({k: v for k, v in vars(ns).items() if k not in ("config", "experiment")})

    try:
        params = PhysParams(**{k: float(opts.pop(k)) for k in ("hbar", "theta", "mass", "omega") if k in opts})
        qkw = {}
        if "order" in opts:
            qkw["hermite_order"] = int(opts.pop("order"))
        if "mc_samples" in opts:
            qkw["mc_samples"] = int(opts.pop("mc_samples"))
        if "seed" in opts:
            qkw["rng_seed"] = int(opts.pop("seed"))
        quad = QuadratureSpec(**qkw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    cfg = ExperimentConfig(ns.experiment, params=params, quad=quad)
    if "sweep" in opts:
        sw = opts.pop("sweep")
        cfg.sweep = Sweep.parse(sw) if isinstance(sw, str) else Sweep.parse(
            f"{sw['axis']}:{sw['start']}:{sw['stop']}:{sw['points']}")
    if "function" in opts:
        fn = opts.pop("function")
        try:
            if isinstance(fn, dict):
                cfg.function = SepGaussFunction.from_dict(fn)
            else:
                with open(fn, encoding="utf-8") as fh:
                    cfg.function = SepGaussFunction.from_json(fh.read())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad function description: {exc}") from None
    if "r" in opts:
        r = opts.pop("r")
        cfg.r = _floats(r, 4, "--r") if isinstance(r, str) else _floats(",".join(map(str, r)), 4, "--r")
    if "times" in opts:
        t = opts.pop("times")
        cfg.times = _floats(t, None, "--times") if isinstance(t, str) else tuple(float(v) for v in t)
    if "format" in opts:
        cfg.fmt = opts.pop("format")
    for key in ("out", "variant", "method", "mode"):
        if key in opts:
            setattr(cfg, key, opts.pop(key))
    for key in ("n_max", "points"):
        if key in opts:
            setattr(cfg, key, int(opts.pop(key)))
    if "resolution" in opts:
        cfg.resolution = bool(opts.pop("resolution"))
    if opts:
        raise ConfigError(f"unknown config keys: {sorted(opts)}")
    if cfg.fmt not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    if cfg.variant not in (*VARIANTS, "auto"):
        raise ConfigError("variant must be A, B or auto")
    if cfg.points < 2:
        raise ConfigError("--points must be at least 2")
    return cfg


def _render(cfg, rows, header, records=None) -> str:
    if cfg.fmt == "csv":
        return to_csv(header, rows)
    if records is not None:
        return to_json(records)
    return to_json([dict(zip(header, row)) for row in rows])


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute one experiment; returns the exit code."""
    out = stdout or sys.stdout
    exp = cfg.experiment
    if exp == "params":
        recs, header = run_params(cfg)
        text = _render(cfg, [[r[h] for h in header] for r in recs], header, recs)
    elif exp == "smooth":
        recs, header = run_smooth(cfg)
        text = _render(cfg, [_flatten_smooth(r) for r in recs], header, recs)
    elif exp == "limits":
        rows, header = run_limits_experiment(cfg)
        text = _render(cfg, rows, header)
    elif exp == "dynamics":
        rows, header = run_dynamics_experiment(cfg)
        text = _render(cfg, rows, header)
    elif exp == "oracle":
        try:
            report = run_oracle_suite(cfg)
        except OracleFailure as exc:
            if exc.report is not None:
                emit(_oracle_text(cfg, exc.report), cfg.out, out)
            print(f"oracle check failed: {exc.check}", file=sys.stderr)
            return EXIT_ORACLE
        text = _oracle_text(cfg, report)
    elif exp == "kernel-fit":
        fit, summary = run_kernel_fit(cfg)
        header, rows = fit.rows()
        if cfg.out:
            emit(to_csv(header, rows), cfg.out)
            text = to_json(summary)
            emit(text, None, out)
            return 0
        text = to_csv(header, rows) if cfg.fmt == "csv" else to_json(summary)
    else:
        raise ConfigError(f"unknown experiment {exp!r}")
    emit(text, cfg.out, out)
    return 0


def _oracle_text(cfg, report) -> str:
    if cfg.fmt == "csv":
        header = ["check_name", "n_max", "residual", "tolerance", "passed"]
        return to_csv(header, [[r.get(h, "") for h in header] for r in report])
    return to_json(report)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        return run(cfg)
    except (ConfigError, ParameterError, NotSeparableError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OracleFailure as exc:
        print(f"oracle check failed: {exc.check}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
