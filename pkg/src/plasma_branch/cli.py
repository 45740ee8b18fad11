"""Command-line front end: ``trace``, ``bell``, ``verify`` and ``sobolev``.

Exit codes: 0 success, 1 failed verification, 2 bad usage or configuration,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import branch as br
from .checks import DEFAULT_TOLERANCES, run_checks
from .errors import DomainError, PlasmaBranchError
from .gelfand import MIN_BELL_SAMPLES, bell_curve
from .lane_emden import cached_lane_emden
from .radial import ball_geometry, make_grid
from .solver import DEFAULT_GRID_N, solve_sweep
from .spectral import eigen_L, sobolev_Lambda, thresholds

__all__ = ["RunConfig", "TRACE_COLUMNS", "BELL_COLUMNS", "SUMMARY_FIELDS", "main", "trace_lambdas"]

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

TRACE_COLUMNS = ("lambda", "R", "r_lambda", "gamma", "alpha", "mu", "E", "sigma1", "nu1", "regime")
BELL_COLUMNS = ("lambda", "mu", "E")
SUMMARY_FIELDS = ("lambda_t", "mu_t", "E_at_lambda_t", "E0", "E_inf", "lambda_plus")
REFINE_POINTS = 10
REFINE_WINDOW = 0.02


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    p: float = 2.0
    grid_n: int = DEFAULT_GRID_N
    samples: int = 200
    lambda_max_factor: float = 1.0
    output_path: str | None = None
    format: str = "csv"
    tolerances: dict = field(default_factory=dict)
    modes: int = 2

    def validate(self):
        if self.dim < 2:
            raise ConfigError(f"--dim must be at least 2, got {self.dim}")
        if not (math.isfinite(self.p) and self.p > 1):
            raise ConfigError(f"--p must exceed 1, got {self.p}")
        if self.dim >= 3 and self.p >= self.dim / (self.dim - 2):
            raise ConfigError(f"--p must be below {self.dim / (self.dim - 2):g} for dim {self.dim}")
        if self.grid_n < 129 or self.grid_n % 2 == 0:
            raise ConfigError(f"--grid-n must be odd and at least 129, got {self.grid_n}")
        if self.samples < 10:
            raise ConfigError(f"--samples must be at least 10, got {self.samples}")
        if not (math.isfinite(self.lambda_max_factor) and self.lambda_max_factor > 0):
            raise ConfigError("--lambda-max-factor must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.modes < 0:
            raise ConfigError("--modes must be non-negative")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown --tol key(s): {', '.join(sorted(unknown))}")
        return self


# -- formatting ----------------------------------------------------------------


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return "%.17g" % x


def _json_value(x):
    if x is None or isinstance(x, str):
        return x
    x = float(x)
    return x if math.isfinite(x) else None


def _render(fmt, columns, rows, summary=None, summary_fields=None):
    if fmt == "json":
        doc = {"rows": [{c: _json_value(r[c]) for c in columns} for r in rows]}
        doc["summary"] = {k: _json_value(v) for k, v in (summary or {}).items()}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    if summary:
        w.writerow([])
        w.writerow(summary_fields)
        w.writerow([_fmt(summary[k]) for k in summary_fields])
    return buf.getvalue()


def _emit(cfg, text):
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands ------------------------------------------------------------------


def trace_lambdas(lam_plus, samples, factor):
    """``samples`` loads over ``[0, factor lam_plus]``.

    When ``lam_plus`` is inside the range, ten of the samples sit on a
    geometric ladder in the last 2% before it and the rest are uniform.
    """
    lam_max = factor * lam_plus
    if factor < 1:
        return np.linspace(0.0, lam_max, samples)
    uniform = np.linspace(0.0, lam_max, samples - REFINE_POINTS)
    ladder = lam_plus * (1.0 - REFINE_WINDOW * 0.5 ** np.arange(1, REFINE_POINTS + 1))
    return np.unique(np.concatenate([uniform, ladder]))


def _setup(cfg):
    geom = ball_geometry(cfg.dim)
    table = cached_lane_emden(cfg.dim, cfg.p)
    return geom, table, br.lambda_plus(table, geom)


def cmd_trace(cfg):
    geom, table, lp = _setup(cfg)
    lams = trace_lambdas(lp, cfg.samples, cfg.lambda_max_factor)
    points = [br.branch_point(table, geom, x) for x in lams]
    positive = [pt.lam for pt in points if pt.regime == br.POSITIVE]
    grid = make_grid(cfg.dim, geom.R_N, cfg.grid_n)
    sols = solve_sweep(geom, cfg.p, np.array(positive), grid, max_step=lp / 100)
    spectra = {}
    for s in sols:
        rep = eigen_L(geom, cfg.p, s, modes=cfg.modes, radial_modes=1)
        spectra[s.lam] = (rep.sigma1, rep.nu1)
    rows = []
    for pt in points:
        sig, nu = spectra.get(pt.lam, (None, None))
        rows.append(
            {
                "lambda": pt.lam,
                "R": pt.R_of_lambda,
                "r_lambda": pt.r_lambda,
                "gamma": pt.gamma,
                "alpha": pt.alpha,
                "mu": pt.mu,
                "E": pt.energy,
                "sigma1": sig,
                "nu1": nu,
                "regime": pt.regime,
            }
        )
    summary = {"lambda_plus": lp, "dim": cfg.dim, "p": cfg.p, "grid_n": cfg.grid_n}
    _emit(cfg, _render(cfg.format, TRACE_COLUMNS, rows, summary if cfg.format == "json" else None))
    return EXIT_OK


def cmd_bell(cfg):
    if cfg.lambda_max_factor != 1:
        raise ConfigError("bell requires --lambda-max-factor 1")
    if cfg.samples < MIN_BELL_SAMPLES:
        raise ConfigError(f"bell requires --samples >= {MIN_BELL_SAMPLES}")
    geom, table, _ = _setup(cfg)
    curve = bell_curve(table, geom, cfg.samples)
    rows = [
        {"lambda": a, "mu": b, "E": c} for a, b, c in zip(curve.lambdas, curve.mu, curve.E)
    ]
    _emit(cfg, _render(cfg.format, BELL_COLUMNS, rows, curve.summary(), SUMMARY_FIELDS))
    return EXIT_OK


def _corrupt(table):
    return dataclasses.replace(table, u0=table.u0 * (1.0 + 1e-3))


def cmd_verify(cfg, corrupt_table=False):
    geom, table, _ = _setup(cfg)
    if corrupt_table:
        table = _corrupt(table)
    results = run_checks(
        cfg.dim, cfg.p, cfg.grid_n, tolerances=cfg.tolerances, table=table, modes=cfg.modes
    )
    out = io.StringIO()
    for r in results:
        out.write(r.line() + "\n")
    failed = [r.name for r in results if not r.passed]
    out.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
    if failed:
        out.write("failed: " + ", ".join(failed) + "\n")
    _emit(cfg, out.getvalue())
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_sobolev(cfg, t):
    geom = ball_geometry(cfg.dim)
    try:
        value = sobolev_Lambda(geom, t)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    consts = thresholds(geom, cfg.p)
    lp = br.lambda_plus(cached_lane_emden(cfg.dim, cfg.p), geom)
    lines = [
        f"Lambda(t={t:g}) = {value:.15g}",
        f"lambda0(p={cfg.p:g}) = {consts.lambda0:.15g}",
    ]
    if consts.lambda1 is not None:
        lines.append(f"lambda1(p={cfg.p:g}) = {consts.lambda1:.15g}")
    lines.append(f"lambda_plus(p={cfg.p:g}) = {lp:.15g}")
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _tolerance(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VAL, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value in {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, default=2)
    common.add_argument("--p", type=float, default=2.0)
    common.add_argument("--grid-n", type=int, default=DEFAULT_GRID_N)
    common.add_argument("--samples", type=int, default=200)
    common.add_argument("--lambda-max-factor", type=float, default=1.0)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, metavar="PATH")
    common.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="KEY=VAL")
    common.add_argument("--modes", type=int, default=2, metavar="L")

    parser = argparse.ArgumentParser(prog="plasma-branch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("trace", parents=[common], help="tabulate the branch and its spectrum")
    sub.add_parser("bell", parents=[common], help="emit the (mu, E) bell curve")
    v = sub.add_parser("verify", parents=[common], help="run the invariant checks")
    v.add_argument("--corrupt-table", action="store_true", help=argparse.SUPPRESS)
    s = sub.add_parser("sobolev", parents=[common], help="Sobolev constant and thresholds")
    s.add_argument("--t", type=float, default=2.0)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(
            dim=args.dim,
            p=args.p,
            grid_n=args.grid_n,
            samples=args.samples,
            lambda_max_factor=args.lambda_max_factor,
            output_path=args.out,
            format=args.format,
            tolerances=dict(args.tol),
            modes=args.modes,
        ).validate()
        if args.command == "trace":
            return cmd_trace(cfg)
        if args.command == "bell":
            return cmd_bell(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, corrupt_table=args.corrupt_table)
        return cmd_sobolev(cfg, args.t)
    except ConfigError as exc:
        print(f"plasma-branch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlasmaBranchError as exc:
        lam = getattr(exc, "lam", None)
        where = f" at lambda={lam!r}" if lam is not None else ""
        print(f"plasma-branch: numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
