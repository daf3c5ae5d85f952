"""Command-line interface.

Exit codes: 0 success, 2 when a check detects an assumption violation,
1 for usage, input or other errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .blocking import blocked_autocov
from .deterministic import Case, recover_deterministic, trend_moments
from .errors import AssumptionViolation, RemisError
from .params import (
    TOL_RANK,
    TOL_UNIT,
    ModelDims,
    PerturbationConfig,
    check_all,
    param_distance,
    perturb_to_generic,
    random_system,
)
from .retrieval import retrieve
from .simulate import SimConfig, monte_carlo, observe_mixed, simulate_path
from .statespace import hf_moments

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parse_dims(text):
    try:
        parts = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected five integers n,nf,r,p,N")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("expected five integers n,nf,r,p,N")
    return parts


def _dims(args, fallback=None) -> ModelDims:
    if args.dims is not None:
        n, nf, r, p, N = args.dims
        return ModelDims(n, nf, r, p, N, args.scheme or "stock")
    if fallback is None:
        raise UsageError("--dims is required")
    if args.scheme and fallback.scheme.value != args.scheme:
        d = fallback.to_dict()
        d["scheme"] = args.scheme
        return io.dims_from_dict(d)
    return fallback


def _load_theta(args):
    if not args.theta:
        raise UsageError("--theta is required")
    theta, dims, extras = io.load_theta(args.theta, args.scheme)
    if args.dims is not None:
        dims = _dims(args)
    return theta, dims, extras


def _tols(args):
    return {"tol_rank": args.tol_rank, "tol_unit": args.tol_unit}


def _emit(obj, args):
    io.write_json(obj, args.out)


# -- subcommands ----------------------------------------------------------

def cmd_gen(args):
    dims = _dims(args)
    theta = random_system(dims, seed=args.seed)
    _emit(io.theta_to_dict(theta, dims), args)
    return EXIT_OK


def cmd_check(args):
    theta, dims, _ = _load_theta(args)
    rep = check_all(theta, dims, **_tols(args))
    print(rep.table(), file=sys.stderr)
    _emit({"passed": rep.passed, "failed": rep.failed(), "conditions": rep.to_dict()}, args)
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_moments(args):
    theta, dims, _ = _load_theta(args)
    if args.high_frequency:
        _emit(io.hf_moments_to_dict(hf_moments(theta, args.H)), args)
    else:
        _emit(io.autocov_to_dict(blocked_autocov(theta, dims, args.H), theta.beta), args)
    return EXIT_OK


def cmd_retrieve(args):
    if not args.gamma:
        raise UsageError("--gamma is required")
    d = io.read_json(args.gamma)
    dims = _dims(args, io.dims_from_dict(d["dims"]) if "dims" in d else None)
    gamma, beta = io.autocov_from_dict(d, dims)
    if args.theta:
        beta = io.load_theta(args.theta)[0].beta
    if beta is None:
        raise UsageError("beta is needed: include it in the --gamma file or pass --theta")
    res = retrieve(gamma, beta, dims, strict=not args.plugin, hankel_rows=args.hankel_rows)
    _emit(io.retrieval_to_dict(res, dims), args)
    return EXIT_OK


def cmd_roundtrip(args):
    theta, dims, _ = _load_theta(args)
    res = retrieve(blocked_autocov(theta, dims, args.H), theta.beta, dims)
    est = res.theta
    errs = {
        "alpha": float(np.max(np.abs(est.alpha - theta.alpha))),
        "phi": float(np.max(np.abs(est.phi - theta.phi))),
        "sigma": float(np.max(np.abs(est.sigma - theta.sigma))),
    }
    errs["max"] = param_distance(est, theta)
    print(f"max error {errs['max']:.3e}", file=sys.stderr)
    _emit({"errors": errs, "scheme": dims.scheme.value}, args)
    return EXIT_OK


def cmd_simulate(args):
    theta, dims, extras = _load_theta(args)
    T = int(args.T[0]) if args.T else 1000
    path = simulate_path(theta, extras["deterministic"], SimConfig(T, seed=args.seed),
                         rng=np.random.default_rng(args.seed))
    ms = observe_mixed(path, dims)
    if args.format == "csv":
        text = io.mixed_sample_to_csv(ms)
        if args.out in (None, "-"):
            print(text, end="")
        else:
            Path(args.out).write_text(text)
    else:
        _emit(io.mixed_sample_to_dict(ms), args)
    return EXIT_OK


def cmd_perturb(args):
    theta, dims, _ = _load_theta(args)
    out = perturb_to_generic(theta, PerturbationConfig(eps=args.eps, seed=args.seed), dims,
                             tol_unit=args.tol_unit)
    _emit(io.theta_to_dict(out, dims), args)
    return EXIT_OK


def cmd_deterministic(args):
    theta, dims, extras = _load_theta(args)
    if args.trend:
        tm = io.trend_from_dict(io.read_json(args.trend))
    else:
        det = extras["deterministic"]
        mu0, mu1 = det.effective(theta.alpha) if det is not None else (extras["mu0"], extras["mu1"])
        tm = trend_moments(theta, mu0, mu1)
    spec = recover_deterministic(Case(args.case), tm, theta)
    _emit({"trend_moments": tm.to_dict(), "deterministic": spec.to_dict(), "residuals": spec.residuals}, args)
    return EXIT_OK


def cmd_monte_carlo(args):
    theta, dims, _ = _load_theta(args)
    grid = tuple(int(t) for t in args.T) if args.T else (10_000, 100_000)
    rep = monte_carlo(theta, dims, T_grid=grid, reps=args.reps, seed=args.seed, H=args.H,
                      hankel_rows=args.hankel_rows)
    text = rep.to_csv()
    if args.out in (None, "-"):
        print(text, end="")
    else:
        Path(args.out).write_text(text)
    for T, s in rep.summary().items():
        print(f"T={T}: median {s['median']:.4g}, iqr {s['iqr']:.4g}, failures {s['failures']}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "gen": (cmd_gen, "draw a random admissible parameter set"),
    "check": (cmd_check, "evaluate the identifiability conditions"),
    "moments": (cmd_moments, "exact blocked (or high-frequency) autocovariances"),
    "retrieve": (cmd_retrieve, "recover parameters from blocked autocovariances"),
    "roundtrip": (cmd_roundtrip, "moments then retrieval; report the parameter error"),
    "simulate": (cmd_simulate, "simulate and observe a mixed-frequency sample"),
    "perturb": (cmd_perturb, "move parameters into the identifiable set"),
    "deterministic": (cmd_deterministic, "recover constants and trends from trend moments"),
    "monte_carlo": (cmd_monte_carlo, "plug-in retrieval on simulated samples, CSV report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="remis", description="Mixed-frequency cointegrated VAR identification toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--theta", help="parameter JSON file")
        p.add_argument("--gamma", help="blocked autocovariance JSON file")
        p.add_argument("--dims", type=_parse_dims, help="n,nf,r,p,N")
        p.add_argument("--scheme", choices=["stock", "flow"])
        p.add_argument("--tol-rank", type=float, default=TOL_RANK)
        p.add_argument("--tol-unit", type=float, default=TOL_UNIT)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reps", type=int, default=20)
        p.add_argument("--T", type=float, nargs="+", help="sample size(s)")
        p.add_argument("--H", type=int, help="number of blocked lags")
        p.add_argument("--out", help="output path (default stdout)")
        if name == "retrieve":
            p.add_argument("--plugin", action="store_true", help="report residuals instead of failing (sample moments)")
        if name in ("retrieve", "monte_carlo"):
            p.add_argument("--hankel-rows", type=int)
        if name == "moments":
            p.add_argument("--high-frequency", action="store_true")
        if name == "simulate":
            p.add_argument("--format", choices=["json", "csv"], default="json")
        if name == "perturb":
            p.add_argument("--eps", type=float, default=1e-3)
        if name == "deterministic":
            p.add_argument("--case", choices=[c.value for c in Case], required=True)
            p.add_argument("--trend", help="trend-moment JSON {g0,g1,h0,h1}")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_ERROR
        return COMMANDS[args.command][0](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (RemisError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
