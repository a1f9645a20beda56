#!/usr/bin/env python3
"""schurlift command-line front end.

Results go to stdout (or the -o/--report/--certificate file), diagnostics to
stderr. Exit codes: 0 success or "true", 1 "false" / suite failure / point
outside the realized domain / non-convergence, 2 usage or input errors.

Examples
--------
Short a PSD matrix onto its first block:
    python3 code/schurlift.py schur --input Z.json --pivot-dim 2

Build, evaluate and test a square-root realization:
    python3 code/schurlift.py realize --function sqrt --nodes 96 -o sqrt.json
    python3 code/schurlift.py eval --realization sqrt.json --point X.json
    python3 code/schurlift.py verify --suite monotone --realization sqrt.json \
        --dims 2,3,5 --trials 100 --seed 7 --report monotone.json

Stochastic order and means of measures:
    python3 code/schurlift.py order --mu mu.json --nu nu.json --certificate c.json
    python3 code/schurlift.py mean --spec power:0.5 --measure mu.json
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Sequence

from builders import DEFAULT_NODES, DEFAULT_SPECTRUM, MIN_NODES, FunctionSpec
from measures import MeanSpec, mean_of_measure, solve_power_mean, stochastic_leq
from numlin import DEFAULT_TOL, RANK_TOL, imag_part, is_psd, lambda_min
from pencil import evaluate, evaluate_complex
from serialize import (
    coupling_to_dict,
    decomposition_to_dict,
    dumps,
    matrix_from_dict,
    matrix_to_dict,
    measure_from_dict,
    point_from_dict,
    read_json,
    real_point,
    realization_from_dict,
    realization_to_dict,
    report_to_dict,
    upper_set_to_dict,
    write_json,
)
from shorted import shorted_operator
from verify import SUITES, SuiteConfig, comat_decompose, run_suite

log = logging.getLogger("schurlift")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _emit(obj: dict, path: str | None) -> None:
    if path:
        write_json(path, obj)
        log.info("wrote %s", path)
    else:
        print(dumps(obj), flush=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Schur-complement realizations of operator monotone functions."
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schur", help="Shorted operator of a PSD matrix")
    p.add_argument("--input", required=True, help="MatrixFile with the PSD matrix Z")
    p.add_argument("--pivot-dim", type=int, required=True, help="Size s of the leading block")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help=f"PSD tolerance (default: {DEFAULT_TOL})")
    p.add_argument("--rank-tol", type=float, default=RANK_TOL,
                   help=f"Relative rank cut for Z22 (default: {RANK_TOL})")
    p.set_defaults(handler=cmd_schur)

    p = sub.add_parser("realize", help="Build a realization from a function spec")
    p.add_argument("--function", required=True,
                   help="identity | constant:c | affine:a,b.. | cauchy:lam | sqrt | power:t | "
                        "harmonic:w.. | arithmetic:w.. | geomean:t")
    p.add_argument("--nodes", type=int, default=DEFAULT_NODES,
                   help=f"Quadrature nodes (default: {DEFAULT_NODES})")
    p.add_argument("--weights", type=_float_list, help="Weights for harmonic/arithmetic")
    p.add_argument("--t", type=float, help="Exponent for power/geomean")
    p.add_argument("--interval", type=_float_list, default=list(DEFAULT_SPECTRUM),
                   help="Target spectral interval a,b (default: 0.01,100)")
    p.add_argument("-o", "--output", help="RealizationFile to write (default: stdout)")
    p.set_defaults(handler=cmd_realize)

    p = sub.add_parser("eval", help="Evaluate a realization at a point")
    p.add_argument("--realization", required=True)
    p.add_argument("--point", required=True, help="Point file (k matrices) or a single MatrixFile")
    p.add_argument("--complex", action="store_true", help="Evaluate the analytic continuation")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("verify", help="Run a randomized property suite")
    p.add_argument("--suite", required=True, help=f"One of: {', '.join(SUITES)}")
    p.add_argument("--realization", required=True)
    p.add_argument("--dims", type=_int_list, default=[2, 3, 5])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--interval", type=_float_list, default=[0.1, 10.0],
                   help="Spectral interval of sampled points (default: 0.1,10)")
    p.add_argument("--report", help="ReportFile to write (default: stdout)")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("order", help="Decide the stochastic order mu <= nu")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--certificate", help="Certificate file to write (default: stdout)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(handler=cmd_order)

    p = sub.add_parser("mean", help="Operator mean of a measure")
    p.add_argument("--spec", required=True, help="power:t | arithmetic | harmonic")
    p.add_argument("--measure", required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(handler=cmd_mean)

    p = sub.add_parser("decompose", help="Matrix convex hull certificate of a PD tuple")
    p.add_argument("--point", required=True)
    p.add_argument("-o", "--output", help="Certificate file to write (default: stdout)")
    p.set_defaults(handler=cmd_decompose)
    return parser


def validate_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if getattr(args, "tol", 1.0) <= 0:
        parser.error("--tol must be positive")
    if args.command == "schur" and args.pivot_dim < 1:
        parser.error("--pivot-dim must be at least 1")
    if args.command == "realize":
        if args.nodes < MIN_NODES:
            parser.error(f"--nodes must be at least {MIN_NODES}")
        if len(args.interval) != 2:
            parser.error("--interval takes two numbers a,b")
    if args.command == "verify":
        if args.trials < 1:
            parser.error("--trials must be at least 1")
        if not args.dims or any(d < 1 for d in args.dims):
            parser.error("--dims must list positive dimensions")
        if len(args.interval) != 2:
            parser.error("--interval takes two numbers a,b")


def cmd_schur(args: argparse.Namespace) -> int:
    z = matrix_from_dict(read_json(args.input))
    result = shorted_operator(z, args.pivot_dim, rank_tol=args.rank_tol, tol=args.tol)
    log.debug("schur: retained rank %d", result.rank_used)
    print(dumps(matrix_to_dict(result.short)), flush=True)
    return 0


def _function_spec(args: argparse.Namespace) -> FunctionSpec:
    tag, params = FunctionSpec.split(args.function)
    extra = args.weights if args.weights is not None else ([args.t] if args.t is not None else None)
    if extra is None:
        return FunctionSpec(tag, params)
    if params:
        raise ValueError(f"{args.function!r} already carries parameters; drop --weights/--t")
    return FunctionSpec(tag, tuple(extra))


def cmd_realize(args: argparse.Namespace) -> int:
    spec = _function_spec(args)
    r = spec.build(nodes=args.nodes, interval=tuple(args.interval))
    log.info("realize: %s -> k=%d, m=%d", spec, r.k, r.m)
    _emit(realization_to_dict(r), args.output)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    r = realization_from_dict(read_json(args.realization))
    items = point_from_dict(read_json(args.point))
    if args.complex:
        value = evaluate_complex(r, items)
        # Upper half plane maps to upper, lower to lower.
        sign = 1.0 if lambda_min(imag_part(items[0])) > 0 else -1.0
        if not is_psd(sign * imag_part(value), tol=args.tol):
            raise RuntimeError(f"Im F(Z) left the closed half plane: lambda_min "
                               f"{lambda_min(sign * imag_part(value)):.3e}")
    else:
        value = evaluate(r, real_point(items), tol=args.tol)
    print(dumps(matrix_to_dict(value)), flush=True)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    if args.suite not in SUITES:
        raise ValueError(f"unknown suite {args.suite!r}; expected one of {', '.join(SUITES)}")
    r = realization_from_dict(read_json(args.realization))
    cfg = SuiteConfig(dims=tuple(args.dims), trials=args.trials, seed=args.seed,
                      tol=args.tol, interval=tuple(args.interval))
    started = time.perf_counter()
    report = run_suite(args.suite, r, cfg)
    log.info("verify: %s took %.2fs", args.suite, time.perf_counter() - started)
    _emit(report_to_dict(report), args.report)
    return 0 if report.passed else 1


def cmd_order(args: argparse.Namespace) -> int:
    mu = measure_from_dict(read_json(args.mu))
    nu = measure_from_dict(read_json(args.nu))
    ordered, evidence = stochastic_leq(mu, nu, tol=args.tol)
    log.info("order: mu <= nu is %s", "true" if ordered else "false")
    _emit(coupling_to_dict(evidence) if ordered else upper_set_to_dict(evidence), args.certificate)
    return 0 if ordered else 1


def cmd_mean(args: argparse.Namespace) -> int:
    spec = MeanSpec.parse(args.spec)
    mu = measure_from_dict(read_json(args.measure))
    if spec.family == "power":
        canon = mu.canonical()
        result = solve_power_mean(canon.weights, canon.atoms, spec.t)
        log.info("mean: %s residual %.3e after %d iterations", spec, result.residual, result.iterations)
        value = result.mean
    else:
        value = mean_of_measure(spec, mu)
    print(dumps(matrix_to_dict(value)), flush=True)
    return 0


def cmd_decompose(args: argparse.Namespace) -> int:
    x = real_point(point_from_dict(read_json(args.point)))
    cert = comat_decompose(x)
    cert.check(x)
    log.info("decompose: %d terms on %d rows", len(cert.sizes), cert.isometry.shape[0])
    _emit(decomposition_to_dict(cert), args.output)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    validate_args(parser, args)
    logging.basicConfig(format="[%(name)s] %(message)s", stream=sys.stderr)
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)

    try:
        return args.handler(args)
    except BrokenPipeError:
        return 0
    except RuntimeError as exc:
        print(f"[error] {exc}", file=sys.stderr, flush=True)
        return 1
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"[input-error] {exc}", file=sys.stderr, flush=True)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
