#!/usr/bin/env python3
"""
schurlift acceptance runner

One-command sweep over every numerical check the project promises:
shorting kernel, builders against their oracles, the randomized property
suites on every built realization, the measure machinery and the CLI
contract. Each check prints one line; the run exits 0 only if all pass.

Examples:
  python3 code/acceptance_runner.py --mode quick
  python3 code/acceptance_runner.py --mode full --seed 3
"""

from __future__ import annotations

import argparse
import contextlib
import io
import logging
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

import schurlift
from builders import FunctionSpec
from measures import (
    DiscreteMeasure,
    MeanSpec,
    check_directsum_coupling,
    check_stochastic_monotone,
    couplings_sample,
    mean_of_measure,
    monotone_representation,
    order_pool_agreement,
    random_measure,
    solve_power_mean,
    stochastic_leq,
)
from numlin import (
    MatrixTuple,
    apply_scalar_function,
    lambda_min,
    opnorm,
    pd_power,
    random_commuting_tuple,
    random_pd,
    random_pd_tuple,
    random_psd,
    weighted_geometric_mean,
)
from pencil import evaluate
from shorted import shorted_operator, variational_infimum
from verify import SuiteConfig, check_scalar_monotone, comat_decompose, run_suite

REALIZATIONS = (
    "identity", "cauchy:1", "sqrt", "power:0.3",
    "harmonic:0.3,0.7", "arithmetic:0.5,0.5", "geomean:0.5",
)
SUITE_NAMES = ("axioms", "monotone", "concave", "jensen", "herglotz", "hypograph")


@dataclass(frozen=True)
class Budget:
    instances: int
    suite_trials: int
    pool: int


BUDGETS = {
    "quick": Budget(instances=10, suite_trials=4, pool=8),
    "full": Budget(instances=100, suite_trials=167, pool=30),
}


@dataclass
class Outcome:
    name: str
    passed: bool
    detail: str


def banner(mode: str) -> None:
    print("\n===================================")
    print(" schurlift acceptance runner")
    print("===================================")
    print(f"Mode: {mode}\n")


# ---------- checks ----------

def check_shorting(budget: Budget, rng: np.random.Generator) -> Outcome:
    worst_oracle = worst_order = 0.0
    for _ in range(2 * budget.instances):
        z = random_psd(8, seed=rng)
        short = shorted_operator(z, 4).short
        for _ in range(20):
            v = rng.standard_normal(4)
            v /= np.linalg.norm(v)
            worst_oracle = max(worst_oracle, abs(v @ short @ v - variational_infimum(z, v)) / opnorm(z))
        bigger = z + random_psd(8, scale=rng.uniform(0.0, 1.0), seed=rng)
        gap = lambda_min(shorted_operator(bigger, 4).short - short) / opnorm(bigger)
        worst_order = min(worst_order, gap)
    ok = worst_oracle <= 1e-8 and worst_order >= -1e-9
    return Outcome("shorting", ok, f"oracle {worst_oracle:.2e}, order {worst_order:.2e}")


def _power_error(nodes: int, mats: list[np.ndarray], t: float = 0.5) -> float:
    r = FunctionSpec("power", (t,)).build(nodes=nodes)
    return max(opnorm(evaluate(r, a) - pd_power(a, t)) / opnorm(pd_power(a, t)) for a in mats)


def check_quadrature(budget: Budget, rng: np.random.Generator) -> Outcome:
    mats = [random_pd(6, (0.1, 10.0), rng) for _ in range(budget.instances)]
    accuracy = _power_error(96, mats)
    sweep_set = mats[: max(5, budget.instances // 10)]
    sweep = [_power_error(nodes, sweep_set) for nodes in (16, 32, 64, 128, 256)]
    monotone = all(b <= a + 1e-12 for a, b in zip(sweep, sweep[1:]))
    ok = accuracy <= 1e-6 and monotone
    return Outcome("quadrature", ok, f"N=96 error {accuracy:.2e}, sweep " + " ".join(f"{e:.1e}" for e in sweep))


def check_exact_builders(budget: Budget, rng: np.random.Generator) -> Outcome:
    worst_h = worst_a = 0.0
    for _ in range(budget.instances):
        k = int(rng.integers(1, 5))
        n = int(rng.integers(1, 7))
        w = rng.dirichlet(np.ones(k))
        w /= w.sum()
        x = random_pd_tuple(k, n, (0.1, 10.0), rng)
        direct_h = np.linalg.inv(sum(wi * np.linalg.inv(xi) for wi, xi in zip(w, x)))
        got_h = evaluate(FunctionSpec("harmonic", tuple(w)).build(), x)
        worst_h = max(worst_h, opnorm(got_h - direct_h) / opnorm(direct_h))
        got_a = evaluate(FunctionSpec("arithmetic", tuple(w)).build(), x)
        direct_a = sum(wi * xi for wi, xi in zip(w, x))
        worst_a = max(worst_a, opnorm(got_a - direct_a) / opnorm(direct_a))
    ok = worst_h <= 1e-10 and worst_a <= 1e-14
    return Outcome("exact-builders", ok, f"harmonic {worst_h:.2e}, arithmetic {worst_a:.2e}")


def check_geomean(budget: Budget, rng: np.random.Generator) -> Outcome:
    r = FunctionSpec("geomean", (0.5,)).build(nodes=128)
    worst = 0.0
    for _ in range(budget.instances):
        a = random_pd(4, (0.5, 5.0), rng)
        b = random_pd(4, (0.5, 5.0), rng)
        oracle = weighted_geometric_mean(a, b, 0.5)
        worst = max(worst, opnorm(evaluate(r, MatrixTuple((a, b))) - oracle) / opnorm(oracle))
    return Outcome("geomean", worst <= 1e-5, f"relative error {worst:.2e}")


def check_suites(budget: Budget, seed: int) -> list[Outcome]:
    cfg = SuiteConfig(dims=(2, 3, 5), trials=budget.suite_trials, seed=seed, tol=1e-8)
    out = []
    for text in REALIZATIONS:
        r = FunctionSpec.parse(text).build()
        for name in SUITE_NAMES:
            report = run_suite(name, r, cfg)
            out.append(Outcome(f"{name}[{text}]", report.passed,
                               f"worst {report.worst_violation:.2e}, skipped {report.skipped}"))
    square = check_scalar_monotone(lambda x: x * x, 1, cfg)
    out.append(Outcome("negative-control[x^2]", not square.passed,
                       f"failures {square.failures} (expected > 0)"))
    return out


def check_hull(budget: Budget, rng: np.random.Generator) -> Outcome:
    worst_iso = worst_rec = 0.0
    positive = True
    for _ in range(budget.instances):
        x = random_pd_tuple(int(rng.integers(1, 4)), int(rng.integers(1, 6)), (0.1, 10.0), rng)
        res = comat_decompose(x).residuals(x)
        worst_iso = max(worst_iso, res["isometry"])
        worst_rec = max(worst_rec, res["reconstruction"])
        positive &= res["min_entry"] > 0
    ok = worst_iso <= 1e-12 and worst_rec <= 1e-10 and positive
    return Outcome("hull", ok, f"isometry {worst_iso:.2e}, reconstruction {worst_rec:.2e}")


def _ordered_pool(budget: Budget, rng: np.random.Generator) -> list[DiscreteMeasure]:
    """Measures with a shared base so that many pairs are comparable."""
    base = [random_pd(3, (0.5, 2.0), rng) for _ in range(5)]
    pool = []
    for _ in range(budget.pool):
        size = int(rng.integers(1, 6))
        picks = rng.choice(len(base), size=size, replace=False)
        atoms = [base[p] + rng.uniform(0.0, 2.0) * np.eye(3) for p in picks]
        pool.append(DiscreteMeasure(tuple(atoms), rng.dirichlet(np.ones(size))))
    return pool


def check_strassen(budget: Budget, rng: np.random.Generator) -> Outcome:
    pool = _ordered_pool(budget, rng)
    disagreements = order_pool_agreement(pool)
    representation_ok = True
    ordered_pairs = 0
    for mu in pool:
        for nu in pool:
            ordered, coupling = stochastic_leq(mu, nu)
            if not ordered:
                continue
            ordered_pairs += 1
            xi_mu, xi_nu = monotone_representation(mu, nu, coupling)
            representation_ok &= all(
                lambda_min(nu.atoms[j] - mu.atoms[i]) >= -1e-9 * opnorm(nu.atoms[j])
                for i, j in zip(xi_mu.indices, xi_nu.indices)
            )
            representation_ok &= np.allclose(xi_mu.pushforward_weights(mu.size), mu.weights, rtol=0, atol=1e-12)
    ok = not disagreements and representation_ok
    return Outcome("strassen", ok, f"{len(pool) ** 2} pairs, {ordered_pairs} ordered, "
                                   f"{len(disagreements)} disagreements")


def check_means(budget: Budget, seed: int, rng: np.random.Generator) -> Outcome:
    worst_residual = worst_commuting = 0.0
    exact = True
    for _ in range(budget.instances):
        mu = random_measure(int(rng.integers(1, 5)), 3, (0.1, 10.0), rng)
        result = solve_power_mean(mu.weights, mu.atoms, 0.5)
        worst_residual = max(worst_residual, result.residual)
        exact &= np.array_equal(mean_of_measure(MeanSpec("power", 0.5), mu),
                                mean_of_measure(MeanSpec("power", 0.5), mu.permute(rng.permutation(mu.size))))
        exact &= np.array_equal(mean_of_measure(MeanSpec("power", 0.5), mu),
                                mean_of_measure(MeanSpec("power", 0.5), mu.split(0, int(rng.integers(2, 8)))))
        arithmetic = sum(w * a for w, a in zip(mu.weights, mu.atoms))
        exact &= np.allclose(solve_power_mean(mu.weights, mu.atoms, 1.0).mean, arithmetic, rtol=0, atol=1e-15)
        x = random_commuting_tuple(3, 3, (0.1, 10.0), rng)
        w = rng.dirichlet(np.ones(3))
        w /= w.sum()
        oracle = apply_scalar_function(lambda a, b, c: (w[0] * a ** 0.5 + w[1] * b ** 0.5 + w[2] * c ** 0.5) ** 2, x)
        got = solve_power_mean(w, x.items, 0.5).mean
        worst_commuting = max(worst_commuting, opnorm(got - oracle) / opnorm(oracle))

    cfg = SuiteConfig(dims=(3,), trials=2 * budget.instances, seed=seed, tol=1e-8)
    monotone = check_stochastic_monotone(MeanSpec("power", 0.5), cfg)
    direct_ok = True
    for _ in range(max(2, budget.instances // 10)):
        mu = random_measure(2, 2, (0.5, 5.0), rng)
        nu = random_measure(2, 2, (0.5, 5.0), rng)
        report = check_directsum_coupling(MeanSpec("power", 0.5), mu, nu,
                                          couplings_sample(mu, nu, 11, seed=rng))
        direct_ok &= report.passed
    ok = worst_residual <= 1e-10 and worst_commuting <= 1e-9 and exact and monotone.passed and direct_ok
    return Outcome("means", ok, f"residual {worst_residual:.1e}, commuting {worst_commuting:.1e}, "
                                f"monotone worst {monotone.worst_violation:.1e}")


def check_cli(seed: int) -> Outcome:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        quiet = io.StringIO()
        with contextlib.redirect_stdout(quiet):
            codes = [
                schurlift.main(["realize", "--function", "harmonic:0.5,0.5", "-o", str(tmp / "h.json")]),
                schurlift.main(["verify", "--suite", "monotone", "--realization", str(tmp / "h.json"),
                                "--trials", "3", "--seed", str(seed), "--report", str(tmp / "a.json")]),
                schurlift.main(["verify", "--suite", "monotone", "--realization", str(tmp / "h.json"),
                                "--trials", "3", "--seed", str(seed), "--report", str(tmp / "b.json")]),
                schurlift.main(["realize", "--function", "power:1.5", "-o", str(tmp / "bad.json")]),
            ]
        same = (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()
    ok = codes == [0, 0, 0, 2] and same
    return Outcome("cli", ok, f"exit codes {codes}, reports identical: {same}")


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the schurlift acceptance checks.")
    parser.add_argument("--mode", choices=tuple(BUDGETS), default="quick",
                        help="quick: reduced trial counts; full: acceptance-scale counts")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    logging.basicConfig(format="[%(name)s] %(message)s", stream=sys.stderr, level=logging.WARNING)

    banner(args.mode)
    budget = BUDGETS[args.mode]
    rng = np.random.default_rng(args.seed)
    started = time.perf_counter()

    checks: list[Callable[[], Outcome | list[Outcome]]] = [
        lambda: check_shorting(budget, rng),
        lambda: check_quadrature(budget, rng),
        lambda: check_exact_builders(budget, rng),
        lambda: check_geomean(budget, rng),
        lambda: check_suites(budget, args.seed),
        lambda: check_hull(budget, rng),
        lambda: check_strassen(budget, rng),
        lambda: check_means(budget, args.seed, rng),
        lambda: check_cli(args.seed),
    ]
    outcomes: list[Outcome] = []
    for check in checks:
        result = check()
        for outcome in result if isinstance(result, list) else [result]:
            print(f"[{'ok' if outcome.passed else 'FAIL':>4}] {outcome.name:<32} {outcome.detail}", flush=True)
            outcomes.append(outcome)

    failed = [o.name for o in outcomes if not o.passed]
    print(f"\n[runner] {len(outcomes) - len(failed)}/{len(outcomes)} checks passed "
          f"in {time.perf_counter() - started:.1f}s", flush=True)
    if failed:
        print("[runner] failing: " + ", ".join(failed), flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
