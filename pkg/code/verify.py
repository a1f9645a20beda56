#!/usr/bin/env python3
"""Seeded randomized property suites for realized (and scalar) functions.

Every suite walks `cfg.dims`, runs `cfg.trials` trials per dimension and
derives each trial's generator from `cfg.seed + trial index`, so a report is
a pure function of (target, cfg). A trial yields a signed violation:

    violation = lambda_min(rhs - lhs) / max(1, |F|)     (inequalities)
    violation = -|lhs - rhs| / max(1, |F|)             (identities)

and fails when violation < -cfg.tol. Points outside the realized domain are
counted as skips, not failures.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.linalg

from numlin import (
    DEFAULT_INTERVAL,
    DimensionError,
    FunctionDomainError,
    MatrixTuple,
    NotPSDError,
    apply_scalar_function,
    hermitian,
    imag_part,
    lambda_min,
    make_dominated_pair,
    opnorm,
    random_commuting_tuple,
    random_contraction,
    random_isometry,
    random_pd_tuple,
    random_psd,
    random_unitary,
    random_upper_half_tuple,
)
from pencil import OutsideDomainError, PencilRealization, evaluate, evaluate_complex
from shorted import SingularPivotError

log = logging.getLogger("verify")

REPORT_VERSION = 1
MAX_JENSEN_DIM = 8
ISOMETRY_CHECK_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10
# F(Z*) = F(Z)* is checked tighter than the positivity of Im F.
SYMMETRY_TOL = 1e-10
# Normalized violation recorded when a trial breaks down (singular pivot).
BREAKDOWN_VIOLATION = -1.0


class CertificateError(RuntimeError):
    """A hull-decomposition certificate failed its own reconstruction check."""


@dataclass(frozen=True)
class SuiteConfig:
    dims: tuple = (2, 3, 5)
    trials: int = 50
    seed: int = 0
    tol: float = 1e-8
    interval: tuple = DEFAULT_INTERVAL

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"dims must be positive integers, got {self.dims}")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        lo, hi = (float(v) for v in self.interval)
        if not 0.0 < lo <= hi:
            raise ValueError(f"spectral interval must satisfy 0 < a <= b, got {self.interval}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "interval", (lo, hi))


@dataclass
class VerificationReport:
    suite: str
    dims: tuple
    trials: int
    seed: int
    tol: float
    failures: int = 0
    skipped: int = 0
    worst_violation: float = 0.0
    first_failing_seed: int | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "dims": list(self.dims),
            "trials": self.trials,
            "failures": self.failures,
            "skipped": self.skipped,
            "worst_violation": self.worst_violation,
            "first_failing_seed": self.first_failing_seed,
            "seed": self.seed,
            "tol": self.tol,
            "pass": self.passed,
            "version": REPORT_VERSION,
        }


@dataclass
class _Tally:
    suite: str
    cfg: SuiteConfig
    worst: float = math.inf
    failures: int = 0
    skipped: int = 0
    first_failing_seed: int | None = None

    def trials(self) -> Iterator[tuple[int, int, np.random.Generator]]:
        index = 0
        for n in self.cfg.dims:
            for _ in range(self.cfg.trials):
                seed = self.cfg.seed + index
                index += 1
                yield n, seed, np.random.default_rng(seed)

    def record(self, seed: int, violation: float) -> None:
        self.worst = min(self.worst, violation)
        if violation < -self.cfg.tol:
            self.failures += 1
            if self.first_failing_seed is None:
                self.first_failing_seed = seed
                log.debug("%s: first failure at seed %d (violation %.3e)", self.suite, seed, violation)

    def skip(self, seed: int, reason: str) -> None:
        self.skipped += 1
        log.warning("%s: trial seed %d skipped: %s", self.suite, seed, reason)

    def report(self) -> VerificationReport:
        return VerificationReport(
            suite=self.suite, dims=self.cfg.dims, trials=self.cfg.trials,
            seed=self.cfg.seed, tol=self.cfg.tol,
            failures=self.failures, skipped=self.skipped,
            worst_violation=0.0 if math.isinf(self.worst) else float(self.worst),
            first_failing_seed=self.first_failing_seed,
        )


def run_trials(suite: str, cfg: SuiteConfig,
               trial: Callable[[int, np.random.Generator], float | None]) -> VerificationReport:
    """Drive `trial(n, rng)` over the configured dimensions; None means skip."""
    tally = _Tally(suite, cfg)
    for n, seed, rng in tally.trials():
        try:
            violation = trial(n, rng)
        except (OutsideDomainError, FunctionDomainError) as exc:
            tally.skip(seed, str(exc))
            continue
        if violation is None:
            tally.skip(seed, "no admissible sample")
            continue
        tally.record(seed, violation)
    report = tally.report()
    log.info("%s: %s (%d failures, %d skipped, worst %.3e)", suite,
             "pass" if report.passed else "FAIL", report.failures, report.skipped,
             report.worst_violation)
    return report


def _scale(*mats: np.ndarray) -> float:
    return max(1.0, *(opnorm(m) for m in mats))


def _order_violation(lower: np.ndarray, upper: np.ndarray) -> float:
    """Normalized lambda_min(upper - lower)."""
    return lambda_min(upper - lower) / _scale(lower, upper)


def _realization_evaluator(r: PencilRealization) -> Callable[[MatrixTuple], np.ndarray]:
    return lambda x: evaluate(r, x)


def _scalar_evaluator(f: Callable[..., np.ndarray]) -> Callable[[MatrixTuple], np.ndarray]:
    return lambda x: apply_scalar_function(f, x)


# ---------- free-function axioms ----------

def check_free_axioms(r: PencilRealization, cfg: SuiteConfig) -> VerificationReport:
    """Unitary invariance (real orthogonal and complex U) and direct-sum invariance."""
    f = _realization_evaluator(r)

    def trial(n: int, rng: np.random.Generator) -> float:
        x = random_pd_tuple(r.k, n, cfg.interval, rng)
        y = random_pd_tuple(r.k, int(rng.integers(1, n + 1)), cfg.interval, rng)
        u = random_unitary(n, rng, complex_=bool(rng.integers(2)))
        fx, fy = f(x), f(y)
        unitary_gap = opnorm(f(x.conjugate(u)) - u.conj().T @ fx @ u)
        sum_gap = opnorm(f(x.direct_sum(y)) - scipy.linalg.block_diag(fx, fy))
        return -max(unitary_gap, sum_gap) / _scale(fx, fy)

    return run_trials("axioms", cfg, trial)


# ---------- monotonicity ----------

def check_monotone(r: PencilRealization, cfg: SuiteConfig) -> VerificationReport:
    """F(X') <= F(Y) for dominated pairs X' <= Y built by scalar shifts."""
    f = _realization_evaluator(r)

    def trial(n: int, rng: np.random.Generator) -> float:
        y = random_pd_tuple(r.k, n, cfg.interval, rng)
        x = random_pd_tuple(r.k, n, cfg.interval, rng)
        x, y = make_dominated_pair(x, y)
        return _order_violation(f(x), f(y))

    return run_trials("monotone", cfg, trial)


def check_scalar_monotone(fn: Callable[..., np.ndarray], k: int, cfg: SuiteConfig) -> VerificationReport:
    """Global operator monotonicity of a scalar k-variable function on commuting tuples."""
    f = _scalar_evaluator(fn)

    def trial(n: int, rng: np.random.Generator) -> float:
        y = random_commuting_tuple(k, n, cfg.interval, rng)
        x = random_commuting_tuple(k, n, cfg.interval, rng)
        x, y = make_dominated_pair(x, y)
        return _order_violation(f(x), f(y))

    return run_trials("scalar-monotone", cfg, trial)


# ---------- concavity and Jensen ----------

def check_concave(r: PencilRealization, cfg: SuiteConfig) -> VerificationReport:
    """Midpoint concavity F((X+Y)/2) >= (F(X) + F(Y))/2."""
    f = _realization_evaluator(r)

    def trial(n: int, rng: np.random.Generator) -> float:
        x = random_pd_tuple(r.k, n, cfg.interval, rng)
        y = random_pd_tuple(r.k, n, cfg.interval, rng)
        return _order_violation((f(x) + f(y)) / 2, f(x.midpoint(y)))

    return run_trials("concave", cfg, trial)


def check_jensen_isometry(r: PencilRealization, cfg: SuiteConfig) -> VerificationReport:
    """F(W*XW) >= W* F(X) W; even trials use isometries, odd trials contractions."""
    f = _realization_evaluator(r)
    counter = iter(range(len(cfg.dims) * cfg.trials))

    def trial(n: int, rng: np.random.Generator) -> float:
        big = int(rng.integers(n, max(n, MAX_JENSEN_DIM) + 1))
        if next(counter) % 2 == 0:
            w = random_isometry(n, big, rng).matrix
        else:
            w = random_contraction(n, big, rng).matrix
        x = random_pd_tuple(r.k, big, cfg.interval, rng)
        return _order_violation(w.T @ f(x) @ w, f(x.compress(w)))

    return run_trials("jensen", cfg, trial)


# ---------- hypograph saturation ----------

def _composition(total: int, parts: int, rng: np.random.Generator) -> list[int]:
    """Random split of `total` into `parts` positive integers."""
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False)) if parts > 1 else []
    edges = [0, *cuts, total]
    return [int(b - a) for a, b in zip(edges, edges[1:])]


def structured_hypograph_point(k: int, n: int, big: int, interval: Sequence[float],
                               rng: np.random.Generator) -> tuple[MatrixTuple, np.ndarray]:
    """Diagonal commuting X on dimension `big` and an isometry V: n -> big with
    V* X V commuting.

    For k = 1 any isometry works. Otherwise the coordinates are cut into
    consecutive groups; inside a group every coordinate except one designated
    coordinate is a constant, and V is block diagonal with a random isometry
    per group.
    """
    lo, hi = interval
    if big < n:
        raise DimensionError(f"cannot compress dimension {big} onto {n}")
    if k == 1:
        x = MatrixTuple((np.diag(rng.uniform(lo, hi, size=big)),), commuting=True)
        return x, random_isometry(n, big, rng).matrix

    groups = int(rng.integers(1, n + 1))
    cols = _composition(n, groups, rng)
    extra = np.bincount(rng.integers(0, groups, size=big - n), minlength=groups)
    diagonals = [np.empty(big) for _ in range(k)]
    blocks = []
    start = 0
    for c, e in zip(cols, extra):
        size = c + int(e)
        designated = int(rng.integers(k))
        for i in range(k):
            if i == designated:
                diagonals[i][start:start + size] = rng.uniform(lo, hi, size=size)
            else:
                diagonals[i][start:start + size] = rng.uniform(lo, hi)
        blocks.append(random_isometry(c, size, rng).matrix)
        start += size
    x = MatrixTuple(tuple(np.diag(d) for d in diagonals), commuting=True)
    return x, scipy.linalg.block_diag(*blocks)


def check_hypograph_saturation(target, cfg: SuiteConfig, k: int | None = None) -> VerificationReport:
    """V* Y V <= F(V* X V) for Y <= F(X) and structured isometries V.

    `target` is a PencilRealization or a vectorized scalar function of `k`
    variables.
    """
    if isinstance(target, PencilRealization):
        f, k = _realization_evaluator(target), target.k
    else:
        if k is None:
            raise ValueError("a scalar target needs its number of variables k")
        f = _scalar_evaluator(target)

    def trial(n: int, rng: np.random.Generator) -> float:
        big = min(2 * n, max(n + 1, MAX_JENSEN_DIM))
        x, v = structured_hypograph_point(k, n, big, cfg.interval, rng)
        fx = f(x)
        y = fx - random_psd(big, scale=rng.uniform(0.0, 1.0) * max(1.0, opnorm(fx)), seed=rng)
        return _order_violation(v.T @ y @ v, f(x.compress(v)))

    return run_trials("hypograph", cfg, trial)


# ---------- Herglotz ----------

def check_herglotz(r: PencilRealization, cfg: SuiteConfig) -> VerificationReport:
    """Im F(X) >= 0 for Im X > 0, and F(X*) = F(X)*."""

    def trial(n: int, rng: np.random.Generator) -> float:
        z = random_upper_half_tuple(r.k, n, cfg.interval, rng)
        try:
            fz = evaluate_complex(r, z)
            fz_adj = evaluate_complex(r, [zi.conj().T for zi in z])
        except SingularPivotError as exc:
            log.debug("herglotz: %s", exc)
            return BREAKDOWN_VIOLATION
        scale = _scale(fz)
        positivity = lambda_min(imag_part(fz)) / scale
        # Symmetry has its own tolerance; rescale so it fails against cfg.tol exactly there.
        symmetry = -opnorm(fz_adj - fz.conj().T) / scale * (cfg.tol / SYMMETRY_TOL)
        return min(positivity, symmetry)

    return run_trials("herglotz", cfg, trial)


# ---------- matrix convex hull decomposition ----------

@dataclass(frozen=True, eq=False)
class DecompositionCertificate:
    """X_i = V* (sum_r tuples[r, i] I_{sizes[r]}) V with V*V = I.

    Term r owns rows offsets[r]:offsets[r+1] of the M x n isometry V; its
    weight is the trace share |V_r|_F^2 / n.
    """

    isometry: np.ndarray
    tuples: np.ndarray
    sizes: tuple
    z: float
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if sum(sizes) != self.isometry.shape[0] or len(sizes) != self.tuples.shape[0]:
            raise DimensionError("term sizes do not tile the rows of V")
        object.__setattr__(self, "sizes", sizes)
        n = self.isometry.shape[1]
        weights = np.array([
            np.sum(np.abs(self.isometry[a:b]) ** 2) / n
            for a, b in zip(self.offsets, self.offsets[1:])
        ])
        object.__setattr__(self, "weights", weights)

    @property
    def offsets(self) -> list[int]:
        return [0, *np.cumsum(self.sizes).tolist()]

    @property
    def k(self) -> int:
        return self.tuples.shape[1]

    def reconstruct(self) -> MatrixTuple:
        v = self.isometry
        diag_values = np.repeat(self.tuples, self.sizes, axis=0)
        return MatrixTuple(tuple(
            hermitian(v.conj().T @ (diag_values[:, i, None] * v)) for i in range(self.k)
        ))

    def residuals(self, x: MatrixTuple) -> dict:
        v = self.isometry
        rebuilt = self.reconstruct()
        return {
            "isometry": opnorm(v.conj().T @ v - np.eye(v.shape[1])),
            "reconstruction": max(opnorm(a - b) for a, b in zip(rebuilt, x)),
            "min_entry": float(self.tuples.min()),
        }

    def check(self, x: MatrixTuple) -> None:
        res = self.residuals(x)
        if res["isometry"] > ISOMETRY_CHECK_TOL:
            raise CertificateError(f"certificate V is not an isometry: |V*V - I| = {res['isometry']:.3e}")
        if res["reconstruction"] > RECONSTRUCTION_TOL * max(1.0, max(opnorm(m) for m in x)):
            raise CertificateError(f"certificate does not reconstruct X: error {res['reconstruction']:.3e}")
        if not res["min_entry"] > 0:
            raise CertificateError("certificate has a non-positive scalar entry")


def _is_scalar(a: np.ndarray) -> bool:
    c = np.trace(a) / a.shape[0]
    return opnorm(a - c * np.eye(a.shape[0])) <= 1e-12 * max(1.0, abs(c))


def _merge_terms(rows: list[np.ndarray], tuples: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, list[int]]:
    merged: list[tuple[np.ndarray, list[np.ndarray]]] = []
    for row, tup in zip(rows, tuples):
        for key, bucket in merged:
            if np.allclose(key, tup, rtol=1e-12, atol=0.0):
                bucket.append(row)
                break
        else:
            merged.append((tup, [row]))
    v = np.vstack([np.vstack(bucket) for _, bucket in merged])
    return v, np.array([key for key, _ in merged]), [len(bucket) for _, bucket in merged]


def comat_decompose(x: MatrixTuple) -> DecompositionCertificate:
    """Write a PD tuple as an isometric compression of a direct sum of scalar tuples.

    With z = min_i lambda_min(X_i) k / (2(k-1)), the tuples
    T_i = (zI, ..., k X_i - (k-1) z I, ..., zI) average to X, and the spectral
    decomposition of each nonscalar coordinate gives rank-one scalar terms
    with weight 1/k.
    """
    lows = [lambda_min(xi) for xi in x]
    if min(lows) <= 0:
        raise NotPSDError(f"hull decomposition needs positive definite coordinates, lambda_min={min(lows):.3e}")
    k, n = x.k, x.n

    if all(_is_scalar(xi) for xi in x):
        tup = np.array([[np.trace(xi).real / n for xi in x]])
        return DecompositionCertificate(isometry=np.eye(n), tuples=tup, sizes=(n,), z=min(lows) / 2)

    z = min(lows) / 2 if k == 1 else 0.5 * min(lows) * k / (k - 1)
    rows, tuples = [], []
    for i, xi in enumerate(x):
        shifted = k * xi - (k - 1) * z * np.eye(n)
        w, u = scipy.linalg.eigh(hermitian(shifted))
        for j in range(n):
            tup = np.full(k, z)
            tup[i] = w[j]
            tuples.append(tup)
            rows.append(math.sqrt(1.0 / k) * u[:, j].conj())
    v, tups, sizes = _merge_terms(rows, tuples)
    cert = DecompositionCertificate(isometry=v, tuples=tups, sizes=tuple(sizes), z=z)
    log.debug("comat_decompose: k=%d n=%d, %d terms on %d rows", k, n, len(sizes), v.shape[0])
    return cert


# ---------- dispatch ----------

SUITES: dict[str, Callable[[PencilRealization, SuiteConfig], VerificationReport]] = {
    "axioms": check_free_axioms,
    "monotone": check_monotone,
    "concave": check_concave,
    "jensen": check_jensen_isometry,
    "herglotz": check_herglotz,
    "hypograph": check_hypograph_saturation,
}


def run_suite(name: str, target: PencilRealization, cfg: SuiteConfig) -> VerificationReport:
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}") from None
    return suite(target, cfg)
