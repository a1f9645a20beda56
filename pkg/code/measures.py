#!/usr/bin/env python3
"""Finitely supported measures on positive definite matrices.

* stochastic order mu <= nu, decided by a transportation max-flow over the
  Loewner relation between atoms (a feasible flow is a monotone coupling, a
  saturated cut is a violated upper set);
* a brute-force upper-set oracle for small supports;
* step-function (Skorokhod) representations of monotone couplings;
* operator means of measures: arithmetic, harmonic and the power mean
  X = sum_i w_i X #_t A_i, plus the order and direct-sum property checks.

Means are evaluated on `DiscreteMeasure.canonical()`, so reordering atoms or
splitting one into exact copies cannot change the result.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg

from numlin import (
    DEFAULT_INTERVAL,
    DimensionError,
    NotPSDError,
    hermitian,
    lambda_min,
    loewner_leq,
    opnorm,
    random_pd,
    random_psd,
    weighted_geometric_mean,
)
from verify import SuiteConfig, VerificationReport, run_trials

log = logging.getLogger("measures")

WEIGHT_SUM_TOL = 1e-12
MARGINAL_TOL = 1e-10
FEASIBILITY_SLACK = 1e-10
ZERO_FLOW = 1e-14
# Capacity of the relation edges; exceeds the total mass of 1.
UNBOUNDED = 2.0
MAX_BRUTE_FORCE_POINTS = 20
MAX_ITER = 500
CHANGE_TOL = 1e-13
RESIDUAL_TOL = 1e-11
RATIONAL_DENOMINATOR = 10 ** 9


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


# ---------- measures and couplings ----------

@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(hermitian(a) for a in self.atoms)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if not atoms:
            raise ValueError("a measure needs at least one atom")
        if len(atoms) != weights.size:
            raise DimensionError(f"{len(atoms)} atoms but {weights.size} weights")
        n = atoms[0].shape[0]
        if any(a.shape != (n, n) for a in atoms):
            raise DimensionError("all atoms must share one dimension")
        if np.any(weights <= 0):
            raise ValueError("measure weights must be positive")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"measure weights sum to {total!r}, expected 1")
        for i, a in enumerate(atoms):
            if lambda_min(a) <= 0:
                raise NotPSDError(f"atom {i} is not positive definite")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, atoms: Sequence[np.ndarray]) -> "DiscreteMeasure":
        return cls(tuple(atoms), np.full(len(atoms), 1.0 / len(atoms)))

    @classmethod
    def dirac(cls, atom: np.ndarray) -> "DiscreteMeasure":
        return cls((atom,), np.array([1.0]))

    @property
    def n(self) -> int:
        return self.atoms[0].shape[0]

    @property
    def size(self) -> int:
        return len(self.atoms)

    def canonical(self) -> "DiscreteMeasure":
        """Atoms sorted by their bytes, exact duplicates merged."""
        merged: dict[bytes, list] = {}
        for a, w in zip(self.atoms, self.weights):
            key = np.ascontiguousarray(a).tobytes()
            merged.setdefault(key, [a, []])[1].append(w)
        keys = sorted(merged)
        return DiscreteMeasure(
            tuple(merged[key][0] for key in keys),
            np.array([math.fsum(merged[key][1]) for key in keys]),
        )

    def split(self, index: int, parts: int = 2) -> "DiscreteMeasure":
        """Replace atom `index` by `parts` copies of near-equal weight.

        Pieces are multiples of ulp(w), so their float sum is exactly w and
        `canonical` merges them back to the original atom bit for bit.
        """
        if parts < 1:
            raise ValueError("parts must be at least 1")
        atoms = list(self.atoms)
        weights = list(self.weights)
        atom, weight = atoms.pop(index), float(weights.pop(index))
        unit = math.ulp(weight)
        steps = int(weight / unit)
        share = steps // parts
        pieces = [share * unit] * (parts - 1) + [(steps - (parts - 1) * share) * unit]
        atoms[index:index] = [atom] * parts
        weights[index:index] = pieces
        return DiscreteMeasure(tuple(atoms), np.array(weights))

    def permute(self, order: Sequence[int]) -> "DiscreteMeasure":
        order = list(order)
        if sorted(order) != list(range(self.size)):
            raise ValueError(f"{order} is not a permutation of 0..{self.size - 1}")
        return DiscreteMeasure(tuple(self.atoms[i] for i in order), self.weights[order])


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint weights gamma[i, j] with row sums mu.weights and column sums nu.weights."""

    gamma: np.ndarray
    row_weights: np.ndarray
    col_weights: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        rows = np.asarray(self.row_weights, dtype=float)
        cols = np.asarray(self.col_weights, dtype=float)
        if gamma.shape != (rows.size, cols.size):
            raise DimensionError(f"coupling shape {gamma.shape} vs marginals ({rows.size}, {cols.size})")
        if np.any(gamma < 0):
            raise ValueError("coupling weights must be nonnegative")
        row_gap = np.max(np.abs(gamma.sum(axis=1) - rows))
        col_gap = np.max(np.abs(gamma.sum(axis=0) - cols))
        if max(row_gap, col_gap) > MARGINAL_TOL:
            raise ValueError(f"coupling marginals off by {max(row_gap, col_gap):.3e}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "row_weights", rows)
        object.__setattr__(self, "col_weights", cols)

    @classmethod
    def between(cls, gamma, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "Coupling":
        return cls(gamma, mu.weights, nu.weights)

    @classmethod
    def product(cls, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "Coupling":
        return cls(np.outer(mu.weights, nu.weights), mu.weights, nu.weights)

    def support(self) -> list[tuple[int, int]]:
        """Cells with positive mass in lexicographic order."""
        rows, cols = np.nonzero(self.gamma > 0)
        return list(zip(rows.tolist(), cols.tolist()))


@dataclass(frozen=True)
class UpperSetCertificate:
    """mu(U) > nu(U) for the upper set generated by the listed mu atoms."""

    mu_indices: tuple
    nu_indices: tuple
    mu_mass: float
    nu_mass: float


def relation_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float) -> np.ndarray:
    """related[i, j] iff A_i <= B_j in the Loewner order (relative tolerance)."""
    return np.array([[loewner_leq(a, b, tol) for b in nu.atoms] for a in mu.atoms], dtype=bool)


# ---------- max-flow ----------

class FlowNetwork:
    """Dense residual network solved by shortest augmenting paths (Edmonds-Karp).

    Capacities and flows are held in long double; residuals at or below
    ZERO_FLOW count as saturated.
    """

    def __init__(self, size: int):
        self.size = size
        self.capacity = np.zeros((size, size), dtype=np.longdouble)
        self.flow = np.zeros((size, size), dtype=np.longdouble)

    def add_edge(self, u: int, v: int, capacity: float) -> None:
        if u == v:
            raise ValueError("self loops are not allowed")
        self.capacity[u, v] += np.longdouble(capacity)

    def residual(self, u: int, v: int) -> np.longdouble:
        return self.capacity[u, v] - self.flow[u, v]

    def _bfs(self, source: int) -> list[int | None]:
        parent: list[int | None] = [None] * self.size
        parent[source] = source
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in range(self.size):
                if parent[v] is None and self.residual(u, v) > ZERO_FLOW:
                    parent[v] = u
                    queue.append(v)
        return parent

    def max_flow(self, source: int, sink: int) -> float:
        augmentations = 0
        while True:
            parent = self._bfs(source)
            if parent[sink] is None:
                break
            path = []
            v = sink
            while v != source:
                path.append((parent[v], v))
                v = parent[v]
            bottleneck = min(self.residual(u, v) for u, v in path)
            for u, v in path:
                self.flow[u, v] += bottleneck
                self.flow[v, u] -= bottleneck
            augmentations += 1
        log.debug("max_flow: %d augmenting paths", augmentations)
        return float(sum(self.flow[source, v] for v in range(self.size)))

    def reachable(self, source: int) -> set[int]:
        return {v for v, p in enumerate(self._bfs(source)) if p is not None}


def stochastic_leq(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = 1e-9
                   ) -> tuple[bool, Coupling | UpperSetCertificate]:
    """Decide mu <= nu; return a monotone coupling or a violated upper set.

    Nodes: source 0, mu atoms 1..a, nu atoms a+1..a+b, sink a+b+1.
    """
    if mu.n != nu.n:
        raise DimensionError(f"measures live on dimensions {mu.n} and {nu.n}")
    related = relation_matrix(mu, nu, tol)
    a, b = mu.size, nu.size
    source, sink = 0, a + b + 1
    net = FlowNetwork(a + b + 2)
    for i, w in enumerate(mu.weights):
        net.add_edge(source, 1 + i, w)
    for j, w in enumerate(nu.weights):
        net.add_edge(1 + a + j, sink, w)
    for i, j in zip(*np.nonzero(related)):
        net.add_edge(1 + i, 1 + a + j, UNBOUNDED)

    value = net.max_flow(source, sink)
    if value >= 1.0 - FEASIBILITY_SLACK:
        gamma = np.clip(net.flow[1:a + 1, a + 1:a + b + 1].astype(float), 0.0, None)
        gamma[~related | (gamma <= ZERO_FLOW)] = 0.0
        return True, Coupling.between(gamma, mu, nu)

    seen = net.reachable(source)
    upper_mu = tuple(i for i in range(a) if 1 + i in seen)
    upper_nu = tuple(j for j in range(b) if related[list(upper_mu), j].any()) if upper_mu else ()
    cert = UpperSetCertificate(
        mu_indices=upper_mu,
        nu_indices=upper_nu,
        mu_mass=math.fsum(mu.weights[list(upper_mu)]),
        nu_mass=math.fsum(nu.weights[list(upper_nu)]),
    )
    log.debug("stochastic_leq: flow %.12f, violated upper set %s", value, cert)
    return False, cert


# ---------- brute-force oracle ----------

def _transitive_closure(leq: np.ndarray) -> np.ndarray:
    closure = leq.copy()
    for k in range(closure.shape[0]):
        closure |= closure[:, k, None] & closure[None, k, :]
    return closure


def _antichains(comparable: list[int], count: int):
    """Yield bitmasks of all antichains; comparable[p] is the bitmask of points comparable to p."""

    def extend(start: int, chosen: int, blocked: int):
        yield chosen
        for p in range(start, count):
            if not blocked >> p & 1:
                yield from extend(p + 1, chosen | 1 << p, blocked | comparable[p])

    yield from extend(0, 0, 0)


def brute_force_stochastic_leq(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = 1e-9) -> bool:
    """mu(U) <= nu(U) for every upper set U of the atoms of mu and nu."""
    if mu.n != nu.n:
        raise DimensionError(f"measures live on dimensions {mu.n} and {nu.n}")
    points = list(mu.atoms) + list(nu.atoms)
    count = len(points)
    if count > MAX_BRUTE_FORCE_POINTS:
        raise ValueError(f"brute force supports at most {MAX_BRUTE_FORCE_POINTS} atoms, got {count}")
    leq = np.array([[loewner_leq(p, q, tol) for q in points] for p in points], dtype=bool)
    closure = _transitive_closure(leq)
    up = [sum(1 << q for q in range(count) if closure[p, q]) for p in range(count)]
    comparable = [
        sum(1 << q for q in range(count) if closure[p, q] or closure[q, p]) for p in range(count)
    ]
    mass = list(mu.weights) + [0.0] * nu.size
    target = [0.0] * mu.size + list(nu.weights)

    for chain in _antichains(comparable, count):
        upper = 0
        for p in range(count):
            if chain >> p & 1:
                upper |= up[p]
        members = [p for p in range(count) if upper >> p & 1]
        if math.fsum(mass[p] for p in members) > math.fsum(target[p] for p in members) + FEASIBILITY_SLACK:
            return False
    return True


# ---------- step representations ----------

@dataclass(frozen=True, eq=False)
class StepRepresentation:
    """Simple function on [0, 1]: value index[l] on [breakpoints[l], breakpoints[l+1])."""

    breakpoints: np.ndarray
    indices: tuple

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.size != len(self.indices) + 1 or bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must start at 0 and increase, one more than the intervals")
        if abs(bp[-1] - 1.0) > MARGINAL_TOL:
            raise ValueError(f"step representation has total length {bp[-1]!r}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def value_index(self, t: float) -> int:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {t}")
        slot = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.indices[min(slot, len(self.indices) - 1)]

    def pushforward_weights(self, size: int) -> np.ndarray:
        buckets: list[list[float]] = [[] for _ in range(size)]
        for idx, length in zip(self.indices, self.lengths):
            buckets[idx].append(length)
        return np.array([math.fsum(b) for b in buckets])

    def pushforward(self, atoms: Sequence[np.ndarray]) -> DiscreteMeasure:
        weights = self.pushforward_weights(len(atoms))
        used = [i for i, w in enumerate(weights) if w > 0]
        return DiscreteMeasure(tuple(atoms[i] for i in used), weights[used])


def monotone_representation(mu: DiscreteMeasure, nu: DiscreteMeasure, coupling: Coupling,
                            tol: float = 1e-9) -> tuple[StepRepresentation, StepRepresentation]:
    """Lay the coupling cells (i, j) onto [0, 1] in lexicographic order."""
    cells = coupling.support()
    for i, j in cells:
        if not loewner_leq(mu.atoms[i], nu.atoms[j], tol):
            raise ValueError(f"coupling charges the unordered pair ({i}, {j})")
    lengths = np.array([coupling.gamma[i, j] for i, j in cells])
    breakpoints = np.concatenate([[0.0], np.cumsum(lengths)])
    return (
        StepRepresentation(breakpoints, tuple(i for i, _ in cells)),
        StepRepresentation(breakpoints, tuple(j for _, j in cells)),
    )


# ---------- coupling generation ----------

def _northwest_corner(rows: np.ndarray, cols: np.ndarray, row_order, col_order) -> np.ndarray:
    gamma = np.zeros((rows.size, cols.size))
    r = rows[row_order].astype(float)
    c = cols[col_order].astype(float)
    i = j = 0
    while i < r.size and j < c.size:
        amount = min(r[i], c[j])
        if amount > ZERO_FLOW:
            gamma[row_order[i], col_order[j]] += amount
        r[i] -= amount
        c[j] -= amount
        if r[i] <= c[j]:
            i += 1
        else:
            j += 1
    return gamma


def couplings_sample(mu: DiscreteMeasure, nu: DiscreteMeasure, count: int, seed=None) -> list[Coupling]:
    """The product coupling followed by northwest-corner fills under random orders."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    out = [Coupling.product(mu, nu)]
    while len(out) < count:
        gamma = _northwest_corner(mu.weights, nu.weights,
                                  rng.permutation(mu.size), rng.permutation(nu.size))
        out.append(Coupling.between(gamma, mu, nu))
    return out


def compose_couplings(first: Coupling, second: Coupling) -> Coupling:
    """Glue a coupling of (mu, nu) with one of (nu, rho) through nu."""
    mid = first.col_weights
    if mid.size != second.row_weights.size or np.max(np.abs(mid - second.row_weights)) > MARGINAL_TOL:
        raise DimensionError("couplings do not share their middle marginal")
    gamma = (first.gamma / mid) @ second.gamma
    return Coupling(gamma, first.row_weights, second.col_weights)


def coupled_direct_sum(mu: DiscreteMeasure, nu: DiscreteMeasure, coupling: Coupling) -> DiscreteMeasure:
    """The measure with atoms A_i (+) B_j and weights gamma[i, j]."""
    cells = coupling.support()
    atoms = tuple(scipy.linalg.block_diag(mu.atoms[i], nu.atoms[j]) for i, j in cells)
    weights = np.array([coupling.gamma[i, j] for i, j in cells])
    return DiscreteMeasure(atoms, weights / math.fsum(weights))


def random_measure(size: int, n: int, interval: Sequence[float] = DEFAULT_INTERVAL,
                   seed=None) -> DiscreteMeasure:
    rng = np.random.default_rng(seed)
    atoms = tuple(random_pd(n, interval, rng) for _ in range(size))
    weights = rng.dirichlet(np.ones(size))
    return DiscreteMeasure(atoms, weights / math.fsum(weights))


def rationalize_weights(weights: Sequence[float], max_denominator: int = RATIONAL_DENOMINATOR) -> list[Fraction]:
    """Nearest fractions with bounded denominator, renormalized to sum exactly to 1."""
    fracs = [Fraction(float(w)).limit_denominator(max_denominator) for w in weights]
    total = sum(fracs)
    if total <= 0:
        raise ValueError("weights must have positive total")
    return [f / total for f in fracs]


# ---------- means ----------

MEAN_FAMILIES = ("power", "arithmetic", "harmonic")


@dataclass(frozen=True)
class MeanSpec:
    family: str
    t: float = 1.0

    def __post_init__(self):
        if self.family not in MEAN_FAMILIES:
            raise ValueError(f"unknown mean {self.family!r}; expected one of {', '.join(MEAN_FAMILIES)}")
        if self.family == "power" and not 0.0 < self.t <= 1.0:
            raise ValueError(f"power mean exponent must lie in (0, 1], got {self.t}")

    @classmethod
    def parse(cls, text: str) -> "MeanSpec":
        family, _, rest = text.strip().partition(":")
        family = family.strip().lower()
        if family == "power":
            if not rest.strip():
                raise ValueError("power mean needs an exponent, e.g. power:0.5")
            return cls(family, float(rest))
        if rest.strip():
            raise ValueError(f"{family} takes no parameter")
        return cls(family)

    def __str__(self) -> str:
        return f"power:{self.t:g}" if self.family == "power" else self.family


@dataclass(frozen=True, eq=False)
class PowerMeanResult:
    mean: np.ndarray
    residual: float
    iterations: int


def _arithmetic(weights: np.ndarray, atoms: Sequence[np.ndarray]) -> np.ndarray:
    return hermitian(sum(w * a for w, a in zip(weights, atoms)))


def _check_mean_input(weights, atoms) -> tuple[np.ndarray, list[np.ndarray]]:
    weights = np.asarray(weights, dtype=float).reshape(-1)
    atoms = [hermitian(a) for a in atoms]
    if weights.size != len(atoms) or not atoms:
        raise DimensionError(f"{weights.size} weights for {len(atoms)} atoms")
    if np.any(weights <= 0) or abs(math.fsum(weights) - 1.0) > 1e-9:
        raise ValueError("weights must be positive and sum to 1")
    return weights, atoms


def solve_power_mean(weights, atoms, t: float, max_iter: int = MAX_ITER) -> PowerMeanResult:
    """Fixed point X = sum_i w_i X #_t A_i, iterated from the arithmetic mean."""
    weights, atoms = _check_mean_input(weights, atoms)
    if not 0.0 < t <= 1.0:
        raise ValueError(f"power mean exponent must lie in (0, 1], got {t}")
    x = _arithmetic(weights, atoms)
    if t == 1.0:
        return PowerMeanResult(mean=x, residual=0.0, iterations=0)

    residual = math.inf
    for it in range(1, max_iter + 1):
        image = hermitian(sum(w * weighted_geometric_mean(x, a, t) for w, a in zip(weights, atoms)))
        residual = opnorm(image - x) / opnorm(x)
        change = np.linalg.norm(image - x) / np.linalg.norm(x)
        if residual <= RESIDUAL_TOL or change <= CHANGE_TOL:
            log.debug("power mean t=%g: %d iterations, residual %.3e", t, it, residual)
            return PowerMeanResult(mean=x, residual=residual, iterations=it)
        x = image
    raise ConvergenceError(
        f"power mean did not converge in {max_iter} iterations (residual {residual:.3e})",
        residual=residual, iterations=max_iter,
    )


def power_mean(weights, atoms, t: float) -> np.ndarray:
    return solve_power_mean(weights, atoms, t).mean


def harmonic_mean(weights, atoms) -> np.ndarray:
    weights, atoms = _check_mean_input(weights, atoms)
    return hermitian(np.linalg.inv(sum(w * np.linalg.inv(a) for w, a in zip(weights, atoms))))


def mean_of_measure(spec: MeanSpec, mu: DiscreteMeasure) -> np.ndarray:
    canon = mu.canonical()
    if spec.family == "arithmetic" or (spec.family == "power" and spec.t == 1.0):
        return _arithmetic(canon.weights, canon.atoms)
    if spec.family == "harmonic":
        return harmonic_mean(canon.weights, canon.atoms)
    return power_mean(canon.weights, canon.atoms, spec.t)


def lift_mean(spec: MeanSpec, step: StepRepresentation, atoms: Sequence[np.ndarray]) -> np.ndarray:
    """Mean of a step function, i.e. of its pushforward measure."""
    return mean_of_measure(spec, step.pushforward(atoms))


# ---------- property checks ----------

MeanLike = Union[MeanSpec, Callable[[DiscreteMeasure], np.ndarray]]


def _mean_function(mean: MeanLike) -> Callable[[DiscreteMeasure], np.ndarray]:
    if isinstance(mean, MeanSpec):
        return lambda mu: mean_of_measure(mean, mu)
    return mean


def check_stochastic_monotone(mean: MeanLike, cfg: SuiteConfig, max_atoms: int = 3) -> VerificationReport:
    """mean(mu) <= mean(nu) whenever mu <= nu.

    nu moves every atom of mu up by a random PSD increment and shuffles the
    atoms. The monotone representation of the coupling found must also be
    pointwise ordered.
    """
    f = _mean_function(mean)

    def trial(n: int, rng: np.random.Generator) -> float | None:
        mu = random_measure(int(rng.integers(1, max_atoms + 1)), n, cfg.interval, rng)
        raised = tuple(a + random_psd(n, scale=rng.uniform(0.0, 1.0), seed=rng) for a in mu.atoms)
        nu = DiscreteMeasure(raised, mu.weights).permute(rng.permutation(mu.size))
        ordered, coupling = stochastic_leq(mu, nu)
        if not ordered:
            return None
        xi_mu, xi_nu = monotone_representation(mu, nu, coupling)
        pointwise = min(
            lambda_min(nu.atoms[j] - mu.atoms[i]) for i, j in zip(xi_mu.indices, xi_nu.indices)
        )
        lower, upper = f(mu), f(nu)
        scale = max(1.0, opnorm(lower), opnorm(upper))
        return min(lambda_min(upper - lower), min(pointwise, 0.0)) / scale

    return run_trials("stochastic-monotone", cfg, trial)


def check_directsum_coupling(spec: MeanSpec, mu: DiscreteMeasure, nu: DiscreteMeasure,
                             couplings: Sequence[Coupling], tol: float = 1e-8) -> VerificationReport:
    """mean(coupled direct sum) = mean(mu) (+) mean(nu) for every coupling.

    Weights are first rounded to fractions with denominator at most 1e9.
    """
    if not couplings:
        raise ValueError("need at least one coupling")
    mu_r = DiscreteMeasure(mu.atoms, np.array([float(f) for f in rationalize_weights(mu.weights)]))
    nu_r = DiscreteMeasure(nu.atoms, np.array([float(f) for f in rationalize_weights(nu.weights)]))
    expected = scipy.linalg.block_diag(mean_of_measure(spec, mu_r), mean_of_measure(spec, nu_r))
    pending = iter(couplings)

    def trial(n: int, rng: np.random.Generator) -> float:
        coupling = next(pending)
        flat = rationalize_weights(coupling.gamma.reshape(-1))
        gamma = np.array([float(f) for f in flat]).reshape(coupling.gamma.shape)
        joint = coupled_direct_sum(mu_r, nu_r, Coupling(gamma, gamma.sum(axis=1), gamma.sum(axis=0)))
        got = mean_of_measure(spec, joint)
        return -opnorm(got - expected) / max(1.0, opnorm(expected))

    cfg = SuiteConfig(dims=(mu.n + nu.n,), trials=len(couplings), seed=0, tol=tol)
    return run_trials("directsum-coupling", cfg, trial)


def order_pool_agreement(pool: Sequence[DiscreteMeasure], tol: float = 1e-9) -> list[tuple[int, int]]:
    """Index pairs on which the flow decision and the upper-set oracle disagree."""
    disagreements = []
    for (i, mu), (j, nu) in itertools.product(enumerate(pool), repeat=2):
        if stochastic_leq(mu, nu, tol)[0] != brute_force_stochastic_leq(mu, nu, tol):
            disagreements.append((i, j))
    return disagreements
