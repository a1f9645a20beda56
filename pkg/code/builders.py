#!/usr/bin/env python3
"""Realization factory: pencils for a library of operator monotone functions.

Building blocks
---------------
* parallel-sum atoms: weight * (P : Q) for affine maps P, Q with scalar
  coefficients, realized as the short of [[P, P], [P, P + Q]];
* `arrowhead_sum`: glues atoms that share the pivot e1 into one pencil whose
  short is the sum of the atoms' shorts (plus an affine part);
* quadrature builders for x^t and the weighted geometric mean, from

      x^t = (sin(t pi) / pi) * int_0^inf lambda^(t-1) x / (lambda + x) dlambda.

Quadrature
----------
The half line is split at x0 = sqrt(a*b), the geometric center of the
declared spectral interval [a, b]. Below x0 the substitution
lambda = x0 * u^(1/t), above it lambda = x0 * u^(-1/(1-t)); both turn the
integrand into a bounded function of u in (0, 1) without the lambda^(t-1)
endpoint singularity, and each piece gets Gauss-Legendre with half the nodes.
Accuracy is best for spectra inside the interval and degrades gracefully
outside it.

Spec grammar (FunctionSpec.parse):
    identity | identity:i,k | constant:c | affine:alpha,b1,...,bk | cauchy:lam
    sqrt | power:t | harmonic:w1,...,wk | arithmetic:w1,...,wk | geomean:t
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from numlin import DimensionError
from pencil import PencilRealization, constant_realization, identity_realization

log = logging.getLogger("builders")

DEFAULT_NODES = 96
MIN_NODES = 8
DEFAULT_SPECTRUM = (1e-2, 1e2)
WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuadratureScheme:
    """Nodes lambda_j > 0 (strictly increasing) and weights w_j > 0 with
    x^t ~ sum_j w_j * lambda_j x / (lambda_j + x)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise DimensionError("nodes and weights must be 1-d arrays of equal length")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise ValueError("quadrature nodes must be positive and strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.nodes.size

    def scalar(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        lam = self.nodes
        return np.sum(self.weights * lam * x / (lam + x), axis=-1)


def _check_power(t: float) -> None:
    if not 0.0 < t < 1.0:
        raise ValueError(f"exponent t must lie in (0, 1), got {t}")


def _check_nodes(nodes: int) -> None:
    if nodes < MIN_NODES:
        raise ValueError(f"need at least {MIN_NODES} quadrature nodes, got {nodes}")


def _check_interval(interval: Sequence[float]) -> tuple[float, float]:
    lo, hi = (float(v) for v in interval)
    if not 0.0 < lo <= hi:
        raise ValueError(f"spectral interval must satisfy 0 < a <= b, got {interval}")
    return lo, hi


def _check_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size < 1 or np.any(w <= 0) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights must be positive and sum to 1, got {list(w)}")
    return w


def power_quadrature(t: float, nodes: int = DEFAULT_NODES,
                     interval: Sequence[float] = DEFAULT_SPECTRUM) -> QuadratureScheme:
    _check_power(t)
    _check_nodes(nodes)
    lo, hi = _check_interval(interval)
    x0 = math.sqrt(lo * hi)
    c = math.sin(t * math.pi) / math.pi

    n_low = nodes // 2
    n_high = nodes - n_low
    u, gw = np.polynomial.legendre.leggauss(n_low)
    u, gw = (u + 1) / 2, gw / 2
    lam_low = x0 * u ** (1.0 / t)
    w_low = c * x0 ** t / t * gw / lam_low

    u, gw = np.polynomial.legendre.leggauss(n_high)
    u, gw = (u + 1) / 2, gw / 2
    lam_high = x0 * u ** (-1.0 / (1.0 - t))
    w_high = c * x0 ** t / (1.0 - t) * gw / x0

    lam = np.concatenate([lam_low, lam_high])
    w = np.concatenate([w_low, w_high])
    order = np.argsort(lam)
    return QuadratureScheme(nodes=lam[order], weights=w[order])


# ---------- atoms ----------

def parallel_sum_atom(p: Sequence[float], q: Sequence[float], weight: float = 1.0,
                      balanced: bool = False) -> PencilRealization:
    """weight * (P : Q) with P = p[0] I + sum_i p[i] X_i, Q likewise.

    Realized as the short of weight * [[P, P], [P, P + Q]] onto the first
    block. `balanced` applies the congruence diag(1, d) with
    d^2 = 1 / (weight * (P(I) + Q(I))), which leaves the short unchanged and
    puts the auxiliary block at unit scale.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size < 2:
        raise DimensionError("p and q need one constant plus one entry per variable")
    if np.any(p < 0) or np.any(q < 0) or weight <= 0:
        raise ValueError("parallel-sum coefficients must be nonnegative with positive weight")
    k = p.size - 1
    d = 1.0
    if balanced:
        d = 1.0 / math.sqrt(weight * (p.sum() + q.sum()))

    def block(pi: float, qi: float) -> np.ndarray:
        return weight * np.array([[pi, d * pi], [d * pi, d * d * (pi + qi)]])

    return PencilRealization(
        k=k, m=2, e=np.array([1.0, 0.0]),
        a0=block(p[0], q[0]),
        coeffs=tuple(block(p[i], q[i]) for i in range(1, k + 1)),
    )


def cauchy_atom(lam: float, weight: float = 1.0, k: int = 1, variable: int = 0,
                constant_pivot: bool = False, balanced: bool = False) -> PencilRealization:
    """weight * lam x / (lam + x) in coordinate `variable` (the parallel sum lam : x).

    Default layout: e = e1, A0 = [[0, 0], [0, lam]], A1 = [[1, 1], [1, 1]].
    `constant_pivot` swaps the roles, [[lam, lam], [lam, lam + x]], which keeps
    the pivot entry small when lam is small.
    """
    if lam <= 0:
        raise ValueError(f"Cauchy node must be positive, got {lam}")
    if not 0 <= variable < k:
        raise DimensionError(f"variable {variable} outside 0..{k - 1}")
    x = np.zeros(k + 1)
    x[variable + 1] = 1.0
    c = np.zeros(k + 1)
    c[0] = lam
    if constant_pivot:
        return parallel_sum_atom(c, x, weight, balanced)
    return parallel_sum_atom(x, c, weight, balanced)


def _to_e1(r: PencilRealization) -> tuple[np.ndarray, tuple]:
    if np.allclose(r.e, np.eye(r.m)[0], rtol=0, atol=1e-15):
        return r.a0, r.coeffs
    return r.rotated


def affine(alpha: float, betas: Sequence[float]) -> PencilRealization:
    """alpha I + sum_i beta_i X_i with alpha, beta_i >= 0."""
    betas = [float(b) for b in betas]
    if alpha < 0 or any(b < 0 for b in betas) or not betas:
        raise ValueError("affine part needs alpha >= 0 and at least one beta_i >= 0")
    return PencilRealization(
        k=len(betas), m=1, e=np.array([1.0]), a0=np.array([[float(alpha)]]),
        coeffs=tuple(np.array([[b]]) for b in betas),
    )


def arrowhead_sum(atoms: Sequence[PencilRealization], alpha: float = 0.0,
                  betas: Sequence[float] | None = None) -> PencilRealization:
    """One pencil realizing alpha I + sum beta_i X_i + sum_j F_j(X).

    Every atom is brought to the e = e1 layout; the pivot coordinate carries
    the summed (1,1) entries and each atom's auxiliary block sits on its own
    diagonal block, so the short splits into the sum of the atoms' shorts.
    """
    arities = {a.k for a in atoms}
    if betas is not None:
        arities.add(len(betas))
    if len(arities) != 1:
        raise DimensionError(f"atoms and affine part disagree on arity: {sorted(arities)}")
    (k,) = arities
    betas = np.zeros(k) if betas is None else np.asarray(betas, dtype=float)
    if alpha < 0 or np.any(betas < 0):
        raise ValueError("affine part needs alpha >= 0 and beta_i >= 0")

    m = 1 + sum(a.m - 1 for a in atoms)
    a0 = np.zeros((m, m))
    coeffs = [np.zeros((m, m)) for _ in range(k)]
    a0[0, 0] = alpha
    for i in range(k):
        coeffs[i][0, 0] = betas[i]

    offset = 1
    for atom in atoms:
        b0, bs = _to_e1(atom)
        idx = np.r_[0, offset:offset + atom.m - 1]
        a0[np.ix_(idx, idx)] += b0
        for i in range(k):
            coeffs[i][np.ix_(idx, idx)] += bs[i]
        offset += atom.m - 1

    e = np.zeros(m)
    e[0] = 1.0
    return PencilRealization(k=k, m=m, e=e, a0=a0, coeffs=tuple(coeffs))


# ---------- function builders ----------

def loewner_quadrature(t: float = 0.5, nodes: int = DEFAULT_NODES,
                       interval: Sequence[float] = DEFAULT_SPECTRUM) -> PencilRealization:
    """Pencil for x -> x^t, t in (0, 1), as a balanced sum of Cauchy atoms."""
    scheme = power_quadrature(t, nodes, interval)
    x0 = math.sqrt(interval[0] * interval[1])
    atoms = [
        cauchy_atom(lam, weight=w, constant_pivot=lam < x0, balanced=True)
        for lam, w in zip(scheme.nodes, scheme.weights)
    ]
    log.debug("loewner_quadrature: t=%g, %d atoms, x0=%g", t, len(atoms), x0)
    return arrowhead_sum(atoms)


def sqrt_realization(nodes: int = DEFAULT_NODES,
                     interval: Sequence[float] = DEFAULT_SPECTRUM) -> PencilRealization:
    return loewner_quadrature(0.5, nodes, interval)


def weighted_harmonic(weights: Sequence[float]) -> PencilRealization:
    """(sum_i w_i X_i^-1)^-1, exactly: e = 1/sqrt(k), A_i = E_ii / (k w_i)."""
    w = _check_weights(weights)
    k = w.size
    coeffs = []
    for i in range(k):
        a = np.zeros((k, k))
        a[i, i] = 1.0 / (k * w[i])
        coeffs.append(a)
    return PencilRealization(
        k=k, m=k, e=np.full(k, 1.0 / math.sqrt(k)), a0=np.zeros((k, k)), coeffs=tuple(coeffs),
    )


def weighted_arithmetic(weights: Sequence[float]) -> PencilRealization:
    w = _check_weights(weights)
    return PencilRealization(
        k=w.size, m=1, e=np.array([1.0]), a0=np.zeros((1, 1)),
        coeffs=tuple(np.array([[wi]]) for wi in w),
    )


def geometric_mean(t: float = 0.5, nodes: int = DEFAULT_NODES,
                   interval: Sequence[float] = DEFAULT_SPECTRUM) -> PencilRealization:
    """X1 #_t X2 as a sum of parallel sums weight * ((lam X1) : X2).

    `interval` bounds the spectrum of X1^-1/2 X2 X1^-1/2. Small nodes keep
    lam X1 on the pivot, large nodes keep X2 there.
    """
    scheme = power_quadrature(t, nodes, interval)
    x0 = math.sqrt(interval[0] * interval[1])
    atoms = []
    for lam, w in zip(scheme.nodes, scheme.weights):
        scaled_x1 = np.array([0.0, lam, 0.0])
        x2 = np.array([0.0, 0.0, 1.0])
        if lam < x0:
            atoms.append(parallel_sum_atom(scaled_x1, x2, w, balanced=True))
        else:
            atoms.append(parallel_sum_atom(x2, scaled_x1, w, balanced=True))
    return arrowhead_sum(atoms)


# ---------- specs ----------

TAGS = (
    "identity", "constant", "affine", "cauchy", "sqrt", "power",
    "harmonic", "arithmetic", "geomean",
)


@dataclass(frozen=True)
class FunctionSpec:
    tag: str
    params: tuple = ()

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown function {self.tag!r}; expected one of {', '.join(TAGS)}")
        p = self.params
        if self.tag == "identity":
            if p and (len(p) != 2 or not 0 <= int(p[0]) < int(p[1])):
                raise ValueError("identity takes no parameters or 'i,k' with 0 <= i < k")
        elif self.tag == "constant":
            if len(p) != 1 or p[0] <= 0:
                raise ValueError("constant:c needs c > 0")
        elif self.tag == "affine":
            if len(p) < 2 or any(v < 0 for v in p):
                raise ValueError("affine:alpha,b1,...,bk needs nonnegative entries")
        elif self.tag == "cauchy":
            if len(p) != 1 or p[0] <= 0:
                raise ValueError("cauchy:lam needs lam > 0")
        elif self.tag == "sqrt":
            if p:
                raise ValueError("sqrt takes no parameters")
        elif self.tag in ("power", "geomean"):
            if len(p) != 1:
                raise ValueError(f"{self.tag}:t needs exactly one exponent")
            _check_power(p[0])
        else:
            _check_weights(p)

    @staticmethod
    def split(text: str) -> tuple[str, tuple]:
        """Tag and numeric parameters of 'tag[:p1,p2,...]', unvalidated."""
        tag, _, rest = text.strip().partition(":")
        try:
            params = tuple(float(v) for v in rest.split(",")) if rest.strip() else ()
        except ValueError as exc:
            raise ValueError(f"cannot parse parameters of {text!r}: {exc}") from exc
        return tag.strip().lower(), params

    @classmethod
    def parse(cls, text: str) -> "FunctionSpec":
        return cls(*cls.split(text))

    @property
    def arity(self) -> int:
        if self.tag == "identity":
            return int(self.params[1]) if self.params else 1
        if self.tag == "affine":
            return len(self.params) - 1
        if self.tag in ("harmonic", "arithmetic"):
            return len(self.params)
        if self.tag == "geomean":
            return 2
        return 1

    def build(self, nodes: int = DEFAULT_NODES,
              interval: Sequence[float] = DEFAULT_SPECTRUM) -> PencilRealization:
        p = self.params
        if self.tag == "identity":
            return identity_realization(self.arity, int(p[0]) if p else 0)
        if self.tag == "constant":
            return constant_realization(p[0])
        if self.tag == "affine":
            return affine(p[0], p[1:])
        if self.tag == "cauchy":
            return cauchy_atom(p[0])
        if self.tag == "sqrt":
            return sqrt_realization(nodes, interval)
        if self.tag == "power":
            return loewner_quadrature(p[0], nodes, interval)
        if self.tag == "harmonic":
            return weighted_harmonic(p)
        if self.tag == "arithmetic":
            return weighted_arithmetic(p)
        return geometric_mean(p[0], nodes, interval)

    def scalar(self) -> Callable[..., np.ndarray]:
        """Closed-form scalar function (vectorized, one array per variable)."""
        p = self.params
        if self.tag == "identity":
            i = int(p[0]) if p else 0
            return lambda *xs: np.asarray(xs[i], dtype=float)
        if self.tag == "constant":
            return lambda *xs: np.full_like(np.asarray(xs[0], dtype=float), p[0])
        if self.tag == "affine":
            return lambda *xs: p[0] + sum(b * x for b, x in zip(p[1:], xs))
        if self.tag == "cauchy":
            return lambda x: p[0] * x / (p[0] + x)
        if self.tag == "sqrt":
            return np.sqrt
        if self.tag == "power":
            return lambda x: np.power(x, p[0])
        if self.tag == "harmonic":
            return lambda *xs: 1.0 / sum(w / x for w, x in zip(p, xs))
        if self.tag == "arithmetic":
            return lambda *xs: sum(w * x for w, x in zip(p, xs))
        return lambda x1, x2: x1 ** (1.0 - p[0]) * x2 ** p[0]

    def __str__(self) -> str:
        if not self.params:
            return self.tag
        return f"{self.tag}:" + ",".join(f"{v:g}" for v in self.params)
