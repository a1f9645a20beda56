#!/usr/bin/env python3
"""Affine PSD pencils and their compressed Schur-complement evaluation.

A realization stores

    L(X) = A0 (x) I_n + sum_i A_i (x) X_i        (A0, A_i PSD, m x m)

and a unit vector e in R^m. The realized function is

    F(X) = (e* (x) I) S_{e (x) E}(L(X)) (e (x) I),

the short of L(X) onto the subspace e (x) E, compressed back to n x n.
The equivalent normalized ("B") form is

    L(X) = B0 (x) I + sum_i B_i (x) (X_i - I),  B_i = A_i,  B0 = A0 + sum_i A_i,

with B0 >= sum_i B_i exactly when A0 >= 0.

Evaluation rotates the auxiliary space by the Householder reflection Q with
Q e = e1, so e (x) E becomes the leading n coordinates of Q L Q.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from numlin import (
    DEFAULT_TOL,
    RANK_TOL,
    DimensionError,
    MatrixTuple,
    NotPSDError,
    hermitian,
    imag_part,
    is_psd,
    opnorm,
    require_psd,
)
from shorted import block_schur_general, shorted_operator

log = logging.getLogger("pencil")

SYMMETRY_TOL = 1e-12
UNIT_TOL = 1e-12


class OutsideDomainError(RuntimeError):
    """The pencil is not PSD at the requested point (or Im X is not definite)."""


def _checked_coefficient(a, m: int, name: str, tol: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (m, m):
        raise DimensionError(f"{name} has shape {a.shape}, expected ({m}, {m})")
    skew = opnorm(a - a.T)
    if skew > SYMMETRY_TOL * max(1.0, opnorm(a)):
        raise ValueError(f"{name} is not symmetric (|A - A^T| = {skew:.3e})")
    return require_psd(a, tol, what=name)


def householder(e: np.ndarray) -> np.ndarray:
    """Symmetric orthogonal Q with Q e = e1 (identity when e already is e1)."""
    m = e.size
    e1 = np.zeros(m)
    e1[0] = 1.0
    u = e - e1
    norm_u = np.linalg.norm(u)
    if norm_u <= UNIT_TOL:
        return np.eye(m)
    u = u / norm_u
    return np.eye(m) - 2.0 * np.outer(u, u)


@dataclass(frozen=True, eq=False)
class PencilRealization:
    k: int
    m: int
    e: np.ndarray
    a0: np.ndarray
    coeffs: tuple
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise DimensionError(f"need k >= 1 and m >= 1, got k={self.k}, m={self.m}")
        e = np.asarray(self.e, dtype=float).reshape(-1)
        if e.size != self.m:
            raise DimensionError(f"e has length {e.size}, expected {self.m}")
        if abs(np.linalg.norm(e) - 1.0) > UNIT_TOL:
            raise ValueError(f"e must be a unit vector, |e| = {np.linalg.norm(e):.15f}")
        if len(self.coeffs) != self.k:
            raise DimensionError(f"{len(self.coeffs)} coefficient matrices for k={self.k}")
        a0 = _checked_coefficient(self.a0, self.m, "A0", self.tol)
        coeffs = tuple(
            _checked_coefficient(a, self.m, f"A{i + 1}", self.tol)
            for i, a in enumerate(self.coeffs)
        )
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "coeffs", coeffs)

    @cached_property
    def rotation(self) -> np.ndarray:
        return householder(self.e)

    @cached_property
    def rotated(self) -> tuple[np.ndarray, tuple]:
        q = self.rotation
        return q @ self.a0 @ q, tuple(q @ a @ q for a in self.coeffs)

    def __repr__(self) -> str:
        return f"PencilRealization(k={self.k}, m={self.m})"


def b_form(r: PencilRealization) -> tuple[np.ndarray, list[np.ndarray]]:
    b0 = r.a0 + sum(r.coeffs)
    return b0, [a.copy() for a in r.coeffs]


def from_b_form(k: int, m: int, e, b0, bs: Sequence, tol: float = DEFAULT_TOL) -> PencilRealization:
    b0 = hermitian(b0)
    bs = [require_psd(b, tol, what=f"B{i + 1}") for i, b in enumerate(bs)]
    if len(bs) != k:
        raise DimensionError(f"{len(bs)} coefficient matrices for k={k}")
    a0 = b0 - sum(bs)
    if not is_psd(a0, tol):
        raise NotPSDError("B0 - sum(B_i) is not PSD")
    return PencilRealization(k=k, m=m, e=e, a0=a0, coeffs=tuple(bs), tol=tol)


def _as_tuple(x) -> MatrixTuple:
    if isinstance(x, MatrixTuple):
        return x
    if isinstance(x, np.ndarray) and x.ndim == 2:
        return MatrixTuple((x,))
    return MatrixTuple(tuple(x))


def _kron_sum(a0: np.ndarray, coeffs: Sequence[np.ndarray], items: Sequence[np.ndarray]) -> np.ndarray:
    n = items[0].shape[0]
    out = np.kron(a0, np.eye(n))
    for a, x in zip(coeffs, items):
        out = out + np.kron(a, x)
    return out


def assemble_pencil(r: PencilRealization, x) -> np.ndarray:
    """A0 (x) I_n + sum_i A_i (x) X_i, of size m*n."""
    x = _as_tuple(x)
    if x.k != r.k:
        raise DimensionError(f"realization has arity {r.k}, point has {x.k} coordinates")
    return hermitian(_kron_sum(r.a0, r.coeffs, x.items))


def evaluate(r: PencilRealization, x, tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL,
             check_domain: bool = True) -> np.ndarray:
    """F(X): short of the rotated pencil onto the leading n coordinates."""
    x = _as_tuple(x)
    if x.k != r.k:
        raise DimensionError(f"realization has arity {r.k}, point has {x.k} coordinates")
    a0, coeffs = r.rotated
    pencil = hermitian(_kron_sum(a0, coeffs, x.items))
    if check_domain and not is_psd(pencil, tol):
        raise OutsideDomainError("pencil is not PSD at this point (outside the realized domain)")
    result = shorted_operator(pencil, x.n, rank_tol=rank_tol, tol=tol, check_psd=False)
    return result.short


def evaluate_complex(r: PencilRealization, x: Sequence, check_domain: bool = True) -> np.ndarray:
    """Analytic continuation of F to tuples with Im X_i > 0 (or all Im X_i < 0)."""
    items = [np.asarray(xi, dtype=complex) for xi in x]
    if len(items) != r.k:
        raise DimensionError(f"realization has arity {r.k}, point has {len(items)} coordinates")
    n = items[0].shape[0]
    if any(xi.shape != (n, n) for xi in items):
        raise DimensionError("all coordinates must be square of one dimension")
    if check_domain:
        lows = [np.linalg.eigvalsh(imag_part(xi)) for xi in items]
        upper = all(w[0] > 0 for w in lows)
        lower = all(w[-1] < 0 for w in lows)
        if not (upper or lower):
            raise OutsideDomainError("complex evaluation needs Im X_i > 0 for every i (or < 0 for every i)")
    a0, coeffs = r.rotated
    pencil = _kron_sum(a0.astype(complex), coeffs, items)
    return block_schur_general(pencil, n)


# ---------- small realizations ----------

def identity_realization(k: int = 1, i: int = 0) -> PencilRealization:
    """F(X) = X_i."""
    if not 0 <= i < k:
        raise DimensionError(f"coordinate {i} outside 0..{k - 1}")
    coeffs = tuple(np.array([[1.0 if j == i else 0.0]]) for j in range(k))
    return PencilRealization(k=k, m=1, e=np.array([1.0]), a0=np.zeros((1, 1)), coeffs=coeffs)


def constant_realization(c: float, k: int = 1) -> PencilRealization:
    """F(X) = c I."""
    if c < 0:
        raise ValueError(f"constant must be nonnegative, got {c}")
    coeffs = tuple(np.zeros((1, 1)) for _ in range(k))
    return PencilRealization(k=k, m=1, e=np.array([1.0]), a0=np.array([[float(c)]]), coeffs=coeffs)


