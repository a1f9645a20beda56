#!/usr/bin/env python3
"""Shorted operators (Schur complements onto a leading coordinate block).

For a PSD matrix partitioned as

    Z = [[Z11, Z12],
         [Z21, Z22]]      Z11 is s x s

the short onto the first s coordinates is S = Z11 - Z12 Z22^+ Z21. It is the
largest self-adjoint S with [[S, 0], [0, 0]] <= Z, equivalently

    v* S v = inf_w [v; w]* Z [v; w].

`variational_infimum` evaluates that infimum on its own code path and serves
as the oracle for `shorted_operator`. Subspaces other than the leading block
are handled by the caller through an orthogonal change of basis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from numlin import (
    DEFAULT_TOL,
    RANK_TOL,
    DimensionError,
    NotPSDError,
    hermitian,
    opnorm,
)

log = logging.getLogger("shorted")


class RangeConditionError(ValueError):
    """ran(Z21) is not contained in ran(Z22^1/2) within tolerance."""


class SingularPivotError(ValueError):
    """The pivot complement Z22 is numerically singular."""


@dataclass(frozen=True)
class BlockPartition:
    total_dim: int
    pivot_dim: int

    def __post_init__(self):
        if not 1 <= self.pivot_dim <= self.total_dim:
            raise DimensionError(
                f"pivot dimension {self.pivot_dim} outside 1..{self.total_dim}"
            )

    @classmethod
    def of(cls, z: np.ndarray, s: int) -> "BlockPartition":
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {z.shape}")
        return cls(z.shape[0], s)

    def blocks(self, z: np.ndarray):
        s = self.pivot_dim
        return z[:s, :s], z[:s, s:], z[s:, :s], z[s:, s:]


@dataclass(frozen=True)
class ShortedResult:
    short: np.ndarray      # S, s x s
    c_factor: np.ndarray   # C with Z21 = Z22^1/2 C
    rank_used: int         # retained rank of Z22


def _check_psd(z: np.ndarray, tol: float) -> None:
    w = scipy.linalg.eigh(z, eigvals_only=True)
    if w[0] < -tol * max(1.0, w[-1]):
        raise NotPSDError(
            f"shorted operator needs PSD input: lambda_min={w[0]:.3e}, lambda_max={w[-1]:.3e}"
        )


def shorted_operator(z, s: int, rank_tol: float = RANK_TOL, tol: float = DEFAULT_TOL,
                     check_psd: bool = True) -> ShortedResult:
    """Short of a PSD matrix onto its first s coordinates.

    Eigenvalues of Z22 below rank_tol * lambda_max(Z22) are exact zeros. For
    PSD input the part of Z21 along those directions is bounded by
    sqrt(rank_tol) * |Z|, which sets the floor of the range-condition test.
    """
    z = hermitian(z)
    part = BlockPartition.of(z, s)
    if check_psd:
        _check_psd(z, tol)
    if s == part.total_dim:
        return ShortedResult(short=z.copy(), c_factor=np.zeros((0, s), dtype=z.dtype), rank_used=0)

    z11, z12, z21, z22 = part.blocks(z)
    w, v = scipy.linalg.eigh(z22)
    top = max(float(w[-1]), 0.0)
    keep = w > rank_tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    vr = v[:, keep]
    wr = w[keep]

    outside = z21 - vr @ (vr.conj().T @ z21)
    limit = max(tol, math.sqrt(rank_tol)) * max(1.0, opnorm(z))
    residue = opnorm(outside)
    if residue > limit:
        raise RangeConditionError(
            f"ran(Z21) leaves ran(Z22^1/2): residue {residue:.3e} > {limit:.3e}"
        )

    # C = Z22^{+1/2} Z21 on the retained eigenspace.
    c = (vr / np.sqrt(wr)) @ (vr.conj().T @ z21)
    short = hermitian(z11 - c.conj().T @ c)
    if keep.size and not keep.all():
        log.debug("shorted: truncated %d of %d pivot-complement directions",
                  int((~keep).sum()), keep.size)
    return ShortedResult(short=short, c_factor=c, rank_used=int(keep.sum()))


def variational_infimum(z, v, rank_tol: float = RANK_TOL, tol: float = DEFAULT_TOL) -> float:
    """inf over w of [v; w]* Z [v; w], with s = len(v).

    The minimizer solves Z22 w = -Z21 v; the system is solved in the
    eigenbasis of Z22 with small eigenvalues dropped, and the value is read
    off the full quadratic form.
    """
    z = hermitian(z)
    v = np.asarray(v).reshape(-1)
    part = BlockPartition.of(z, v.size)
    _check_psd(z, tol)
    if v.size == part.total_dim:
        return float(np.real(v.conj() @ z @ v))

    _, _, z21, z22 = part.blocks(z)
    lam, basis = np.linalg.eigh(z22)
    rhs = -(basis.conj().T @ (z21 @ v))
    cut = rank_tol * max(float(lam[-1]), 0.0)
    coords = np.where(lam > cut, rhs / np.where(lam > cut, lam, 1.0), 0.0)
    w = basis @ coords
    full = np.concatenate([v, w])
    return float(np.real(full.conj() @ z @ full))


def block_schur_general(z, s: int, cond_tol: float = 1e-12) -> np.ndarray:
    """Z11 - Z12 Z22^-1 Z21 for a general (complex, not necessarily PSD) matrix."""
    z = np.asarray(z)
    part = BlockPartition.of(z, s)
    z11, z12, z21, z22 = part.blocks(z)
    if s == part.total_dim:
        return z11.copy()
    sigma = scipy.linalg.svdvals(z22)
    if sigma[-1] <= cond_tol * max(opnorm(z), np.finfo(float).tiny):
        raise SingularPivotError(
            f"pivot complement is singular: sigma_min={sigma[-1]:.3e}, |Z|={opnorm(z):.3e}"
        )
    return z11 - z12 @ scipy.linalg.solve(z22, z21)
