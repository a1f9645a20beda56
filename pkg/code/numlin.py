#!/usr/bin/env python3
"""Dense self-adjoint linear algebra for schurlift.

Everything here works on plain numpy arrays. A "SymMatrix" is any square
array passed through `hermitian()`, which symmetrizes it to its Hermitian
part; complex Hermitian input is accepted everywhere, real symmetric input
is the fast path.

The PSD convention used throughout the project is relative:

    A is PSD within tol  <=>  lambda_min(A) >= -tol * max(1, lambda_max(A))

Seeded generators for the property suites live at the bottom of the file.
Every generator takes `seed` as an int or a numpy Generator; the same int
always produces bit-identical output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

log = logging.getLogger("numlin")

DEFAULT_TOL = 1e-9
RANK_TOL = 1e-12
COMMUTE_TOL = 1e-9
ISOMETRY_TOL = 1e-12
JOINT_DIAG_TOL = 1e-8
DEFAULT_INTERVAL = (0.1, 10.0)


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class NotPSDError(ValueError):
    """A matrix required to be positive semidefinite has a negative eigenvalue."""


class CommutationError(ValueError):
    """A tuple required to commute does not, within tolerance."""


class ContractionError(ValueError):
    """A matrix required to be a contraction has norm above 1."""


class FunctionDomainError(ValueError):
    """A scalar function is undefined at a (joint) eigenvalue."""


# ---------- basic predicates ----------

def hermitian(a) -> np.ndarray:
    """Return the Hermitian part of a square array (the SymMatrix invariant)."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.iscomplexobj(a):
        a = a.astype(float, copy=False)
    return (a + a.conj().T) / 2


def opnorm(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def eigvalsh(a) -> np.ndarray:
    return scipy.linalg.eigh(hermitian(a), eigvals_only=True)


def lambda_min(a) -> float:
    return float(eigvalsh(a)[0])


def is_psd(a, tol: float = DEFAULT_TOL) -> bool:
    w = eigvalsh(a)
    return bool(w[0] >= -tol * max(1.0, w[-1]))


def require_psd(a, tol: float = DEFAULT_TOL, what: str = "matrix") -> np.ndarray:
    """Symmetrize `a` and raise NotPSDError unless it is PSD within tol."""
    a = hermitian(a)
    w = scipy.linalg.eigh(a, eigvals_only=True)
    if w[0] < -tol * max(1.0, w[-1]):
        raise NotPSDError(f"{what} is not PSD: lambda_min={w[0]:.3e}, lambda_max={w[-1]:.3e}")
    return a


def imag_part(z) -> np.ndarray:
    """Hermitian imaginary part (Z - Z*) / 2i of a square matrix."""
    z = np.asarray(z, dtype=complex)
    return hermitian((z - z.conj().T) / 2j)


def real_part(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return hermitian((z + z.conj().T) / 2)


def loewner_leq(a, b, tol: float = DEFAULT_TOL) -> bool:
    """True iff lambda_min(B - A) >= -tol * max(1, |A|, |B|)."""
    a = hermitian(a)
    b = hermitian(b)
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare {a.shape} with {b.shape}")
    scale = max(1.0, opnorm(a), opnorm(b))
    return lambda_min(b - a) >= -tol * scale


# ---------- eigensolvers ----------

def jacobi_eig(a, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for real symmetric matrices.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius mass is at
    most tol * |A|_F. Returns ascending eigenvalues and an orthogonal basis.
    """
    a = hermitian(a)
    if np.iscomplexobj(a):
        raise DimensionError("jacobi_eig handles real symmetric input only")
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)

    for sweep in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= np.finfo(float).tiny:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        log.warning("jacobi_eig: no convergence after %d sweeps", max_sweeps)

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eig(a, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and unitary eigenbasis of a self-adjoint matrix."""
    a = hermitian(a)
    if method == "jacobi":
        return jacobi_eig(a)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    w, v = scipy.linalg.eigh(a)
    return w, v


def _recompose(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return hermitian((v * w) @ v.conj().T)


# ---------- tuples and contractions ----------

@dataclass(frozen=True, eq=False)
class MatrixTuple:
    """k self-adjoint n x n matrices; `commuting=True` is certified at construction."""

    items: tuple
    commuting: bool = False
    commute_tol: float = COMMUTE_TOL

    def __post_init__(self):
        items = tuple(hermitian(x) for x in self.items)
        if not items:
            raise DimensionError("a MatrixTuple needs at least one matrix")
        n = items[0].shape[0]
        if any(x.shape != (n, n) for x in items):
            raise DimensionError("all matrices of a tuple must share one dimension")
        object.__setattr__(self, "items", items)
        if self.commuting:
            residue = commutator_residue(items)
            bound = self.commute_tol * max(opnorm(x) for x in items) ** 2
            if residue > bound:
                raise CommutationError(
                    f"tuple does not commute: max commutator {residue:.3e} > {bound:.3e}"
                )

    @property
    def k(self) -> int:
        return len(self.items)

    @property
    def n(self) -> int:
        return self.items[0].shape[0]

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def map(self, fn: Callable[[np.ndarray], np.ndarray], commuting: bool | None = None) -> "MatrixTuple":
        keep = self.commuting if commuting is None else commuting
        return MatrixTuple(tuple(fn(x) for x in self.items), commuting=keep)

    def shift(self, c: float) -> "MatrixTuple":
        eye = np.eye(self.n)
        return self.map(lambda x: x + c * eye)

    def conjugate(self, u) -> "MatrixTuple":
        """U* X_i U for every coordinate."""
        u = np.asarray(u)
        return self.map(lambda x: u.conj().T @ x @ u)

    def compress(self, w) -> "MatrixTuple":
        """W* X_i W for an n x m matrix W; commutativity is not assumed afterwards."""
        w = np.asarray(w)
        return self.map(lambda x: w.conj().T @ x @ w, commuting=False)

    def direct_sum(self, other: "MatrixTuple") -> "MatrixTuple":
        if other.k != self.k:
            raise DimensionError(f"arity mismatch {self.k} vs {other.k}")
        both = self.commuting and other.commuting
        return MatrixTuple(
            tuple(scipy.linalg.block_diag(x, y) for x, y in zip(self.items, other.items)),
            commuting=both,
        )

    def midpoint(self, other: "MatrixTuple") -> "MatrixTuple":
        if other.k != self.k or other.n != self.n:
            raise DimensionError("midpoint needs tuples of equal shape")
        return MatrixTuple(tuple((x + y) / 2 for x, y in zip(self.items, other.items)))


def commutator_residue(items: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            worst = max(worst, opnorm(items[i] @ items[j] - items[j] @ items[i]))
    return worst


@dataclass(frozen=True, eq=False)
class Contraction:
    """An m x n matrix W: E -> K with |W| <= 1; `is_isometry` iff W*W = I."""

    matrix: np.ndarray
    is_isometry: bool = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.matrix)
        if w.ndim != 2:
            raise DimensionError(f"a contraction is a matrix, got shape {w.shape}")
        norm = opnorm(w)
        if norm > 1.0 + ISOMETRY_TOL:
            raise ContractionError(f"operator norm {norm:.15f} exceeds 1")
        gram = w.conj().T @ w
        object.__setattr__(self, "matrix", w)
        object.__setattr__(
            self, "is_isometry", bool(opnorm(gram - np.eye(w.shape[1])) <= ISOMETRY_TOL)
        )

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]


# ---------- functional calculus ----------

def _joint_basis(items: Sequence[np.ndarray], rng: np.random.Generator) -> np.ndarray | None:
    coeffs = rng.standard_normal(len(items))
    combo = sum(c * x for c, x in zip(coeffs, items))
    _, basis = scipy.linalg.eigh(hermitian(combo))
    for x in items:
        d = basis.conj().T @ x @ basis
        residue = opnorm(d - np.diag(np.diag(d)))
        if residue > JOINT_DIAG_TOL * max(1.0, opnorm(x)):
            return None
    return basis


def joint_diagonalize(x: MatrixTuple, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Shared eigenbasis U and joint eigenvalues (n x k) of a commuting tuple."""
    if x.k == 1:
        w, u = scipy.linalg.eigh(x[0])
        return u, w[:, None]
    if not x.commuting:
        residue = commutator_residue(x.items)
        bound = COMMUTE_TOL * max(opnorm(m) for m in x.items) ** 2
        if residue > bound:
            raise CommutationError(f"tuple does not commute: max commutator {residue:.3e}")

    rng = np.random.default_rng(seed)
    basis = _joint_basis(x.items, rng)
    if basis is None:
        log.warning("joint diagonalization: first combination failed, retrying")
        basis = _joint_basis(x.items, rng)
    if basis is None:
        raise CommutationError("no random combination separates the joint eigenspaces")
    lams = np.column_stack([np.real(np.diag(basis.conj().T @ m @ basis)) for m in x.items])
    return basis, lams


def apply_scalar_function(f: Callable[..., np.ndarray], x: MatrixTuple, seed: int = 0) -> np.ndarray:
    """U* f(Lambda) U over the joint spectral decomposition of a commuting tuple.

    `f` receives one numpy array per coordinate (the joint eigenvalues) and
    must be vectorized.
    """
    if isinstance(x, np.ndarray):
        x = MatrixTuple((x,))
    basis, lams = joint_diagonalize(x, seed=seed)
    with np.errstate(all="ignore"):
        values = np.asarray(f(*lams.T), dtype=float)
    values = np.broadcast_to(values, (lams.shape[0],))
    if not np.all(np.isfinite(values)):
        bad = lams[~np.isfinite(values)][0]
        raise FunctionDomainError(f"function undefined at joint eigenvalue {tuple(bad)}")
    return _recompose(basis, values)


def psd_sqrt(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    a = require_psd(a, tol)
    w, v = scipy.linalg.eigh(a)
    return _recompose(v, np.sqrt(np.clip(w, 0.0, None)))


def pinv_psd(a, rank_tol: float = RANK_TOL, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose inverse; eigenvalues below rank_tol * lambda_max count as 0."""
    a = require_psd(a, tol)
    w, v = scipy.linalg.eigh(a)
    cut = rank_tol * max(w[-1], 0.0)
    keep = w > cut
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return _recompose(v, inv)


def pd_power(a, p: float) -> np.ndarray:
    w, v = scipy.linalg.eigh(hermitian(a))
    if w[0] <= 0:
        raise NotPSDError(f"matrix power needs a positive definite matrix, lambda_min={w[0]:.3e}")
    return _recompose(v, w ** p)


def weighted_geometric_mean(a, b, t: float) -> np.ndarray:
    """A #_t B = A^1/2 (A^-1/2 B A^-1/2)^t A^1/2."""
    root = pd_power(a, 0.5)
    inv_root = pd_power(a, -0.5)
    inner = pd_power(inv_root @ hermitian(b) @ inv_root, t)
    return hermitian(root @ inner @ root)


def unitary_dilation(w, tol: float = ISOMETRY_TOL) -> np.ndarray:
    """Halmos dilation [[W, (I-WW*)^1/2], [(I-W*W)^1/2, -W*]] of a contraction."""
    w = w.matrix if isinstance(w, Contraction) else np.asarray(w)
    norm = opnorm(w)
    if norm > 1.0 + tol:
        raise ContractionError(f"cannot dilate: operator norm {norm:.15f} exceeds 1")
    m, n = w.shape
    # Both defects come from one SVD so each singular pair satisfies s^2 + d^2 = 1.
    left, s, right_h = scipy.linalg.svd(w)
    d = np.sqrt(1.0 - np.clip(s, 0.0, 1.0) ** 2)
    d_left = np.ones(m)
    d_left[: s.size] = d
    d_right = np.ones(n)
    d_right[: s.size] = d
    defect_left = (left * d_left) @ left.conj().T
    right = right_h.conj().T
    defect_right = (right * d_right) @ right_h
    return np.block([[w, defect_left], [defect_right, -w.conj().T]])


# ---------- seeded generators ----------

def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_orthogonal(n: int, seed) -> np.ndarray:
    return random_unitary(n, seed)


def random_unitary(n: int, seed, complex_: bool = False) -> np.ndarray:
    rng = _rng(seed)
    g = rng.standard_normal((n, n))
    if complex_:
        g = g + 1j * rng.standard_normal((n, n))
    q, r = scipy.linalg.qr(g)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_pd(n: int, interval: Sequence[float] = DEFAULT_INTERVAL, seed=None) -> np.ndarray:
    rng = _rng(seed)
    lo, hi = interval
    q = random_unitary(n, rng)
    return _recompose(q, rng.uniform(lo, hi, size=n))


def random_psd(n: int, rank: int | None = None, scale: float = 1.0, seed=None) -> np.ndarray:
    rng = _rng(seed)
    g = rng.standard_normal((n, n if rank is None else rank))
    return hermitian(scale * g @ g.T / g.shape[1])


def random_commuting_tuple(k: int, n: int, interval: Sequence[float] = DEFAULT_INTERVAL,
                           seed=None) -> MatrixTuple:
    """k matrices sharing one random orthogonal eigenbasis, spectra inside interval."""
    lo, hi = interval
    if lo <= 0 or hi < lo:
        raise ValueError(f"spectrum interval must lie in (0, inf), got {interval}")
    rng = _rng(seed)
    q = random_unitary(n, rng)
    items = tuple(_recompose(q, rng.uniform(lo, hi, size=n)) for _ in range(k))
    return MatrixTuple(items, commuting=True)


def random_pd_tuple(k: int, n: int, interval: Sequence[float] = DEFAULT_INTERVAL,
                    seed=None) -> MatrixTuple:
    """k independent random PD matrices (generally not commuting)."""
    rng = _rng(seed)
    return MatrixTuple(tuple(random_pd(n, interval, rng) for _ in range(k)))


def random_upper_half_tuple(k: int, n: int, interval: Sequence[float] = DEFAULT_INTERVAL,
                            seed=None) -> list[np.ndarray]:
    """k complex matrices A + iB with A self-adjoint and B positive definite."""
    rng = _rng(seed)
    out = []
    for _ in range(k):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        re = hermitian(g) * rng.uniform(0.1, 3.0)
        im = random_pd(n, interval, rng)
        out.append(re + 1j * im)
    return out


def make_dominated_pair(x: MatrixTuple, y: MatrixTuple,
                        margin: float = 1e-3) -> tuple[MatrixTuple, MatrixTuple]:
    """Shift X down by scalars until X'_i <= Y_i - margin*I for every coordinate.

    If a shifted coordinate leaves the positive cone, one common scalar is
    added to both sides of every coordinate. Scalar shifts keep commuting
    tuples commuting.
    """
    if x.k != y.k or x.n != y.n:
        raise DimensionError(f"tuples differ in shape: ({x.k},{x.n}) vs ({y.k},{y.n})")
    eye = np.eye(x.n)
    shifted = []
    for xi, yi in zip(x.items, y.items):
        t = max(0.0, float(eigvalsh(xi - yi)[-1])) + margin
        shifted.append(xi - t * eye)
    low = min(lambda_min(xi) for xi in shifted)
    lift = max(0.0, margin - low)
    x_out = MatrixTuple(tuple(xi + lift * eye for xi in shifted), commuting=x.commuting)
    y_out = y if lift == 0.0 else y.shift(lift)
    return x_out, y_out


def random_isometry(n: int, m: int, seed=None) -> Contraction:
    """Orthonormalized Gaussian m x n matrix (an isometry C^n -> C^m)."""
    if m < n:
        raise DimensionError(f"no isometry from dimension {n} into {m}")
    rng = _rng(seed)
    q, r = scipy.linalg.qr(rng.standard_normal((m, n)), mode="economic")
    return Contraction(q * np.sign(np.diag(r)))


def random_contraction(n: int, m: int, seed=None) -> Contraction:
    rng = _rng(seed)
    g = rng.standard_normal((m, n))
    scale = rng.uniform(0.05, 1.0) / max(opnorm(g), np.finfo(float).tiny)
    return Contraction(g * scale * (1.0 - 1e-15))


def column_selection(n: int, m: int, rows: Iterable[int]) -> Contraction:
    """Coordinate embedding C^n -> C^m sending basis vector j to e_{rows[j]}."""
    rows = list(rows)
    if len(rows) != n or len(set(rows)) != n or not all(0 <= r < m for r in rows):
        raise DimensionError(f"rows {rows} do not select {n} distinct coordinates of {m}")
    w = np.zeros((m, n))
    w[rows, np.arange(n)] = 1.0
    return Contraction(w)
