"""Dense real matrix kernels.

Everything here works on small square ``numpy`` arrays and preserves the
floating dtype of the input, so ``np.longdouble`` matrices are processed in
extended precision end to end (nothing below calls LAPACK except
:func:`solve_vandermonde_variant`).
"""

from __future__ import annotations

import dataclasses
import math
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotSymmetric, Overflow, SingularSystem

__all__ = [
    "SymEigen",
    "SpectrumSummary",
    "as_matrix",
    "inf_norm",
    "sym_eigen",
    "expm",
    "matrix_poly",
    "solve_vandermonde_variant",
    "vandermonde_variant_det",
    "commutator",
    "cluster_eigenvalues",
]


class SymEigen(NamedTuple):
    """Orthogonal eigendecomposition ``S = basis @ diag(eigenvalues) @ basis.T``."""

    eigenvalues: np.ndarray
    basis: np.ndarray


@dataclasses.dataclass(frozen=True)
class SpectrumSummary:
    """Eigenvalues grouped into clusters of numerically equal values.

    ``distinct_values`` are cluster means in descending order, ``widths`` the
    spread (max - min) inside each cluster and ``m`` the number of clusters,
    i.e. the degree of the minimal polynomial for a diagonalisable matrix.
    """

    distinct_values: np.ndarray
    multiplicities: np.ndarray
    widths: np.ndarray
    cluster_tol: float

    @property
    def m(self) -> int:
        return len(self.distinct_values)

    @property
    def d(self) -> int:
        return int(self.multiplicities.sum())

    def to_dict(self) -> dict:
        return {
            "distinct_values": [float(v) for v in self.distinct_values],
            "multiplicities": [int(k) for k in self.multiplicities],
            "widths": [float(w) for w in self.widths],
            "m": self.m,
            "cluster_tol": float(self.cluster_tol),
        }


def as_matrix(A) -> np.ndarray:
    """Return ``A`` as a square floating array; float and longdouble are kept."""
    A = np.asarray(A)
    if not np.issubdtype(A.dtype, np.floating):
        A = A.astype(np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def inf_norm(A) -> float:
    """Induced infinity norm (maximum absolute row sum)."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(A), axis=-1)))


def _check_same_shape(A, B):
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes differ: {A.shape} vs {B.shape}")


def sym_eigen(S, sym_tol=None, max_sweeps=100) -> SymEigen:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    S : (d, d) array_like
        Symmetric matrix. Tiny asymmetries are averaged out.
    sym_tol : float, optional
        Largest accepted ``|S_ij - S_ji|``. Defaults to ``1e-9 * max|S|``.
    max_sweeps : int
        Sweep budget; :class:`NoConvergence` is raised when exceeded.

    Returns
    -------
    SymEigen
        Eigenvalues sorted descending and an orthogonal basis whose columns
        are the eigenvectors. Each column is signed so that its entry of
        largest modulus is positive, which makes the output deterministic.
    """
    S = as_matrix(S)
    d = S.shape[0]
    dtype = S.dtype
    scale = float(np.max(np.abs(S))) if S.size else 0.0
    if sym_tol is None:
        sym_tol = 1e-9 * scale
    asym = float(np.max(np.abs(S - S.T))) if S.size else 0.0
    if asym > sym_tol:
        raise NotSymmetric(asym, sym_tol)

    A = (S + S.T) / 2
    V = np.eye(d, dtype=dtype)
    eps = np.finfo(dtype).eps
    one = dtype.type(1)
    norm = np.sqrt(np.sum(A * A))

    offdiag = ~np.eye(d, dtype=bool)
    for _ in range(max_sweeps):
        if not np.sqrt(np.sum(A[offdiag] ** 2)) > eps * norm * 1e-3:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0:
                    continue
                gap = A[q, q] - A[p, p]
                if abs(gap) > 1e100 * abs(apq):
                    # tiny coupling: t = 1 / (2 theta) without forming theta
                    t = apq / gap
                else:
                    theta = gap / (2 * apq)
                    t = (one if theta >= 0 else -one) / (abs(theta) + np.sqrt(theta * theta + one))
                c = one / np.sqrt(t * t + one)
                s = t * c
                app = A[p, p] - t * apq
                aqq = A[q, q] + t * apq
                colp, colq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp, rowq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, p], A[q, q] = app, aqq
                A[p, q] = A[q, p] = 0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        if np.sqrt(np.sum(A[offdiag] ** 2)) > eps * norm * 1e-3:
            raise NoConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    for k in range(d):
        i = int(np.argmax(np.abs(V[:, k])))
        if V[i, k] < 0:
            V[:, k] = -V[:, k]
    return SymEigen(w, V)


def _taylor_order(eps) -> int:
    # smallest K with tail bound 2 * 0.5**(K+1) / (K+1)! below the target
    target = min(1e-16, float(eps) / 2)
    K = 1
    while 2 * 0.5 ** (K + 1) / math.factorial(K + 1) > target:
        K += 1
    return K


def expm(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Taylor core.

    ``A`` is scaled by a power of two until ``||A / 2**s||_1 <= 0.5``, the
    truncated Taylor series is evaluated by Horner's rule, and the result is
    squared ``s`` times.
    """
    A = as_matrix(A)
    d = A.shape[0]
    dtype = A.dtype
    norm1 = float(np.max(np.sum(np.abs(A), axis=0))) if d else 0.0
    if not math.isfinite(norm1):
        raise Overflow("matrix norm is not finite")
    s = 0 if norm1 <= 0.5 else int(math.ceil(math.log2(norm1 / 0.5)))
    if s > 1100:
        raise Overflow(f"norm {norm1:.3e} is too large for the exponential")
    X = A * dtype.type(2.0) ** -s
    eye = np.eye(d, dtype=dtype)
    T = eye.copy()
    for k in range(_taylor_order(np.finfo(dtype).eps), 0, -1):
        T = eye + (X @ T) / k
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            T = T @ T
    if not np.all(np.isfinite(T)):
        raise Overflow("matrix exponential overflowed")
    return T


def matrix_poly(A, alpha) -> np.ndarray:
    """Evaluate ``sum_{k>=1} alpha[k-1] * A**k`` (no identity term)."""
    A = as_matrix(A)
    alpha = np.asarray(alpha)
    d = A.shape[0]
    if alpha.size == 0:
        return np.zeros_like(A)
    eye = np.eye(d, dtype=A.dtype)
    T = alpha[-1] * eye
    for a in alpha[-2::-1]:
        T = a * eye + A @ T
    return A @ T


def vandermonde_variant_det(mu) -> float:
    """Determinant ``prod(mu_i) * prod_{k>l}(mu_k - mu_l)`` of the system matrix."""
    mu = np.asarray(mu, dtype=float)
    det = float(np.prod(mu))
    for k in range(len(mu)):
        for l in range(k):
            det *= mu[k] - mu[l]
    return det


def solve_vandermonde_variant(mu, rhs, cluster_tol=1e-8, return_residual=False):
    """Solve ``sum_k alpha_k mu_i**k = rhs_i`` for ``k = 1..n``.

    Row ``i`` of the system is ``(mu_i, mu_i**2, ..., mu_i**n)``. It is
    nonsingular exactly when all ``mu_i`` are nonzero and pairwise distinct;
    both are checked against ``cluster_tol`` before solving.

    Returns
    -------
    alpha : ndarray
        Coefficients, length ``n``.
    residual : float
        ``max_i |(V alpha - rhs)_i|``, only when ``return_residual`` is set.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    rhs = np.asarray(rhs, dtype=float).ravel()
    n = mu.size
    if rhs.size != n:
        raise DimensionMismatch(f"{n} nodes but {rhs.size} right-hand sides")
    if n == 0:
        alpha = np.zeros(0)
        return (alpha, 0.0) if return_residual else alpha
    if np.any(np.abs(mu) <= cluster_tol):
        raise SingularSystem("a node is zero within cluster_tol")
    gaps = np.abs(mu[:, None] - mu[None, :])
    np.fill_diagonal(gaps, np.inf)
    if np.min(gaps) <= cluster_tol:
        raise SingularSystem("two nodes coincide within cluster_tol")
    V = mu[:, None] ** np.arange(1, n + 1)[None, :]
    try:
        alpha = np.linalg.solve(V, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if return_residual:
        return alpha, float(np.max(np.abs(V @ alpha - rhs)))
    return alpha


def commutator(A, B) -> np.ndarray:
    """``[A, B] = AB - BA``."""
    A = as_matrix(A)
    B = as_matrix(B)
    _check_same_shape(A, B)
    return A @ B - B @ A


def cluster_eigenvalues(values, cluster_tol=1e-8) -> SpectrumSummary:
    """Group real eigenvalues whose neighbours lie within ``cluster_tol``.

    Values are sorted descending and a new cluster starts whenever the gap to
    the previous value exceeds ``cluster_tol``.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())[::-1]
    if not np.all(np.isfinite(v)):
        raise ValueError("eigenvalues must be finite")
    groups: list[list[float]] = []
    for x in v:
        if groups and groups[-1][-1] - x <= cluster_tol:
            groups[-1].append(x)
        else:
            groups.append([x])
    return SpectrumSummary(
        distinct_values=np.array([np.mean(g) for g in groups]),
        multiplicities=np.array([len(g) for g in groups], dtype=int),
        widths=np.array([g[0] - g[-1] for g in groups]),
        cluster_tol=float(cluster_tol),
    )
