"""Concrete matrix families and the cyclic Poisson-process machinery.

The 3x3 cyclic generators ``Q+(lam) = lam (P - 1)`` and ``Q-(lam) = Q+(lam).T``
(``P`` the cyclic shift ``0 -> 1 -> 2 -> 0``) exponentiate to circulant
matrices whose first row is ``(p0, p1, p2)(lam)``, the law of a Poisson count
reduced mod 3. Their exponentials are symmetric exactly when
``sqrt(3) lam / 2`` is a multiple of pi.
"""

from __future__ import annotations

import dataclasses
import math

import mpmath
import numpy as np

from .errors import ParameterOutOfRange
from .linalg import as_matrix, expm, inf_norm
from .markov import RateMatrix, StochasticMatrix, validate_generator, validate_stochastic
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "SQRT3",
    "EPSILON",
    "EPSILON_DIHEDRAL",
    "CyclicBranch",
    "equal_input_markov",
    "equal_input_generator",
    "constant_input_generator",
    "m_delta",
    "q_pair",
    "cyclic_generator",
    "dihedral_generator",
    "dihedral_generator_from_permutations",
    "dihedral_markov",
    "dihedral_markov_closed_form",
    "f_ell",
    "poisson_cycle_prob",
    "lambda_k",
    "delta_k",
    "cyclic_branches",
    "balanced_pair_logs_d3",
    "match_m_delta",
    "match_equal_input",
    "match_dihedral",
]

SQRT3 = math.sqrt(3.0)
EPSILON = math.exp(-math.pi * SQRT3)
EPSILON_DIHEDRAL = math.exp(-2 * SQRT3 * math.pi)

_CYCLE = np.array([[-1, 1, 0], [0, -1, 1], [1, 0, -1]], dtype=float)
_DIHEDRAL = np.array([[-9, 6, 3, 0], [2, -9, 4, 3], [3, 0, -9, 6], [4, 3, 2, -9]], dtype=float)


def _consts(dtype):
    dtype = np.dtype(dtype)
    one = dtype.type(1)
    return np.arctan(one) * 4, np.sqrt(dtype.type(3))


def equal_input_generator(x) -> RateMatrix:
    """``-xbar * 1 + C_x`` where every row of ``C_x`` equals ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(x < 0):
        raise ParameterOutOfRange("x must be a nonnegative vector")
    d = x.size
    return validate_generator(np.tile(x, (d, 1)) - x.sum() * np.eye(d))


def equal_input_markov(x) -> StochasticMatrix:
    """``(1 - xbar) * 1 + C_x``; needs ``xbar <= d / (d - 1)`` and ``x_i >= xbar - 1``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(x < 0):
        raise ParameterOutOfRange("x must be a nonnegative vector")
    d = x.size
    xbar = x.sum()
    if d > 1 and xbar > d / (d - 1) * (1 + 1e-15):
        raise ParameterOutOfRange(f"sum(x) = {xbar} exceeds d/(d-1) = {d / (d - 1)}")
    if d and np.min(x) < xbar - 1 - 1e-15:
        raise ParameterOutOfRange(f"diagonal 1 - sum(x) + min(x) = {1 - xbar + np.min(x)} is negative")
    return validate_stochastic(np.tile(x, (d, 1)) + (1 - xbar) * np.eye(d))


def constant_input_generator(c, d) -> RateMatrix:
    if not c > 0:
        raise ParameterOutOfRange("c must be positive")
    return validate_generator(c * (np.ones((d, d)) - d * np.eye(d)))


def m_delta(delta, dtype=np.float64) -> StochasticMatrix:
    """The symmetric constant-input matrix with diagonal ``(1 - 2 delta) / 3``.

    Its spectrum is ``{1, -delta, -delta}``. Valid for ``-1 <= delta <= 1/2``.
    """
    delta = np.dtype(dtype).type(delta)
    if not -1 <= delta <= 0.5:
        raise ParameterOutOfRange(f"delta = {delta} outside [-1, 1/2]")
    M = np.full((3, 3), (1 + delta) / 3, dtype=dtype)
    np.fill_diagonal(M, (1 - 2 * delta) / 3)
    return validate_stochastic(M)


def cyclic_generator(lam, c=0.0, dtype=np.float64) -> np.ndarray:
    """``lam (P - 1) + c (J - 3)``: cyclic rates ``lam`` plus constant input ``c``."""
    t = np.dtype(dtype).type
    return t(lam) * _CYCLE.astype(dtype) + t(c) * (np.ones((3, 3), dtype=dtype) - 3 * np.eye(3, dtype=dtype))


def q_pair(lam, dtype=np.float64) -> tuple[RateMatrix, RateMatrix]:
    """Clockwise and anticlockwise cyclic generators ``(Q+(lam), Q-(lam))``."""
    if not lam > 0:
        raise ParameterOutOfRange("lambda must be positive")
    plus = cyclic_generator(lam, dtype=dtype)
    return validate_generator(plus), validate_generator(plus.T.copy())


def dihedral_generator(dtype=np.float64) -> RateMatrix:
    pi, s3 = _consts(dtype)
    return validate_generator(pi / (2 * s3) * _DIHEDRAL.astype(dtype))


def _perm_matrix(images, dtype):
    P = np.zeros((len(images), len(images)), dtype=dtype)
    for i, j in enumerate(images):
        P[i, j] = 1
    return P


def dihedral_generator_from_permutations(dtype=np.float64) -> np.ndarray:
    """``alpha (a - e) + beta (b - e) + gamma (a^2 - e)`` for ``a = (1234)``, ``b = (12)(34)``."""
    pi, s3 = _consts(dtype)
    a = _perm_matrix([1, 2, 3, 0], dtype)
    b = _perm_matrix([1, 0, 3, 2], dtype)
    e = np.eye(4, dtype=dtype)
    alpha, beta, gamma = 2 * pi / s3, pi / s3, 3 * pi / (2 * s3)
    return alpha * (a - e) + beta * (b - e) + gamma * (a @ a - e)


def dihedral_markov(dtype=np.float64) -> StochasticMatrix:
    return validate_stochastic(expm(dihedral_generator(dtype).entries))


def dihedral_markov_closed_form(dtype=np.float64) -> np.ndarray:
    pi, s3 = _consts(dtype)
    eps = np.exp(-2 * s3 * pi)
    M = np.full((4, 4), (1 - eps) / 4, dtype=dtype)
    for i, j in ((0, 2), (1, 3), (2, 0), (3, 1)):
        M[i, j] = (1 + 3 * eps) / 4
    return M


def _f_closed(ell, x):
    s = SQRT3 * x / 2
    e = math.exp(-x / 2)
    if ell == 0:
        return (math.exp(x) + 2 * e * math.cos(s)) / 3
    sign = -1 if ell == 1 else 1
    return (math.exp(x) - e * (math.cos(s) + sign * SQRT3 * math.sin(s))) / 3


def _f_series(ell, x):
    if x == 0:
        return 1.0 if ell == 0 else 0.0
    # extra digits absorb the cancellation of terms of size up to e^|x|
    dps = 30 + int(abs(x) / math.log(10))
    with mpmath.workdps(dps):
        X = mpmath.mpf(x)
        X3 = X ** 3
        n = ell
        term = X ** ell / mpmath.factorial(ell)
        total = term
        while True:
            term = term * X3 / ((n + 1) * (n + 2) * (n + 3))
            n += 3
            total += term
            if n > abs(x) and abs(term) < mpmath.mpf("1e-17") * abs(total):
                break
        return float(total)


def f_ell(ell, x, backend="closed") -> float:
    """The three-way split ``f_ell(x) = sum_m x**(3m+ell) / (3m+ell)!`` of ``e**x``.

    ``backend="closed"`` uses the trigonometric closed forms
    ``f0 = (e^x + 2 e^{-x/2} cos(s)) / 3`` and
    ``f1, f2 = (e^x - e^{-x/2} (cos(s) -+ sqrt(3) sin(s))) / 3`` with
    ``s = sqrt(3) x / 2``; ``backend="series"`` sums the power series in
    extended precision.
    """
    if ell not in (0, 1, 2):
        raise ParameterOutOfRange("ell must be 0, 1 or 2")
    x = float(x)
    if backend == "closed":
        return _f_closed(ell, x)
    if backend == "series":
        return _f_series(ell, x)
    raise ValueError(f"unknown backend {backend!r}")


def poisson_cycle_prob(lam, ell) -> float:
    """``P(S mod 3 = ell)`` for ``S ~ Poisson(lam)``, i.e. ``e^{-lam} f_ell(lam)``."""
    if not lam > 0:
        raise ParameterOutOfRange("lambda must be positive")
    if ell not in (0, 1, 2):
        raise ParameterOutOfRange("ell must be 0, 1 or 2")
    s = SQRT3 * lam / 2
    damp = math.exp(-1.5 * lam)
    if ell == 0:
        return (1 + 2 * damp * math.cos(s)) / 3
    sign = -1 if ell == 1 else 1
    return (1 - damp * (math.cos(s) + sign * SQRT3 * math.sin(s))) / 3


def lambda_k(k) -> float:
    """``2 (2k+1) pi / sqrt(3)``: rates where ``expm(Q+)`` is symmetric with negative spectrum."""
    if k < 0:
        raise ParameterOutOfRange("k must be nonnegative")
    return 2 * (2 * k + 1) * math.pi / SQRT3


def delta_k(k) -> float:
    """``exp(-(2k+1) pi sqrt(3))``, so that ``expm(Q+(lambda_k)) = M(delta_k)``."""
    if k < 0:
        raise ParameterOutOfRange("k must be nonnegative")
    return math.exp(-(2 * k + 1) * math.pi * SQRT3)


@dataclasses.dataclass(frozen=True, eq=False)
class CyclicBranch:
    """One pair ``lam (P - 1) + c (J - 3)`` and its transpose with ``expm = M(delta)``.

    ``j`` counts half turns: the complex eigenvalues of the generator have
    imaginary parts ``+-j pi``. Odd ``j`` give ``delta > 0``, even ``j >= 2``
    give ``delta < 0``; ``c = 0`` marks a pure cycle.
    """

    j: int
    lam: float
    c: float
    plus: RateMatrix
    minus: RateMatrix

    @property
    def pure(self) -> bool:
        return self.c == 0


def cyclic_branches(delta, tol: ToleranceConfig = DEFAULT_TOLERANCES, max_branches=10_000) -> list[CyclicBranch]:
    """All cyclic-plus-constant-input balanced pairs with ``expm = M(delta)``.

    The generator ``lam (P - 1) + c (J - 3)`` is circulant, with eigenvalues
    ``0`` and ``-3 lam / 2 - 3 c +- i sqrt(3) lam / 2``. Matching the double
    eigenvalue ``-delta`` of ``M(delta)`` forces ``sqrt(3) lam / 2 = j pi``
    with ``(-1)**j = sign(-delta)`` and ``exp(-j pi sqrt(3) - 3 c) = |delta|``;
    the branch is a generator iff ``c >= 0``. Every branch is verified by
    exponentiation before it is returned.
    """
    delta = float(delta)
    if delta == 0 or not -1 <= delta <= 0.5:
        raise ParameterOutOfRange(f"delta = {delta} must be nonzero and in [-1, 1/2]")
    target = m_delta(delta).entries
    log_abs = math.log(abs(delta))
    j = 1 if delta > 0 else 2
    out = []
    while len(out) < max_branches:
        c = (-j * math.pi * SQRT3 - log_abs) / 3
        if c < -1e-12 * max(1.0, abs(log_abs)):
            break
        c = max(c, 0.0)
        lam = 2 * j * math.pi / SQRT3
        plus = cyclic_generator(lam, c)
        if inf_norm(expm(plus) - target) <= tol.emb_tol:
            out.append(CyclicBranch(j, lam, c, validate_generator(plus, tol=tol), validate_generator(plus.T.copy(), tol=tol)))
        j += 2
    return out


def balanced_pair_logs_d3(delta, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> list[tuple[RateMatrix, RateMatrix]]:
    """Commuting balanced pairs ``(Q+, Q-)`` of generators with ``expm = M(delta)``.

    Defined for ``0 < delta <= delta_0``; at ``delta = delta_k`` there are
    ``k + 1`` pairs, the last one a pure cycle ``Q+-(lambda_k)``.
    """
    delta = float(delta)
    if not 0 < delta <= EPSILON * (1 + 1e-12):
        raise ParameterOutOfRange(f"M(delta) is not embeddable for delta = {delta} outside (0, {EPSILON}]")
    return [(b.plus, b.minus) for b in cyclic_branches(delta, tol)]


def match_m_delta(M, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Return ``delta`` when ``M`` equals ``M(delta)`` entrywise, else ``None``."""
    A = as_matrix(M)
    if A.shape != (3, 3):
        return None
    off = A[~np.eye(3, dtype=bool)]
    diag = np.diag(A)
    if np.ptp(off) > tol.row_tol or np.ptp(diag) > tol.row_tol:
        return None
    return float(3 * np.mean(off) - 1)


def match_equal_input(M, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Return ``x`` when ``M = (1 - sum(x)) 1 + C_x``, else ``None``."""
    A = as_matrix(M)
    d = A.shape[0]
    if d < 2:
        return None
    offdiag = ~np.eye(d, dtype=bool)
    x = np.empty(d)
    for j in range(d):
        col = A[offdiag[:, j], j]
        if np.ptp(col) > tol.row_tol:
            return None
        x[j] = float(np.mean(col))
    if np.max(np.abs(np.diag(A) - (1 - x.sum() + x))) > tol.row_tol:
        return None
    return x


def match_dihedral(M, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Return ``1`` or ``2`` when ``M`` is the dihedral example or its square."""
    A = as_matrix(M)
    if A.shape != (4, 4):
        return None
    M1 = dihedral_markov().entries
    for power, ref in ((1, M1), (2, M1 @ M1)):
        if inf_norm(A - ref) <= tol.emb_tol:
            return power
    return None
