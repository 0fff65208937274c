"""Matrix logarithms, generator checks and the embeddability classifier."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import catalog
from .errors import (
    DimensionMismatch,
    NonPositiveSpectrum,
    NotReversibleForP,
    NumericalError,
    SeriesDivergence,
    SingularSystem,
    ZeroB,
)
from .linalg import (
    SpectrumSummary,
    as_matrix,
    cluster_eigenvalues,
    commutator,
    expm,
    inf_norm,
    matrix_poly,
    solve_vandermonde_variant,
    sym_eigen,
)
from .markov import RateMatrix, StochasticMatrix, validate_generator, validate_stochastic
from .reversibility import (
    REVERSIBLE,
    WEAKLY_REVERSIBLE,
    ReversibilityCertificate,
    detailed_balance_residual,
    find_reversing_measure,
    symmetrized,
)
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "EIGEN",
    "SERIES",
    "VANDERMONDE",
    "INTEGRAL",
    "REVERSIBLY_EMBEDDABLE",
    "EMBEDDABLE_NOT_REVERSIBLY",
    "NOT_EMBEDDABLE_NEGATIVE_SIMPLE",
    "PRINCIPAL_LOG_NOT_GENERATOR",
    "NOT_EMBEDDABLE",
    "UNDECIDED",
    "LogCandidate",
    "Violation",
    "NotEmbeddable",
    "Classification",
    "EmbeddabilityReport",
    "principal_log_reversible",
    "principal_log_series",
    "principal_log_integral",
    "log_coefficients_vdm",
    "is_markov_generator",
    "kendall_2x2",
    "classify_embeddability",
    "markov_sqrt_positive",
    "real_sqrt_minus_identity",
    "log_family_minus_identity",
    "theta_set_probe",
    "reversible_spectrum",
]

EIGEN = "EigenSymmetrized"
SERIES = "MercatorSeries"
VANDERMONDE = "VandermondePolynomial"
INTEGRAL = "IntegralForm"

REVERSIBLY_EMBEDDABLE = "ReversiblyEmbeddable"
EMBEDDABLE_NOT_REVERSIBLY = "EmbeddableNotReversibly"
NOT_EMBEDDABLE_NEGATIVE_SIMPLE = "NotEmbeddableNegativeSimpleEigenvalue"
PRINCIPAL_LOG_NOT_GENERATOR = "PrincipalLogNotGenerator"
NOT_EMBEDDABLE = "NotEmbeddable"
UNDECIDED = "Undecided"


@dataclasses.dataclass(frozen=True, eq=False)
class LogCandidate:
    """A real logarithm ``L`` of ``M`` and the residual ``||expm(L) - M||_inf``."""

    L: np.ndarray
    method: str
    residual: float


@dataclasses.dataclass(frozen=True)
class Violation:
    """One failed generator condition: a negative off-diagonal entry or a nonzero row sum."""

    kind: str
    index: tuple[int, ...]
    value: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "index": list(self.index), "value": self.value}


@dataclasses.dataclass(frozen=True)
class NotEmbeddable:
    reason: str


@dataclasses.dataclass(frozen=True, eq=False)
class Classification:
    """Verdict of :func:`classify_embeddability`.

    ``generator`` is the reversible embedding (``ReversiblyEmbeddable``).
    ``pairs`` lists balanced pairs ``(Q, Q~)`` with ``expm(Q) = expm(Q~) = M``:
    the embeddings themselves for ``EmbeddableNotReversibly``, and further
    non-reversible embeddings next to the reversible one otherwise.
    ``commuting`` tells whether the members of each pair commute.
    """

    kind: str
    generator: RateMatrix | None = None
    pairs: tuple[tuple[RateMatrix, RateMatrix], ...] = ()
    commuting: bool | None = None
    violations: tuple[Violation, ...] = ()
    reason: str = ""
    notes: tuple[str, ...] = ()

    @property
    def generators(self) -> list[RateMatrix]:
        out = [self.generator] if self.generator is not None else []
        for a, b in self.pairs:
            out.extend((a, b))
        return out


@dataclasses.dataclass(frozen=True, eq=False)
class EmbeddabilityReport:
    spectrum: SpectrumSummary | None
    reversibility: ReversibilityCertificate
    classification: Classification
    alpha: np.ndarray | None = None
    residuals: dict = dataclasses.field(default_factory=dict)
    det: float | None = None

    @property
    def kind(self) -> str:
        return self.classification.kind


def _log_candidate(L, M, method) -> LogCandidate:
    return LogCandidate(L, method, inf_norm(expm(L) - M))


def _measure(M, p, tol):
    if p is None:
        p = find_reversing_measure(M, tol).measure
        if p is None:
            raise NotReversibleForP("no reversing measure exists")
    p = np.asarray(p)
    if not np.issubdtype(p.dtype, np.floating):
        p = p.astype(np.float64)
    if p.shape != (M.shape[0],):
        raise DimensionMismatch(f"p has shape {p.shape}, matrix is {M.shape}")
    if np.min(p) <= tol.pos_tol:
        raise NotReversibleForP("the measure must be strictly positive")
    residual = detailed_balance_residual(M, p)
    if residual > tol.db_tol:
        raise NotReversibleForP(f"detailed balance residual {residual:.3e} exceeds {tol.db_tol:g}")
    return p


def _sym_decomposition(M, p, tol):
    S = symmetrized(M, p)
    eig = sym_eigen(S, sym_tol=tol.sym_rtol * max(1.0, float(np.max(np.abs(S)))) + tol.db_tol)
    return eig, np.sqrt(p)


def _spectral_function(M, p, fn, tol):
    eig, r = _sym_decomposition(M, p, tol)
    low = eig.eigenvalues[-1]
    if low <= tol.spec_tol:
        raise NonPositiveSpectrum(float(low))
    B = eig.basis
    return (B * fn(eig.eigenvalues)[None, :]) @ B.T / r[:, None] * r[None, :]


def reversible_spectrum(M, p=None, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> SpectrumSummary:
    """Clustered real spectrum of a p-reversible ``M`` via its symmetrization."""
    A = as_matrix(M)
    eig, _ = _sym_decomposition(A, _measure(A, p, tol), tol)
    return cluster_eigenvalues(eig.eigenvalues, tol.cluster_tol)


def principal_log_reversible(M, p=None, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> LogCandidate:
    """Principal logarithm of a p-reversible Markov matrix with positive spectrum.

    With ``D = diag(p)`` the matrix ``S = D^{1/2} M D^{-1/2}`` is symmetric;
    writing ``S = B diag(lam) B.T`` the logarithm is
    ``D^{-1/2} B diag(log lam) B.T D^{1/2}``, which is again p-reversible.
    The input dtype is kept, so ``np.longdouble`` input is processed in
    extended precision.

    Parameters
    ----------
    M : (d, d) array_like or StochasticMatrix
    p : (d,) array_like, optional
        Strictly positive reversing measure; found automatically if omitted.
    """
    A = as_matrix(M)
    p = _measure(A, p, tol)
    L = _spectral_function(A, p, np.log, tol)
    return _log_candidate(L, A, EIGEN)


def markov_sqrt_positive(M2, p=None, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> StochasticMatrix:
    """The unique Markov square root with positive spectrum of a p-reversible ``M2``."""
    A = as_matrix(M2)
    p = _measure(A, p, tol)
    return validate_stochastic(_spectral_function(A, p, np.sqrt, tol), tol=tol)


def _spectral_radius_bound(A) -> float:
    gersh = inf_norm(A)
    if gersh < 1:
        return gersh
    P = np.linalg.matrix_power(A.astype(float), 50)
    return inf_norm(P) ** (1 / 50)


def principal_log_series(M, tol: ToleranceConfig = DEFAULT_TOLERANCES, max_terms=10_000) -> LogCandidate:
    """Mercator series ``sum_n (-1)**(n-1) A**n / n`` for ``A = M - 1``.

    The spectral radius of ``A`` is bounded first by the Gershgorin disc
    radius ``||A||_inf`` and, if that is not conclusive, by
    ``||A**50||_inf ** (1/50)``.
    """
    M = as_matrix(M)
    A = M - np.eye(M.shape[0], dtype=M.dtype)
    rho = _spectral_radius_bound(A)
    if rho >= 1 - tol.rho_margin:
        raise SeriesDivergence(f"spectral radius estimate {rho:.6g} of M - 1 is not below 1")
    L = np.zeros_like(A)
    power = A.copy()
    for n in range(1, max_terms + 1):
        term = power / n
        L = L + term if n % 2 else L - term
        if inf_norm(term) < 1e-15:
            break
        power = power @ A
    return _log_candidate(L, M, SERIES)


def principal_log_integral(M, nodes=64) -> LogCandidate:
    """``log(1 + A) = int_0^1 A (1 + tA)^{-1} dt`` by Gauss-Legendre quadrature."""
    M = as_matrix(M).astype(float)
    d = M.shape[0]
    A = M - np.eye(d)
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = (x + 1) / 2
    L = np.zeros((d, d))
    for tk, wk in zip(t, w):
        L += wk / 2 * np.linalg.solve(np.eye(d) + tk * A, A)
    return _log_candidate(L, M, INTEGRAL)


def log_coefficients_vdm(M, p=None, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Logarithm as a polynomial ``sum_k alpha_k (M - 1)**k`` in ``M - 1``.

    The ``m - 1`` coefficients solve ``sum_k alpha_k mu_i**k = log(lam_i)``
    over the non-unit eigenvalue clusters ``lam_i``, with ``mu_i = lam_i - 1``.

    Returns
    -------
    alpha : ndarray
    candidate : LogCandidate
    """
    A = as_matrix(M)
    spec = reversible_spectrum(A, p, tol)
    centers = spec.distinct_values
    if centers[-1] <= tol.spec_tol:
        raise NonPositiveSpectrum(float(centers[-1]))
    unit = int(np.argmin(np.abs(centers - 1)))
    rest = np.delete(centers, unit)
    alpha = solve_vandermonde_variant(rest - 1, np.log(rest), cluster_tol=tol.cluster_tol)
    L = matrix_poly(A - np.eye(A.shape[0], dtype=A.dtype), alpha.astype(A.dtype))
    return alpha, _log_candidate(L, A, VANDERMONDE)


def is_markov_generator(L, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> tuple[bool, list[Violation]]:
    """Check nonnegative off-diagonal entries and zero row sums, listing every failure."""
    L = as_matrix(L)
    d = L.shape[0]
    out = []
    for i in range(d):
        for j in range(d):
            if i != j and L[i, j] < -tol.entry_tol:
                out.append(Violation("offdiag", (i, j), float(L[i, j])))
    for i, s in enumerate(L.sum(axis=1)):
        if abs(s) > tol.row_tol:
            out.append(Violation("rowsum", (i,), float(s)))
    return not out, out


def kendall_2x2(M, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Decide embeddability of ``[[1-a, a], [b, 1-b]]``.

    Embeddable iff ``a + b < 1``; the generator is then unique and equals
    ``-log(1 - a - b) / (a + b) * (M - 1)``.

    Returns
    -------
    RateMatrix or NotEmbeddable
    """
    A = validate_stochastic(M, tol=tol).entries
    if A.shape != (2, 2):
        raise DimensionMismatch("kendall_2x2 needs a 2x2 matrix")
    a, b = float(A[0, 1]), float(A[1, 0])
    s = a + b
    if s == 0:
        return validate_generator(np.zeros((2, 2)), tol=tol)
    if s >= 1:
        return NotEmbeddable(f"det(M) = 1 - a - b = {1 - s:.6g} is not positive")
    rate = -math.log1p(-s) / s
    Q = rate * (A - np.eye(2))
    return validate_generator(Q, tol=tol)


def real_sqrt_minus_identity(a, b) -> np.ndarray:
    """``I = [[a, b], [-(a**2 + 1) / b, -a]]``, a real square root of ``-1``."""
    if b == 0:
        raise ZeroB("b must be nonzero")
    return np.array([[a, b], [-(a * a + 1) / b, -a]], dtype=float)


def log_family_minus_identity(m, a, b) -> np.ndarray:
    """``(2m + 1) pi I``, a real logarithm of ``-1`` for every integer ``m``."""
    return (2 * int(m) + 1) * math.pi * real_sqrt_minus_identity(a, b)


def theta_set_probe(Q, R, grid, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> list[float]:
    """Grid times ``t`` with ``||expm(tQ) - expm(tR)||_inf <= probe_tol``."""
    Q = as_matrix(Q)
    R = as_matrix(R)
    if Q.shape != R.shape:
        raise DimensionMismatch(f"shapes differ: {Q.shape} vs {R.shape}")
    return [float(t) for t in grid if inf_norm(expm(t * Q) - expm(t * R)) <= tol.probe_tol]


# -- classifier ---------------------------------------------------------------


def _verified(Q, M, tol) -> RateMatrix:
    gen = validate_generator(Q, tol=tol)
    if inf_norm(expm(gen.entries) - M) > tol.emb_tol:
        raise NumericalError("embedding witness failed the exponential round trip")
    return gen


def _pair(Q, R, M, tol):
    return _verified(Q, M, tol), _verified(R, M, tol)


def _det(M) -> float:
    return float(np.linalg.det(np.asarray(M, dtype=float)))


def _classify_2x2(M, cert, spectrum, tol) -> Classification:
    res = kendall_2x2(M, tol)
    if isinstance(res, RateMatrix):
        notes = ()
        if cert.verdict == WEAKLY_REVERSIBLE:
            notes = ("the generator is reversible for a measure with zero entries",)
        return Classification(REVERSIBLY_EMBEDDABLE, generator=_verified(res.entries, M, tol), notes=notes)
    if 1 - M[0, 1] - M[1, 0] < -tol.spec_tol:
        return Classification(NOT_EMBEDDABLE_NEGATIVE_SIMPLE, reason=res.reason)
    return Classification(NOT_EMBEDDABLE, reason=res.reason)


def _classify_nonreversible(M, cert, tol):
    d = M.shape[0]
    x = catalog.match_equal_input(M, tol)
    if x is None:
        return None, Classification(UNDECIDED, reason=f"{cert.verdict} matrix with d = {d} > 2 is outside the decidable cases")
    xbar = float(x.sum())
    spectrum = cluster_eigenvalues([1.0] + [1 - xbar] * (d - 1), tol.cluster_tol)
    lam = 1 - xbar
    if lam > tol.spec_tol:
        rate = -math.log1p(-xbar) / xbar if xbar > 0 else 1.0
        gen = _verified(rate * (M - np.eye(d)), M, tol)
        return spectrum, Classification(
            REVERSIBLY_EMBEDDABLE,
            generator=gen,
            notes=("equal-input matrix; the generator is reversible for a measure with zero entries",),
        )
    if lam < -tol.spec_tol and (d - 1) % 2 == 1:
        return spectrum, Classification(NOT_EMBEDDABLE_NEGATIVE_SIMPLE, reason="equal-input matrix with a negative eigenvalue of odd multiplicity")
    return spectrum, Classification(UNDECIDED, reason="equal-input matrix with singular or evenly repeated negative spectrum")


def _positive_extras(M, tol):
    """Non-reversible embeddings of catalog matrices that also have a reversible one."""
    delta = catalog.match_m_delta(M, tol)
    if delta is not None and delta < 0:
        branches = catalog.cyclic_branches(delta, tol)
        if branches:
            pairs = tuple(_pair(b.plus.entries, b.minus.entries, M, tol) for b in branches)
            return pairs, True, (f"{len(pairs)} further embedding pair(s) by cyclic generators",)
    if catalog.match_dihedral(M, tol) == 2:
        Q = catalog.dihedral_generator().entries
        pair = _pair(2 * Q, 2 * Q.T, M, tol)
        return (pair,), False, ("further embeddings exp(2Q) = exp(2Q^T) by a non-commuting balanced pair",)
    return (), None, ()


def _classify_negative_even(M, spectrum, tol):
    d = M.shape[0]
    delta = catalog.match_m_delta(M, tol) if d == 3 else None
    if delta is not None and delta > 0:
        if delta > catalog.EPSILON * (1 + 1e-12):
            return Classification(NOT_EMBEDDABLE, reason=f"M(delta) with delta = {delta:.6g} above exp(-pi sqrt(3)) is not embeddable")
        pairs = tuple(_pair(a.entries, b.entries, M, tol) for a, b in catalog.balanced_pair_logs_d3(delta, tol))
        return Classification(EMBEDDABLE_NOT_REVERSIBLY, pairs=pairs, commuting=True)
    if catalog.match_dihedral(M, tol) == 1:
        Q = catalog.dihedral_generator().entries
        pair = _pair(Q, Q.T, M, tol)
        comm = inf_norm(commutator(Q, Q.T)) <= tol.emb_tol
        return Classification(EMBEDDABLE_NOT_REVERSIBLY, pairs=(pair,), commuting=comm)
    facts = ", ".join(f"{v:.6g} (x{k})" for v, k in zip(spectrum.distinct_values, spectrum.multiplicities))
    return Classification(UNDECIDED, reason=f"negative eigenvalues all have even multiplicity: {facts}")


def classify_embeddability(M, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> EmbeddabilityReport:
    """Decide (reversible) embeddability of a Markov matrix where possible.

    Reversible matrices with positive spectrum are decided completely: the
    principal logarithm is their only reversible logarithm, so ``M`` is
    reversibly embeddable iff it is a generator. A negative eigenvalue of odd
    multiplicity rules out any real logarithm. ``2 x 2`` matrices are decided
    by Kendall's criterion. Negative eigenvalues of even multiplicity and
    non-reversible matrices with ``d > 2`` are decided only for recognised
    catalog families; everything else is reported as ``Undecided``.
    """
    A = validate_stochastic(M, tol=tol).entries
    d = A.shape[0]
    cert = find_reversing_measure(A, tol)
    det = _det(A)

    if cert.verdict != REVERSIBLE:
        if d == 2:
            return EmbeddabilityReport(None, cert, _classify_2x2(A, cert, None, tol), det=det)
        spectrum, cls = _classify_nonreversible(A, cert, tol)
        return EmbeddabilityReport(spectrum, cert, cls, det=det)

    p = cert.measure
    spectrum = reversible_spectrum(A, p, tol)
    centers = spectrum.distinct_values
    # the spectral product keeps relative accuracy where LU cancels
    det = float(np.prod(centers ** spectrum.multiplicities))
    if d == 2:
        return EmbeddabilityReport(spectrum, cert, _classify_2x2(A, cert, spectrum, tol), det=det)

    if np.any(np.abs(centers) <= tol.spec_tol):
        cls = Classification(UNDECIDED, reason="an eigenvalue is zero within spec_tol; no logarithm exists or the spectrum is too close to singular")
        return EmbeddabilityReport(spectrum, cert, cls, det=det)

    negative = centers < -tol.spec_tol
    if np.any(negative & (spectrum.multiplicities % 2 == 1)):
        cls = Classification(NOT_EMBEDDABLE_NEGATIVE_SIMPLE, reason="a negative eigenvalue has odd multiplicity, so M has no real logarithm")
        return EmbeddabilityReport(spectrum, cert, cls, det=det)
    if np.any(negative):
        return EmbeddabilityReport(spectrum, cert, _classify_negative_even(A, spectrum, tol), det=det)

    cand = principal_log_reversible(A, p, tol)
    residuals = {EIGEN: cand.residual}
    alpha = None
    notes = []
    try:
        alpha, vdm = log_coefficients_vdm(A, p, tol)
        residuals[VANDERMONDE] = vdm.residual
        gap = inf_norm(vdm.L - cand.L)
        if gap > 1e-8:
            notes.append(f"polynomial and eigen logarithms differ by {gap:.3e}")
    except SingularSystem as exc:
        notes.append(f"polynomial logarithm skipped: {exc}")

    ok, violations = is_markov_generator(cand.L, tol)
    if not ok:
        cls = Classification(PRINCIPAL_LOG_NOT_GENERATOR, violations=tuple(violations), reason="the principal logarithm is the only reversible logarithm and is not a generator", notes=tuple(notes))
        return EmbeddabilityReport(spectrum, cert, cls, alpha, residuals, det)
    gen = _verified(cand.L, A, tol)
    pairs, commuting, extra = _positive_extras(A, tol)
    cls = Classification(REVERSIBLY_EMBEDDABLE, generator=gen, pairs=pairs, commuting=commuting, notes=tuple(notes) + extra)
    return EmbeddabilityReport(spectrum, cert, cls, alpha, residuals, det)
