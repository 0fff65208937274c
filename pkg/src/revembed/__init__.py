"""Reversibility and embeddability of finite Markov matrices."""

from .errors import *  # noqa: F401,F403
from .linalg import (
    SpectrumSummary,
    SymEigen,
    cluster_eigenvalues,
    commutator,
    expm,
    inf_norm,
    matrix_poly,
    solve_vandermonde_variant,
    sym_eigen,
)
from .markov import (
    ProbabilityVector,
    RateMatrix,
    StochasticMatrix,
    block_decompose,
    communication_classes,
    equilibrium_basis,
    validate_generator,
    validate_stochastic,
)
from .reversibility import (
    ReversibilityCertificate,
    detailed_balance_residual,
    find_reversing_measure,
    is_balanced_pair,
    jordan_product,
    tilde,
    tridiagonal_reversing_measure,
)
from .embedding import (
    EmbeddabilityReport,
    LogCandidate,
    classify_embeddability,
    is_markov_generator,
    kendall_2x2,
    log_coefficients_vdm,
    markov_sqrt_positive,
    principal_log_reversible,
    principal_log_series,
    theta_set_probe,
)
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__version__ = "0.1.0"
