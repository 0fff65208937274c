"""Detailed balance, the time-reversal involution and reversing measures."""

from __future__ import annotations

import dataclasses
from collections import deque

import numpy as np

from .errors import DimensionMismatch, NotStrictlyPositive, NotTridiagonal, ZeroTransition
from .linalg import as_matrix
from .markov import ProbabilityVector, communication_classes, mixture
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "REVERSIBLE",
    "WEAKLY_REVERSIBLE",
    "NOT_REVERSIBLE",
    "Witness",
    "ClassResult",
    "ReversibilityCertificate",
    "BalancedPair",
    "tilde",
    "detailed_balance_residual",
    "is_balanced_pair",
    "find_reversing_measure",
    "jordan_product",
    "tridiagonal_reversing_measure",
    "symmetrized",
]

REVERSIBLE = "Reversible"
WEAKLY_REVERSIBLE = "WeaklyReversible"
NOT_REVERSIBLE = "NotReversible"


@dataclasses.dataclass(frozen=True)
class Witness:
    """Evidence against detailed balance on one communication class.

    ``kind == "zero_pattern"``: ``states = (i, j)`` with ``M_ij > 0`` but
    ``M_ji = 0``. ``kind == "cycle"``: ``states`` is a closed walk
    ``s0 -> s1 -> ... -> s0`` whose two orientations have different weight
    products ``forward`` and ``backward``.
    """

    kind: str
    states: tuple[int, ...]
    forward: float
    backward: float

    @property
    def imbalance(self) -> float:
        """``|forward - backward| / max(forward, backward)``."""
        top = max(self.forward, self.backward)
        return abs(self.forward - self.backward) / top if top > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "states": list(self.states),
            "forward": self.forward,
            "backward": self.backward,
            "imbalance": self.imbalance,
        }


@dataclasses.dataclass(frozen=True, eq=False)
class ClassResult:
    states: tuple[int, ...]
    closed: bool
    passed: bool
    measure: np.ndarray | None = None
    witness: Witness | None = None


@dataclasses.dataclass(frozen=True, eq=False)
class ReversibilityCertificate:
    """Outcome of :func:`find_reversing_measure`.

    For ``Reversible`` the ``measures`` are the extreme equilibrium vectors,
    one per irreducible block; every convex combination of them is a
    reversing measure too, and :attr:`measure` is their uniform mixture. For
    ``WeaklyReversible`` there is a single measure that vanishes on the
    failing or transient classes.
    """

    verdict: str
    measures: tuple[np.ndarray, ...]
    witness: Witness | None
    class_results: tuple[ClassResult, ...]

    @property
    def measure(self) -> np.ndarray | None:
        if not self.measures:
            return None
        if len(self.measures) == 1:
            return self.measures[0]
        return mixture(self.measures)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "measures": [[float(x) for x in m] for m in self.measures],
            "witness": self.witness.to_dict() if self.witness else None,
            "classes": [
                {
                    "states": list(r.states),
                    "closed": r.closed,
                    "passed": r.passed,
                    "witness": r.witness.to_dict() if r.witness else None,
                }
                for r in self.class_results
            ],
        }


@dataclasses.dataclass(frozen=True, eq=False)
class BalancedPair:
    A: np.ndarray
    B: np.ndarray
    p: np.ndarray


def _vector(p) -> np.ndarray:
    p = np.asarray(p.p if isinstance(p, ProbabilityVector) else p)
    if not np.issubdtype(p.dtype, np.floating):
        p = p.astype(np.float64)
    return p


def tilde(A, p, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """Time reversal ``D^-1 A^T D`` with ``D = diag(p)``."""
    A = as_matrix(A)
    p = _vector(p)
    if p.shape != (A.shape[0],):
        raise DimensionMismatch(f"p has shape {p.shape}, matrix is {A.shape}")
    if np.min(p) <= tol.pos_tol:
        raise NotStrictlyPositive("tilde needs a strictly positive p")
    return A.T * p[None, :] / p[:, None]


def symmetrized(A, p) -> np.ndarray:
    """``D^{1/2} A D^{-1/2}``; symmetric exactly when ``A`` is p-reversible."""
    A = as_matrix(A)
    r = np.sqrt(_vector(p))
    return r[:, None] * A / r[None, :]


def detailed_balance_residual(A, p) -> float:
    """``max_ij |p_i A_ij - p_j A_ji|``; ``p`` may have zero entries."""
    A = as_matrix(A)
    p = _vector(p)
    if p.shape != (A.shape[0],):
        raise DimensionMismatch(f"p has shape {p.shape}, matrix is {A.shape}")
    F = p[:, None] * A
    return float(np.max(np.abs(F - F.T))) if F.size else 0.0


def is_balanced_pair(A, B, p, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> bool:
    """Whether ``p_i A_ij = p_j B_ji`` holds for all ``i, j`` within ``db_tol``."""
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    p = _vector(p)
    residual = np.max(np.abs(p[:, None] * A - (p[:, None] * B).T))
    return bool(residual <= tol.db_tol)


def jordan_product(A, B) -> np.ndarray:
    """``(AB + BA) / 2``."""
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    return (A @ B + B @ A) / 2


def _tree_path(parent, v):
    path = [v]
    while parent[v] is not None:
        v = parent[v]
        path.append(v)
    return path


def _cycle_through(parent, i, j):
    # closed walk i -> j -> (tree path from j back to i)
    up_i = _tree_path(parent, i)
    up_j = _tree_path(parent, j)
    on_i = set(up_i)
    lca = next(v for v in up_j if v in on_i)
    j_side = up_j[: up_j.index(lca) + 1]
    i_side = up_i[: up_i.index(lca)]
    return [i] + j_side + i_side[::-1][:-1] if i_side else [i] + j_side[:-1]


def _cycle_witness(A, cycle) -> Witness:
    n = len(cycle)
    fwd = float(np.prod([A[cycle[k], cycle[(k + 1) % n]] for k in range(n)]))
    bwd = float(np.prod([A[cycle[(k + 1) % n], cycle[k]] for k in range(n)]))
    return Witness("cycle", tuple(int(v) for v in cycle), fwd, bwd)


def _check_class(A, states, tol):
    edge = A > tol.edge_tol
    for a, i in enumerate(states):
        for j in states[a + 1:]:
            if edge[i, j] != edge[j, i]:
                s, t = (i, j) if edge[i, j] else (j, i)
                return None, Witness("zero_pattern", (int(s), int(t)), float(A[s, t]), float(A[t, s]))

    # breadth-first spanning tree from the lowest state, propagating p_j = p_i M_ij / M_ji
    root = states[0]
    parent = {root: None}
    weight = {root: A.dtype.type(1)}
    queue = deque([root])
    member = set(states)
    while queue:
        v = queue.popleft()
        for w in np.flatnonzero(edge[v]):
            w = int(w)
            if w in member and w not in parent:
                parent[w] = v
                weight[w] = weight[v] * A[v, w] / A[w, v]
                queue.append(w)
    p = np.zeros(A.shape[0], dtype=A.dtype)
    for v, x in weight.items():
        p[v] = x
    p /= p.sum()

    for a, i in enumerate(states):
        for j in states[a + 1:]:
            if not edge[i, j]:
                continue
            if abs(p[i] * A[i, j] - p[j] * A[j, i]) > tol.db_tol:
                return None, _cycle_witness(A, _cycle_through(parent, i, j))
    return p, None


def find_reversing_measure(M, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ReversibilityCertificate:
    """Decide strict, weak or no reversibility of a Markov matrix.

    Each closed communication class is tested on its own: its zero pattern
    must be symmetric, and the measure propagated along a breadth-first
    spanning tree must balance every remaining edge (Kolmogorov's loop
    criterion restricted to the fundamental cycles). A failing edge yields
    the fundamental cycle through it as a witness.
    """
    A = as_matrix(M)
    cs = communication_classes(A, tol=tol)
    results = []
    for states, closed in zip(cs.classes, cs.closed_flags):
        if not closed:
            results.append(ClassResult(states, False, False))
            continue
        p, witness = _check_class(A, states, tol)
        results.append(ClassResult(states, True, witness is None, p, witness))

    closed = [r for r in results if r.closed]
    passing = [r for r in closed if r.passed]
    first_failure = next((r.witness for r in closed if not r.passed), None)
    if passing and len(passing) == len(results):
        return ReversibilityCertificate(REVERSIBLE, tuple(r.measure for r in passing), None, tuple(results))
    if passing:
        p = mixture([r.measure for r in passing])
        return ReversibilityCertificate(WEAKLY_REVERSIBLE, (p,), first_failure, tuple(results))
    return ReversibilityCertificate(NOT_REVERSIBLE, (), first_failure, tuple(results))


def tridiagonal_reversing_measure(M, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ProbabilityVector:
    """Reversing measure of a birth-death chain from ``p_{i+1} = p_i a_i / b_{i+1}``."""
    A = as_matrix(M)
    d = A.shape[0]
    i, j = np.indices(A.shape)
    far = np.abs(i - j) > 1
    if np.any(np.abs(A[far]) > tol.edge_tol):
        raise NotTridiagonal("entries outside the three central diagonals")
    up = np.diag(A, 1)
    down = np.diag(A, -1)
    if np.any(up <= tol.edge_tol) or np.any(down <= tol.edge_tol):
        raise ZeroTransition("birth-death chain needs positive up and down rates")
    p = np.ones(d, dtype=A.dtype)
    for k in range(d - 1):
        p[k + 1] = p[k] * up[k] / down[k]
    return ProbabilityVector.from_array(p / p.sum(), tol)
