"""Markov and rate matrix validation, communication classes, equilibria."""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NegativeEntry, NumericalFailure, RowSum
from .linalg import as_matrix
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "StochasticMatrix",
    "RateMatrix",
    "ProbabilityVector",
    "ClassStructure",
    "BlockDecomposition",
    "StrictPositiveEquilibriumImpossible",
    "validate_stochastic",
    "validate_generator",
    "communication_classes",
    "equilibrium_basis",
    "block_decompose",
    "mixture",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclasses.dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Validated row-stochastic matrix. Use :func:`validate_stochastic`."""

    entries: np.ndarray

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclasses.dataclass(frozen=True, eq=False)
class RateMatrix:
    """Validated Markov generator. Use :func:`validate_generator`."""

    entries: np.ndarray

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclasses.dataclass(frozen=True, eq=False)
class ProbabilityVector:
    p: np.ndarray
    strictly_positive: bool

    @classmethod
    def from_array(cls, p, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> "ProbabilityVector":
        p = np.asarray(p)
        if not np.issubdtype(p.dtype, np.floating):
            p = p.astype(np.float64)
        if p.ndim != 1:
            raise DimensionMismatch("probability vector must be one-dimensional")
        if np.any(p < -tol.entry_tol):
            raise ValueError("probability vector has negative entries")
        if abs(float(p.sum()) - 1.0) > tol.row_tol:
            raise ValueError(f"probability vector sums to {float(p.sum())!r}")
        p = np.where(p < 0, 0, p)
        return cls(_frozen(p), bool(np.min(p) > tol.pos_tol))

    @property
    def d(self) -> int:
        return self.p.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.p if dtype is None else self.p.astype(dtype)


@dataclasses.dataclass(frozen=True)
class ClassStructure:
    """Communication classes of the positive-entry digraph.

    ``classes`` are sorted by their smallest state; ``class_order`` lists
    class indices in a topological order of the condensation (a class comes
    before every class it can reach).
    """

    classes: tuple[tuple[int, ...], ...]
    closed_flags: tuple[bool, ...]
    class_order: tuple[int, ...]

    @property
    def closed_classes(self) -> list[tuple[int, ...]]:
        return [c for c, closed in zip(self.classes, self.closed_flags) if closed]


@dataclasses.dataclass(frozen=True, eq=False)
class BlockDecomposition:
    permutation: np.ndarray
    blocks: tuple[StochasticMatrix, ...]

    @property
    def s(self) -> int:
        return len(self.blocks)


@dataclasses.dataclass(frozen=True)
class StrictPositiveEquilibriumImpossible:
    transient_class: tuple[int, ...]


def _validate(raw, target, offdiag_only, entry_tol, row_tol):
    A = as_matrix(raw).copy()
    d = A.shape[0]
    mask = ~np.eye(d, dtype=bool) if offdiag_only else np.ones((d, d), dtype=bool)
    bad = np.argwhere(mask & (A < -entry_tol))
    if len(bad):
        i, j = (int(k) for k in bad[0])
        raise NegativeEntry(i, j, float(A[i, j]))
    A[mask & (A < 0)] = 0
    sums = A.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(float(s) - target) > row_tol:
            raise RowSum(i, float(s), target)
    A.setflags(write=False)
    return A


def validate_stochastic(raw, entry_tol=None, row_tol=None, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> StochasticMatrix:
    """Check nonnegativity and unit row sums; entries in ``[-entry_tol, 0)`` become 0."""
    entry_tol = tol.entry_tol if entry_tol is None else entry_tol
    row_tol = tol.row_tol if row_tol is None else row_tol
    return StochasticMatrix(_validate(raw, 1.0, False, entry_tol, row_tol))


def validate_generator(raw, entry_tol=None, row_tol=None, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> RateMatrix:
    """Check nonnegative off-diagonal entries and zero row sums."""
    entry_tol = tol.entry_tol if entry_tol is None else entry_tol
    row_tol = tol.row_tol if row_tol is None else row_tol
    return RateMatrix(_validate(raw, 0.0, True, entry_tol, row_tol))


def _strong_components(adj: list[list[int]]) -> list[list[int]]:
    # iterative Tarjan; components come out in reverse topological order
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, k = work.pop()
            if k == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for pos in range(k, len(adj[v])):
                w = adj[v][pos]
                if index[w] == -1:
                    work.append((v, pos + 1))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
    return comps


def communication_classes(M, edge_tol=None, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ClassStructure:
    """Strongly connected components of the digraph ``i -> j`` iff ``M_ij > edge_tol``."""
    edge_tol = tol.edge_tol if edge_tol is None else edge_tol
    A = as_matrix(M)
    d = A.shape[0]
    edges = A > edge_tol
    adj = [[int(j) for j in np.flatnonzero(edges[i])] for i in range(d)]
    comps = _strong_components(adj)
    topo = comps[::-1]
    classes = sorted(topo, key=lambda c: c[0])
    label = np.empty(d, dtype=int)
    for k, c in enumerate(classes):
        label[c] = k
    closed = tuple(
        not any(label[j] != k for i in c for j in adj[i]) for k, c in enumerate(classes)
    )
    order = tuple(int(label[c[0]]) for c in topo)
    return ClassStructure(tuple(tuple(c) for c in classes), closed, order)


def equilibrium_basis(M, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> list[ProbabilityVector]:
    """One extreme equilibrium vector per closed communication class.

    On each closed class ``C`` the system ``p (M_C - 1) = 0`` is solved with
    the last equation replaced by ``sum(p) = 1``. Every equilibrium vector of
    ``M`` is a convex combination of the returned vectors.
    """
    A = as_matrix(M)
    d = A.shape[0]
    out = []
    for c in communication_classes(A, tol=tol).closed_classes:
        idx = np.array(c)
        n = len(idx)
        block = A[np.ix_(idx, idx)].astype(float)
        system = block.T - np.eye(n)
        system[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            pc = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"equilibrium solve failed on class {c}") from exc
        residual = float(np.max(np.abs(pc @ block - pc)))
        if residual > 1e-9:
            raise NumericalFailure(f"equilibrium residual {residual:.2e} on class {c}")
        pc = np.where(pc < 0, 0.0, pc)
        p = np.zeros(d)
        p[idx] = pc / pc.sum()
        out.append(ProbabilityVector(_frozen(p), bool(np.min(p) > tol.pos_tol)))
    return out


def mixture(measures: Sequence, weights=None) -> np.ndarray:
    """Convex combination of probability vectors (uniform by default)."""
    P = np.array([np.asarray(m) for m in measures])
    w = np.full(len(P), 1.0 / len(P)) if weights is None else np.asarray(weights, dtype=float)
    return w @ P


def block_decompose(M, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Split ``M`` into irreducible diagonal blocks.

    Returns a :class:`BlockDecomposition` when every communication class is
    closed (equivalently, a strictly positive equilibrium vector exists), and
    :class:`StrictPositiveEquilibriumImpossible` naming the first class that
    is left with positive probability otherwise.
    """
    A = as_matrix(M)
    cs = communication_classes(A, tol=tol)
    for c, closed in zip(cs.classes, cs.closed_flags):
        if not closed:
            return StrictPositiveEquilibriumImpossible(c)
    perm = np.array([i for c in cs.classes for i in c], dtype=int)
    blocks = tuple(StochasticMatrix(_frozen(A[np.ix_(c, c)])) for c in cs.classes)
    return BlockDecomposition(_frozen(perm), blocks)
