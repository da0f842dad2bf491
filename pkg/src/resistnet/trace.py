"""Schur-complement trace, classical network reductions and the shorted operator.

Eliminating a vertex ``t`` from a network joins every pair of its neighbours
``i, j`` by a new conductor ``c_it c_tj / c(t)`` in parallel with whatever is
already there. Series reduction (degree 2) and the wye-delta transform
(degree 3) are special cases. Working directly on conductances keeps every
update a sum of positive terms, so no cancellation occurs even when
conductances span many orders of magnitude.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .forms import assemble_laplacian, solve_dirichlet
from .network import Network, NetworkError, NetworkLike, full_subnetwork
from .resistance import effective_resistance

logger = logging.getLogger(__name__)

PRUNE_RTOL = 1e-13
CONDITION_LIMIT = 1e12
DEFAULT_EPSILONS = tuple(10.0 ** -j for j in range(1, 13))

_TRANSFORM_NAMES = {0: "isolated", 1: "leaf", 2: "series", 3: "wye-delta"}


class TraceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Elimination:
    vertex: str
    degree: int
    transform: str


@dataclass(frozen=True)
class TraceResult:
    """Trace of a network onto a kept vertex set.

    ``laplacian`` is the reduced Laplacian in ``keep`` order before pruning;
    ``network`` is the reduced network after pruning negligible conductances.
    """

    network: Network
    keep: tuple[str, ...]
    laplacian: np.ndarray
    log: tuple[Elimination, ...]
    condition: float = 1.0

    def conductance(self, x: str, y: str) -> float:
        i, j = self.keep.index(x), self.keep.index(y)
        return float(-self.laplacian[i, j])


def _adjacency(net: Network) -> dict[str, dict[str, float]]:
    adj: dict[str, dict[str, float]] = {v: {} for v in net.vertices}
    for u, v, c in net.edge_list():
        adj[u][v] = float(c)
        adj[v][u] = float(c)
    return adj


def _eliminate(adj: dict[str, dict[str, float]], t: str) -> int:
    nbrs = adj.pop(t)
    ct = sum(nbrs.values())
    items = list(nbrs.items())
    for i, _ in items:
        del adj[i][t]
    for a in range(len(items)):
        i, ci = items[a]
        for b in range(a + 1, len(items)):
            j, cj = items[b]
            add = ci * cj / ct
            adj[i][j] = adj[i].get(j, 0.0) + add
            adj[j][i] = adj[j].get(i, 0.0) + add
    return len(items)


def scaled_condition(D) -> float:
    """Condition number of the complement block after symmetric diagonal scaling.

    Diagonal scaling leaves the elimination in conductance form unchanged, so
    this is the conditioning that actually matters for the reduction.
    """
    m = D.shape[0]
    if m == 0:
        return 1.0
    d = np.asarray(D.diagonal(), dtype=float)
    if np.any(d <= 0):
        return np.inf
    s = 1.0 / np.sqrt(d)
    if m <= 2000:
        Ds = (np.asarray(D.todense()) if hasattr(D, "todense") else np.asarray(D)) * s[:, None] * s[None, :]
        return float(np.linalg.cond(Ds))
    import scipy.sparse as sp

    Ds = sp.diags(s) @ sp.csc_matrix(D) @ sp.diags(s)
    lu = spla.splu(sp.csc_matrix(Ds))
    inv = spla.LinearOperator(Ds.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"))
    return float(spla.onenormest(Ds) * spla.onenormest(inv))


def schur_trace(net: Network, keep: Sequence[str], check_condition: bool = True) -> TraceResult:
    """Reduce ``net`` onto ``keep`` by eliminating the complement one vertex at a
    time in minimum-degree order."""
    keep = tuple(dict.fromkeys(str(v) for v in keep))
    if not keep:
        raise ValueError("keep must be nonempty")
    missing = [v for v in keep if v not in net.index]
    if missing:
        raise NetworkError(f"vertex {missing[0]!r} is not in the network", "subset")
    kept = set(keep)
    complement = [v for v in net.vertices if v not in kept]

    cond = 1.0
    if complement and check_condition:
        D = assemble_laplacian(net, keep=keep).D
        cond = scaled_condition(D)
        if not cond <= CONDITION_LIMIT:
            raise TraceError(f"complement block is ill-conditioned (scaled condition {cond:.3e})")

    adj = _adjacency(net)
    order = {v: k for k, v in enumerate(net.vertices)}
    heap = [(len(adj[v]), order[v], v) for v in complement]
    heapq.heapify(heap)
    alive = set(complement)
    log = []
    while heap:
        deg, _, t = heapq.heappop(heap)
        if t not in alive or deg != len(adj[t]):
            if t in alive:
                heapq.heappush(heap, (len(adj[t]), order[t], t))
            continue
        alive.discard(t)
        nbrs = list(adj[t])
        d = _eliminate(adj, t)
        log.append(Elimination(t, d, _TRANSFORM_NAMES.get(d, "star")))
        for w in nbrs:
            if w in alive:
                heapq.heappush(heap, (len(adj[w]), order[w], w))

    pos = {v: k for k, v in enumerate(keep)}
    L = np.zeros((len(keep), len(keep)))
    for u in keep:
        for w, c in adj[u].items():
            L[pos[u], pos[w]] = -c
    np.fill_diagonal(L, -L.sum(axis=1))

    cmax = max((c for u in keep for c in adj[u].values()), default=0.0)
    edges = [
        (u, w, c)
        for u in keep
        for w, c in adj[u].items()
        if pos[u] < pos[w] and c > PRUNE_RTOL * cmax
    ]
    base = net.base if net.base in kept else keep[0]
    reduced = Network.from_edges(edges, base=base, vertices=keep)
    return TraceResult(reduced, keep, L, tuple(log), cond)


def schur_complement_dense(net: Network, keep: Sequence[str]) -> np.ndarray:
    """Block formula ``A - B^T D^{-1} B`` evaluated densely (reference implementation)."""
    blocks = assemble_laplacian(net, keep=keep)
    A = blocks.A.toarray()
    if blocks.n_keep == net.n:
        return A
    B = blocks.B.toarray()
    D = blocks.D.toarray()
    return A - B.T @ np.linalg.solve(D, B)


# ---------------------------------------------------------------------------
# classical transforms


def parallel_merge(net_or_edges, base: str | None = None) -> Network:
    """Merge parallel conductors by summation.

    A :class:`Network` already stores one conductor per pair, so it is
    returned unchanged; a raw edge iterable is merged into a new network.
    """
    if isinstance(net_or_edges, Network):
        return net_or_edges
    return Network.from_edges(list(net_or_edges), base=base)


def _remove_vertex(net: Network, t: str, expected_degree: int, name: str) -> Network:
    if t == net.base:
        raise NetworkError(f"cannot remove the base vertex {t!r}", "base")
    if net.degree(t) != expected_degree:
        raise NetworkError(
            f"{name} needs a vertex of degree {expected_degree}; {t!r} has degree {net.degree(t)}",
            "degree",
        )
    adj = _adjacency(net)
    _eliminate(adj, t)
    vertices = [v for v in net.vertices if v != t]
    pos = {v: k for k, v in enumerate(vertices)}
    edges = [(u, w, c) for u in vertices for w, c in adj[u].items() if pos[u] < pos[w]]
    return Network.from_edges(edges, base=net.base, vertices=vertices)


def series_reduce(net: Network, z: str) -> Network:
    """Replace the two conductors through the degree-2 vertex ``z`` by one."""
    return _remove_vertex(net, z, 2, "series reduction")


def wye_delta(net: Network, t: str) -> Network:
    """Replace the star at the degree-3 vertex ``t`` by a triangle."""
    return _remove_vertex(net, t, 3, "wye-delta")


def reduce_to_pair(net: Network, x: str, y: str) -> float:
    """Conductance of the two-vertex trace onto ``{x, y}``."""
    if x == y:
        raise ValueError("need two distinct vertices")
    return schur_trace(net, [x, y]).conductance(x, y)


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class ConductanceComparison:
    x: str
    y: str
    schur: float
    probabilistic: float

    @property
    def relative_error(self) -> float:
        scale = max(abs(self.probabilistic), abs(self.schur))
        return abs(self.schur - self.probabilistic) / scale if scale else 0.0


@dataclass(frozen=True)
class TraceConductanceReport:
    comparisons: tuple[ConductanceComparison, ...]
    rtol: float = 1e-9

    @property
    def max_relative_error(self) -> float:
        return max((c.relative_error for c in self.comparisons), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_relative_error <= self.rtol

    @property
    def mismatches(self) -> list[ConductanceComparison]:
        return [c for c in self.comparisons if c.relative_error > self.rtol]


def through_complement(net: Network, keep: Sequence[str], x: str, y: str) -> float:
    """Probability that the walk from ``x`` steps into the complement of ``keep``
    and first returns to ``keep`` at ``y``."""
    keep = list(keep)
    kept = set(keep)
    if len(kept) == net.n:
        return 0.0
    h = solve_dirichlet(net, {v: (1.0 if v == y else 0.0) for v in keep})
    cx = net.c(x)
    total = 0.0
    for t, c in net.neighbors(x):
        if t not in kept:
            total += float(c) / cx * h[net.index[t]]
    return total


def trace_conductance_check(net: Network, keep: Sequence[str], rtol: float = 1e-9) -> TraceConductanceReport:
    """Compare Schur-derived trace conductances with ``c_xy + c(x) P[x->y through complement]``."""
    tr = schur_trace(net, keep)
    out = []
    keep = tr.keep
    for a in range(len(keep)):
        for b in range(a + 1, len(keep)):
            x, y = keep[a], keep[b]
            expected = float(net.conductance(x, y)) + net.c(x) * through_complement(net, keep, x, y)
            out.append(ConductanceComparison(x, y, tr.conductance(x, y), expected))
    return TraceConductanceReport(tuple(out), rtol)


def trace_resistance(spec: NetworkLike, x: str, y: str, exhaustion, tol: float = 1e-7):
    """Resistance between ``x`` and ``y`` inside the trace of the largest free
    truncation onto each ``V[G_k]``.

    Trace invariance makes the sequence constant; ``LimitEstimate.constant``
    records whether successive values agree to 1e-8.
    """
    from .limits import LimitEstimate

    ambient = full_subnetwork(spec, exhaustion.last)
    values = []
    for radius, vs in exhaustion:
        if x not in vs or y not in vs:
            raise NetworkError(f"{x!r} and {y!r} must lie in every truncation", "subset")
        # elimination in conductance form does not rely on the block inverse,
        # so the condition guard is skipped for these strongly graded truncations
        tr = schur_trace(ambient, vs, check_condition=False)
        values.append(effective_resistance(tr.network, x, y))
    return LimitEstimate.from_values("trace", exhaustion.radii, values, tol=tol)


def loewner_leq(X: np.ndarray, Y: np.ndarray, atol: float = 0.0, strict: bool = False) -> bool:
    """Whether ``X <= Y`` in Loewner order (``Y - X`` positive semidefinite)."""
    M = np.asarray(Y, dtype=float) - np.asarray(X, dtype=float)
    M = 0.5 * (M + M.T)
    if strict:
        try:
            np.linalg.cholesky(M)
            return True
        except np.linalg.LinAlgError:
            return False
    return bool(np.linalg.eigvalsh(M).min() >= -atol)


def regularized_schur(T: np.ndarray, keep: Sequence[int], eps: float) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    keep = list(keep)
    comp = [i for i in range(T.shape[0]) if i not in set(keep)]
    A = T[np.ix_(keep, keep)]
    if not comp:
        return A
    B = T[np.ix_(comp, keep)]
    D = T[np.ix_(comp, comp)]
    return A - B.T @ np.linalg.solve(D + eps * np.eye(len(comp)), B)


@dataclass(frozen=True)
class ShortedResult:
    matrix: np.ndarray
    iterates: tuple[np.ndarray, ...]
    epsilons: tuple[float, ...]
    converged: bool


def shorted_operator(T, keep: Sequence[int], epsilons: Iterable[float] = DEFAULT_EPSILONS,
                     rtol: float = 1e-9) -> ShortedResult:
    """Limit of ``A - B^T (D + eps)^{-1} B`` as ``eps`` decreases to 0.

    ``keep`` holds row indices of ``T``. The last iterate is returned once
    successive Frobenius differences fall below ``rtol * |A|``; otherwise a
    :class:`TraceError` is raised.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or not np.allclose(T, T.T, rtol=1e-12, atol=1e-14):
        raise ValueError("input must be a symmetric square matrix")
    eps = tuple(float(e) for e in epsilons)
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon schedule must be positive and strictly decreasing")
    keep = [int(k) for k in keep]
    A = T[np.ix_(keep, keep)]
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    iterates = [regularized_schur(T, keep, e) for e in eps]
    converged = len(iterates) >= 2 and np.linalg.norm(iterates[-1] - iterates[-2]) <= rtol * scale
    if len(iterates) == 1:
        converged = True
    if not converged:
        raise TraceError("epsilon schedule did not converge")
    return ShortedResult(iterates[-1], tuple(iterates), eps, converged)
