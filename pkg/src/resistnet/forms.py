"""Laplacian, transition kernel, energy/dissipation forms and grounded solves."""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .network import Network

# Normwise backward error accepted for a grounded solve.
RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True, eq=False)
class PotentialFunction:
    """Real function on the vertices of ``net`` (values in vertex order)."""

    net: Network
    values: np.ndarray
    pinned: bool = True

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.net.n,):
            raise ValueError(f"expected {self.net.n} values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, v: str) -> float:
        return float(self.values[self.net.index[v]])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.net.vertices, self.values.tolist()))

    def _wrap(self, values, pinned=None) -> "PotentialFunction":
        return PotentialFunction(self.net, values, self.pinned if pinned is None else pinned)

    def __add__(self, other):
        if isinstance(other, PotentialFunction):
            return self._wrap(self.values + other.values, self.pinned and other.pinned)
        return self._wrap(self.values + other, False)

    def __sub__(self, other):
        if isinstance(other, PotentialFunction):
            return self._wrap(self.values - other.values, self.pinned and other.pinned)
        return self._wrap(self.values - other, False)

    def __neg__(self):
        return self._wrap(-self.values)

    def __mul__(self, scalar):
        return self._wrap(self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._wrap(self.values / float(scalar))

    def pin(self) -> "PotentialFunction":
        """Shift by a constant so the base vertex has value 0."""
        return PotentialFunction(self.net, self.values - self.values[self.net.base_index], True)

    def restrict(self, net: Network) -> "PotentialFunction":
        """Values on the vertices of ``net`` (which must be a subset of this network's)."""
        idx = [self.net.index[v] for v in net.vertices]
        return PotentialFunction(net, self.values[idx], self.pinned)

    def __repr__(self) -> str:
        return f"PotentialFunction(n={self.net.n}, pinned={self.pinned})"


@dataclass(frozen=True, eq=False)
class CurrentFlow:
    """Antisymmetric edge function; ``values[e]`` is the flow from ``edges[e][0]`` to ``edges[e][1]``."""

    net: Network
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.net.m,):
            raise ValueError(f"expected {self.net.m} edge values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __call__(self, x: str, y: str) -> float:
        i, j = self.net.index[x], self.net.index[y]
        sign = 1.0
        if i > j:
            i, j, sign = j, i, -1.0
        for e, (a, b, _) in enumerate(self.net.edges):
            if a == i and b == j:
                return sign * float(self.values[e])
        return 0.0

    def __add__(self, other: "CurrentFlow") -> "CurrentFlow":
        return CurrentFlow(self.net, self.values + other.values)

    def __mul__(self, scalar) -> "CurrentFlow":
        return CurrentFlow(self.net, self.values * float(scalar))

    __rmul__ = __mul__

    @classmethod
    def along_path(cls, net: Network, path: Sequence[str]) -> "CurrentFlow":
        """Unit flow along a vertex path (the path's characteristic flow)."""
        vals = np.zeros(net.m)
        pos = {(i, j): e for e, (i, j, _) in enumerate(net.edges)}
        for a, b in zip(path, path[1:]):
            i, j = net.index[a], net.index[b]
            key = (min(i, j), max(i, j))
            if key not in pos:
                raise ValueError(f"({a}, {b}) is not an edge")
            vals[pos[key]] += 1.0 if i < j else -1.0
        return cls(net, vals)


@dataclass(frozen=True)
class LaplacianBlocks:
    """Laplacian in an explicit vertex ordering.

    When ``n_keep`` is set the first ``n_keep`` rows/columns form the kept set
    ``H``: ``A`` is ``H x H``, ``B`` is ``H^c x H`` and ``D`` is ``H^c x H^c``.
    """

    ordering: tuple[str, ...]
    matrix: sp.csr_matrix
    n_keep: int | None = None

    def _split(self):
        if self.n_keep is None:
            raise ValueError("no block partition was requested")
        return self.n_keep

    @property
    def A(self):
        k = self._split()
        return self.matrix[:k, :k]

    @property
    def B(self):
        k = self._split()
        return self.matrix[k:, :k]

    @property
    def D(self):
        k = self._split()
        return self.matrix[k:, k:]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


# ---------------------------------------------------------------------------
# operators


def _values(u, net: Network) -> np.ndarray:
    if isinstance(u, PotentialFunction):
        if u.net is not net and u.net.vertices != net.vertices:
            raise ValueError("potential is defined on a different network")
        return u.values
    if isinstance(u, Mapping):
        return np.array([float(u[v]) for v in net.vertices])
    arr = np.asarray(u, dtype=float)
    if arr.shape != (net.n,):
        raise ValueError(f"expected {net.n} values, got shape {arr.shape}")
    return arr


def laplacian_matrix(net: Network) -> sp.csr_matrix:
    C = net.conductance_matrix
    return (sp.diags(net.total_conductance) - C).tocsr()


def assemble_laplacian(net: Network, ordering: Sequence[str] | None = None,
                       keep: Sequence[str] | None = None) -> LaplacianBlocks:
    """Laplacian rows/columns permuted to ``ordering``; with ``keep`` the kept
    vertices come first (in the given order) followed by the rest."""
    if keep is not None:
        keep = [str(v) for v in keep]
        kept = set(keep)
        ordering = keep + [v for v in (ordering or net.vertices) if v not in kept]
    ordering = tuple(str(v) for v in (ordering if ordering is not None else net.vertices))
    if sorted(ordering) != sorted(net.vertices) or len(set(ordering)) != net.n:
        raise ValueError("ordering must be a permutation of the network's vertices")
    perm = np.array([net.index[v] for v in ordering], dtype=np.intp)
    L = laplacian_matrix(net)[perm][:, perm].tocsr()
    return LaplacianBlocks(ordering, L, None if keep is None else len(keep))


def transition_kernel(net: Network) -> sp.csr_matrix:
    """Row-stochastic matrix ``p(x, y) = c_xy / c(x)``."""
    return (sp.diags(1.0 / net.total_conductance) @ net.conductance_matrix).tocsr()


def laplacian_apply(net: Network, u) -> np.ndarray:
    u = _values(u, net)
    d = net.conductances * (u[net.heads] - u[net.tails])
    out = np.zeros(net.n)
    np.add.at(out, net.heads, d)
    np.add.at(out, net.tails, -d)
    return out


def energy(net: Network, u, v=None) -> float:
    """Dirichlet form: one term ``c_xy (u(x)-u(y)) (v(x)-v(y))`` per edge."""
    a = _values(u, net)
    b = a if v is None else _values(v, net)
    da = a[net.heads] - a[net.tails]
    db = da if v is None else b[net.heads] - b[net.tails]
    return float(np.sum(net.conductances * da * db))


def energy_norm(net: Network, u) -> float:
    return float(np.sqrt(max(energy(net, u), 0.0)))


def drop(net: Network, u) -> CurrentFlow:
    """Current induced by the potential ``u`` through Ohm's law."""
    a = _values(u, net)
    return CurrentFlow(net, net.conductances * (a[net.heads] - a[net.tails]))


def dissipation(net: Network, current: CurrentFlow, other: CurrentFlow | None = None) -> float:
    J = current if other is None else other
    return float(np.sum(current.values * J.values / net.conductances))


def divergence(net: Network, current: CurrentFlow) -> np.ndarray:
    """Net outflow at every vertex."""
    out = np.zeros(net.n)
    np.add.at(out, net.heads, current.values)
    np.add.at(out, net.tails, -current.values)
    return out


def delta(net: Network, x: str) -> np.ndarray:
    out = np.zeros(net.n)
    out[net.index[x]] = 1.0
    return out


# ---------------------------------------------------------------------------
# solves

_SOLVER_CACHE: "weakref.WeakKeyDictionary[Network, dict]" = weakref.WeakKeyDictionary()
_CACHE_LOCK = threading.Lock()


def _factorize(M: sp.spmatrix):
    # Symmetric mode with no pivoting threshold keeps the elimination on the
    # diagonal; minimum degree on A+A^T gives a Cholesky-like ordering. This
    # stays accurate with conductances spanning many orders of magnitude.
    return spla.splu(
        sp.csc_matrix(M),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )


class _Restricted:
    """Factorized Laplacian restricted to a set of free indices."""

    def __init__(self, net: Network, free: np.ndarray):
        self.net = net
        self.free = free
        L = laplacian_matrix(net)
        self.L = L
        self.block = L[free][:, free]
        self.lu = _factorize(self.block) if len(free) else None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return np.zeros_like(rhs)
        x = self.lu.solve(rhs)
        # one step of iterative refinement is cheap and tightens the residual
        r = rhs - self.block @ x
        return x + self.lu.solve(r)


def _restricted(net: Network, fixed: tuple[int, ...]) -> _Restricted:
    with _CACHE_LOCK:
        bucket = _SOLVER_CACHE.setdefault(net, {})
        if fixed in bucket:
            return bucket[fixed]
    mask = np.ones(net.n, dtype=bool)
    mask[list(fixed)] = False
    solver = _Restricted(net, np.flatnonzero(mask))
    with _CACHE_LOCK:
        bucket = _SOLVER_CACHE.setdefault(net, {})
        if len(bucket) > 64:
            bucket.clear()
        bucket[fixed] = solver
    return solver


def backward_error(net: Network, v: np.ndarray, b: np.ndarray) -> float:
    """Normwise backward error of ``v`` as a solution of ``Δv = b``."""
    r = laplacian_apply(net, v) - b
    scale = 2.0 * np.max(net.total_conductance) * np.max(np.abs(v)) + np.max(np.abs(b))
    return float(np.max(np.abs(r)) / scale) if scale > 0 else 0.0


def solve_poisson(net: Network, rhs, ground: str | None = None, check: bool = True) -> np.ndarray:
    """Solve ``Δv = rhs`` with ``v(ground) = 0``. ``rhs`` must sum to zero."""
    b = _values(rhs, net) if not isinstance(rhs, np.ndarray) else np.asarray(rhs, dtype=float)
    if b.shape != (net.n,):
        raise ValueError("right-hand side has the wrong length")
    g = net.base_index if ground is None else net.index[ground]
    if abs(b.sum()) > 1e-12 * max(1.0, np.abs(b).sum()):
        raise ValueError("right-hand side must sum to zero")
    solver = _restricted(net, (g,))
    v = np.zeros(net.n)
    v[solver.free] = solver.solve(b[solver.free])
    if check:
        err = backward_error(net, v, b)
        if not np.isfinite(err) or err > RESIDUAL_TOL:
            raise SolverError("grounded Laplacian solve failed", err)
    return v


class _Elimination:
    """Elimination of free vertices in conductance form.

    Removing vertex ``t`` adds ``c_it c_tj / c(t)`` between each pair of its
    remaining neighbours; back-substitution sets ``v(t)`` to the weighted mean
    of those neighbours. Every operation combines positive quantities, so the
    result is accurate even when conductances span many orders of magnitude,
    which is where a factorization of the grounded matrix loses digits.
    """

    def __init__(self, net: Network, fixed: Sequence[int]):
        n = net.n
        C = net.conductance_matrix.toarray()
        alive = np.ones(n, dtype=bool)
        fixed_mask = np.zeros(n, dtype=bool)
        fixed_mask[list(fixed)] = True
        counts = np.count_nonzero(C, axis=1)
        steps = []
        for _ in range(n - int(fixed_mask.sum())):
            cand = np.where(alive & ~fixed_mask, counts, np.iinfo(counts.dtype).max)
            t = int(np.argmin(cand))
            w = C[t].copy()
            idx = np.flatnonzero(w)
            wv = w[idx]
            ct = wv.sum()
            steps.append((t, idx, wv / ct))
            C[np.ix_(idx, idx)] += np.outer(wv, wv) / ct
            C[idx, idx] = 0.0
            C[t, :] = 0.0
            C[:, t] = 0.0
            alive[t] = False
            counts[idx] = np.count_nonzero(C[idx], axis=1)
        self.steps = steps
        self.reduced = C  # conductances among the fixed vertices

    def extend(self, v: np.ndarray) -> np.ndarray:
        """Harmonic extension of ``v`` from the fixed vertices."""
        v = v.copy()
        for t, idx, weights in reversed(self.steps):
            v[t] = weights @ v[idx]
        return v


DENSE_ELIMINATION_LIMIT = 2000


def _elimination(net: Network, fixed: tuple[int, ...]) -> _Elimination:
    key = ("elim",) + fixed
    with _CACHE_LOCK:
        bucket = _SOLVER_CACHE.setdefault(net, {})
        if key in bucket:
            return bucket[key]
    elim = _Elimination(net, fixed)
    with _CACHE_LOCK:
        bucket = _SOLVER_CACHE.setdefault(net, {})
        if len(bucket) > 64:
            bucket.clear()
        bucket[key] = elim
    return elim


def solve_dirichlet(net: Network, boundary: Mapping[str, float], rhs=None) -> np.ndarray:
    """Solve ``Δv = rhs`` off the boundary with ``v`` prescribed on it (``rhs`` defaults to 0)."""
    if not boundary:
        raise ValueError("boundary must be nonempty")
    fixed = tuple(sorted(net.index[v] for v in boundary))
    if rhs is None and net.n <= DENSE_ELIMINATION_LIMIT:
        v = np.zeros(net.n)
        for k, val in boundary.items():
            v[net.index[k]] = float(val)
        return _elimination(net, fixed).extend(v)
    solver = _restricted(net, fixed)
    v = np.zeros(net.n)
    for k, val in boundary.items():
        v[net.index[k]] = float(val)
    b = np.zeros(net.n) if rhs is None else np.asarray(rhs, dtype=float)
    free = solver.free
    if len(free):
        bound = np.array(fixed, dtype=np.intp)
        r = b[free] - solver.L[free][:, bound] @ v[bound]
        v[free] = solver.solve(r)
        res = laplacian_apply(net, v)[free] - b[free]
        scale = 2.0 * np.max(net.total_conductance) * max(np.max(np.abs(v)), 1e-300) + np.max(np.abs(b))
        if np.max(np.abs(res)) > RESIDUAL_TOL * scale:
            raise SolverError("Dirichlet solve failed", float(np.max(np.abs(res)) / scale))
    return v


def solve_dipole(net: Network, x: str, y: str) -> PotentialFunction:
    """Potential with ``Δv = δ_x - δ_y``, pinned to 0 at the base vertex."""
    if x == y:
        raise ValueError("dipole endpoints must differ")
    b = delta(net, x) - delta(net, y)
    if net.n > DENSE_ELIMINATION_LIMIT:
        return PotentialFunction(net, solve_poisson(net, b), True)
    i, j = net.index[x], net.index[y]
    elim = _elimination(net, tuple(sorted((i, j))))
    # after eliminating everything else, x and y are joined by 1/R(x, y)
    v = np.zeros(net.n)
    v[i] = 1.0 / elim.reduced[i, j]
    v = elim.extend(v)
    v -= v[net.base_index]
    err = backward_error(net, v, b)
    if not np.isfinite(err) or err > RESIDUAL_TOL:
        raise SolverError("dipole solve failed", err)
    return PotentialFunction(net, v, True)


def energy_kernel_element(net: Network, x: str) -> PotentialFunction:
    """The reproducing element ``v_x`` (dipole between ``x`` and the base vertex)."""
    if x == net.base:
        return PotentialFunction(net, np.zeros(net.n), True)
    return solve_dipole(net, x, net.base)


def energy_kernel_matrix(net: Network, vertices: Sequence[str] | None = None) -> np.ndarray:
    """Columns ``v_x`` for each requested vertex (all vertices by default)."""
    vertices = list(net.vertices if vertices is None else vertices)
    o = net.base_index
    solver = _restricted(net, (o,))
    rhs = np.zeros((net.n, len(vertices)))
    for k, v in enumerate(vertices):
        i = net.index[v]
        if i != o:
            rhs[i, k] += 1.0
            rhs[o, k] -= 1.0
    out = np.zeros_like(rhs)
    if len(solver.free):
        out[solver.free] = solver.solve(rhs[solver.free])
    return out
