"""Geodesic distance, metric comparisons and distances between measures."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .forms import energy, energy_kernel_element
from .network import (
    Network,
    NetworkError,
    NetworkLike,
    ball,
    full_subnetwork,
    wired_subnetwork,
)
from .resistance import effective_resistance, resistance_matrix


class BudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProbabilityMeasure:
    """Finitely supported probability measure on vertex ids."""

    weights: Mapping[str, float]

    def __post_init__(self):
        w = {str(k): float(v) for k, v in dict(self.weights).items() if v != 0}
        if any(v < 0 for v in w.values()):
            raise ValueError("measure weights must be nonnegative")
        if abs(sum(w.values()) - 1.0) > 1e-12:
            raise ValueError(f"measure weights sum to {sum(w.values())!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, x) -> "ProbabilityMeasure":
        return cls({str(x): 1.0})

    @classmethod
    def uniform(cls, vertices: Iterable) -> "ProbabilityMeasure":
        vs = [str(v) for v in vertices]
        return cls({v: 1.0 / len(vs) for v in vs})

    @property
    def support(self) -> list[str]:
        return list(self.weights)

    def __getitem__(self, x: str) -> float:
        return self.weights.get(x, 0.0)


def _signed_difference(mu: ProbabilityMeasure, nu: ProbabilityMeasure) -> dict[str, float]:
    keys = list(dict.fromkeys(mu.support + nu.support))
    return {k: mu[k] - nu[k] for k in keys}


# ---------------------------------------------------------------------------
# geodesic distance


def _dijkstra(net: Network, sources: Sequence[str]) -> np.ndarray:
    C = net.conductance_matrix.tocsr().copy()
    C.data = 1.0 / C.data
    return dijkstra(C, directed=False, indices=[net.index[s] for s in sources])


@dataclass(frozen=True)
class GeodesicResult:
    value: float
    lower_bound: float
    radius: int | None


def geodesic_search(spec: NetworkLike, x: str, y: str, tol: float = 1e-9,
                    max_radius: int = 200, max_vertices: int = 200_000) -> GeodesicResult:
    """Infimum of path resistance between ``x`` and ``y``.

    For an infinite model, balls around the base grow until the best path
    inside the ball is within ``tol`` of a lower bound covering paths that
    leave the ball (they must reach the ball's frontier and come back).
    """
    if x == y:
        return GeodesicResult(0.0, 0.0, None)
    if isinstance(spec, Network):
        d = _dijkstra(spec, [x])[0, spec.index[y]]
        return GeodesicResult(float(d), float(d), None)
    for r in range(1, max_radius + 1):
        vs = ball(spec, r)
        if len(vs) > max_vertices:
            break
        if x not in vs or y not in vs:
            continue
        G = full_subnetwork(spec, vs)
        member = set(vs)
        frontier = [v for v in vs if any(w not in member for w, c in spec.neighbors(v) if c)]
        D = _dijkstra(G, [x, y])
        best = float(D[0, G.index[y]])
        if frontier:
            fi = [G.index[f] for f in frontier]
            escape = float(D[0, fi].min() + D[1, fi].min())
        else:
            escape = math.inf
        lower = min(best, escape)
        if best - lower <= tol:
            return GeodesicResult(best, lower, r)
    raise BudgetError(f"geodesic search between {x!r} and {y!r} did not close within the budget")


def geodesic_distance(spec: NetworkLike, x: str, y: str, tol: float = 1e-9) -> float:
    return geodesic_search(spec, x, y, tol).value


@dataclass(frozen=True)
class GeodesicBoundRow:
    x: str
    y: str
    resistance: float
    geodesic: float

    @property
    def slack(self) -> float:
        return self.geodesic - self.resistance


@dataclass(frozen=True)
class GeodesicBoundReport:
    rows: tuple[GeodesicBoundRow, ...]
    is_tree: bool
    tol: float = 1e-9

    @property
    def ok(self) -> bool:
        bound = all(r.resistance <= r.geodesic + self.tol for r in self.rows)
        if self.is_tree:
            return bound and all(abs(r.slack) <= self.tol * max(1.0, r.geodesic) for r in self.rows)
        return bound


def geodesic_bound_check(net: Network, pairs: Iterable[tuple[str, str]] | None = None,
                         tol: float = 1e-9) -> GeodesicBoundReport:
    """Resistance against geodesic distance; on trees the two must coincide."""
    pairs = list(pairs) if pairs is not None else list(itertools.combinations(net.vertices, 2))
    sources = list(dict.fromkeys(p[0] for p in pairs))
    D = _dijkstra(net, sources) if sources else np.zeros((0, net.n))
    row = {s: k for k, s in enumerate(sources)}
    vs = list(dict.fromkeys(v for p in pairs for v in p))
    R = resistance_matrix(net, vs) if vs else np.zeros((0, 0))
    col = {v: k for k, v in enumerate(vs)}
    out = tuple(
        GeodesicBoundRow(x, y, float(R[col[x], col[y]]), float(D[row[x], net.index[y]]))
        for x, y in pairs
    )
    return GeodesicBoundReport(out, net.is_tree(), tol)


# ---------------------------------------------------------------------------
# commutator bound


def commutator_norm(net: Network, v) -> float:
    """Operator norm of ``[M_v, Δ]`` on square-summable vertex functions."""
    vals = np.asarray(v.values if hasattr(v, "values") else v, dtype=float)
    K = np.zeros((net.n, net.n))
    d = net.conductances * (vals[net.heads] - vals[net.tails])
    # (v Δ - Δ v)(x, y) = -c_xy (v(x) - v(y)) off the diagonal
    K[net.heads, net.tails] = -d
    K[net.tails, net.heads] = d
    return float(np.linalg.norm(K, 2))


@dataclass(frozen=True)
class CommutatorReport:
    potential_rows: tuple[tuple[float, float], ...]  # (norm^2, 2E(v))
    witness_rows: tuple[tuple[str, str, float, float, float], ...]  # x, y, norm, |v*(x)-v*(y)|^2, R
    tol: float = 1e-8

    @property
    def bound_ok(self) -> bool:
        return all(n2 <= e2 + self.tol for n2, e2 in self.potential_rows)

    @property
    def witness_ok(self) -> bool:
        return all(
            norm <= math.sqrt(2) + self.tol and abs(gap - R) <= 1e-9 * max(1.0, R)
            for _, _, norm, gap, R in self.witness_rows
        )

    @property
    def ok(self) -> bool:
        return self.bound_ok and self.witness_ok


def commutator_bound_check(net: Network, potentials: Iterable | None = None,
                           pairs: Iterable[tuple[str, str]] | None = None,
                           n_random: int = 20, rng: np.random.Generator | None = None,
                           tol: float = 1e-8) -> CommutatorReport:
    """Commutator norm bound for unit-conductance networks (at most 200 vertices),
    plus the dipole witness for each pair."""
    if not np.all(net.conductances == 1.0):
        raise NetworkError("commutator bound requires unit conductances", "unit-conductance")
    if net.n > 200:
        raise ValueError("commutator bound check is limited to 200 vertices")
    rng = rng if rng is not None else np.random.default_rng(0)
    if potentials is None:
        potentials = [rng.standard_normal(net.n) for _ in range(n_random)]
    rows = []
    for v in potentials:
        vals = np.asarray(v.values if hasattr(v, "values") else v, dtype=float)
        rows.append((commutator_norm(net, vals) ** 2, 2.0 * energy(net, vals)))
    if pairs is None:
        pairs = itertools.combinations(net.vertices, 2)
    wit = []
    for x, y in pairs:
        k = energy_kernel_element(net, x) - energy_kernel_element(net, y)
        star = k / math.sqrt(energy(net, k))
        gap = (star[x] - star[y]) ** 2
        wit.append((x, y, commutator_norm(net, star), gap, effective_resistance(net, x, y)))
    return CommutatorReport(tuple(rows), tuple(wit), tol)


# ---------------------------------------------------------------------------
# distances between measures


def tv_distance(mu: ProbabilityMeasure, nu: ProbabilityMeasure) -> float:
    """Total variation as the sum of absolute differences (range [0, 2])."""
    return float(sum(abs(v) for v in _signed_difference(mu, nu).values()))


def tv_distance_variational(mu: ProbabilityMeasure, nu: ProbabilityMeasure,
                            universe: Sequence[str] | None = None) -> float:
    """Supremum of ``sum u (mu - nu)`` over ``|u| <= 1``, by enumerating sign vectors."""
    diff = _signed_difference(mu, nu)
    keys = list(universe) if universe is not None else list(diff)
    if len(keys) > 15:
        raise ValueError("enumeration is limited to 15 vertices")
    vec = np.array([diff.get(k, 0.0) for k in keys])
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=len(keys)):
        best = max(best, float(np.dot(signs, vec)))
    return best


def _measure_network(spec: NetworkLike, mode: str, vertices: Sequence[str] | None) -> Network:
    if mode not in ("free", "wired"):
        raise ValueError("mode must be 'free' or 'wired'")
    if isinstance(spec, Network) and vertices is None:
        return spec
    if vertices is None:
        raise ValueError("a vertex set is required for infinite models")
    return (full_subnetwork if mode == "free" else wired_subnetwork)(spec, vertices)


@dataclass(frozen=True)
class MeasureResistance:
    value: float
    bound_ok: bool


def measure_resistance(net: NetworkLike, mu: ProbabilityMeasure, nu: ProbabilityMeasure,
                       mode: str = "free", vertices: Sequence[str] | None = None,
                       n_random: int = 100, rng: np.random.Generator | None = None,
                       detailed: bool = False):
    """Squared energy norm of ``sum (mu - nu)(x) k_x`` where ``k_x`` is the free
    (or, on a wired truncation, wired) kernel element."""
    G = _measure_network(net, mode, vertices)
    diff = _signed_difference(mu, nu)
    w = np.zeros(G.n)
    for x, a in diff.items():
        if a:
            w += a * energy_kernel_element(G, x).values
    value = energy(G, w)
    if not detailed:
        return value
    rng = rng if rng is not None else np.random.default_rng(0)
    idx = np.array([G.index[x] for x in diff])
    coef = np.array(list(diff.values()))
    ok = True
    for _ in range(n_random):
        u = rng.standard_normal(G.n)
        if float(coef @ u[idx]) ** 2 > value * energy(G, u) * (1 + 1e-9) + 1e-14:
            ok = False
    return MeasureResistance(value, ok)


# ---------------------------------------------------------------------------
# negative semidefiniteness


def kernel_energy_gram(net: Network, vertices: Sequence[str]) -> np.ndarray:
    """``E(k_x, k_y)`` for the kernel elements of ``vertices`` on ``net``."""
    K = np.column_stack([energy_kernel_element(net, v).values for v in vertices])
    n = len(vertices)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = energy(net, K[:, i], K[:, j])
    return G


@dataclass(frozen=True)
class NSDReport:
    max_eigenvalue: float
    threshold: float
    witness: np.ndarray | None
    identity_errors: tuple[float, ...] = ()
    identity_rtol: float = 1e-8

    @property
    def eigen_ok(self) -> bool:
        return self.max_eigenvalue <= self.threshold

    @property
    def identity_ok(self) -> bool:
        return all(e <= self.identity_rtol for e in self.identity_errors)

    @property
    def ok(self) -> bool:
        return self.eigen_ok and self.identity_ok


def zero_sum_max_eigenvalue(M: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of the quadratic form of ``M`` restricted to zero-sum vectors."""
    n = M.shape[0]
    if n < 2:
        return 0.0, np.zeros(n)
    # orthonormal basis of the zero-sum subspace
    Q, _ = np.linalg.qr(np.eye(n) - 1.0 / n)
    Q = Q[:, : n - 1]
    w, U = np.linalg.eigh(Q.T @ (0.5 * (M + M.T)) @ Q)
    return float(w[-1]), Q @ U[:, -1]


def negative_semidefinite_check(d2: np.ndarray, trials: int = 100, energy_gram: np.ndarray | None = None,
                                rng: np.random.Generator | None = None, rtol: float = 1e-9,
                                identity_rtol: float = 1e-8) -> NSDReport:
    """Zero-sum eigen-check of a squared-distance matrix and, when the energy Gram
    matrix of the kernel elements is supplied, the identity
    ``f^T d2 f = -2 |sum f(x) k_x|_E^2`` for random zero-sum ``f``."""
    d2 = np.asarray(d2, dtype=float)
    if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
        raise ValueError("d2 must be square")
    if not np.allclose(d2, d2.T, rtol=1e-12, atol=1e-15) or np.any(np.abs(np.diag(d2)) > 0):
        raise ValueError("d2 must be symmetric with zero diagonal")
    top, vec = zero_sum_max_eigenvalue(d2)
    threshold = rtol * np.linalg.norm(d2, 2)
    witness = vec if top > threshold else None
    errors = []
    if energy_gram is not None:
        rng = rng if rng is not None else np.random.default_rng(0)
        n = d2.shape[0]
        for _ in range(trials):
            f = rng.standard_normal(n)
            f -= f.mean()
            lhs = float(f @ d2 @ f)
            rhs = -2.0 * float(f @ energy_gram @ f)
            errors.append(abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.finfo(float).tiny))
    return NSDReport(top, float(threshold), witness, tuple(errors), identity_rtol)
