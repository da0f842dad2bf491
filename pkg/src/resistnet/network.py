"""Weighted networks: data model, edge-list I/O, model generators and exhaustions.

A :class:`Network` is a finite, connected, undirected graph with strictly
positive conductances and a distinguished base vertex. Infinite models are
described lazily by :class:`InfiniteNetworkSpec` (a neighbour oracle plus a
canonical enumeration); only finite balls around the base are ever built.
"""

from __future__ import annotations

import logging
import math
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import islice
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

#: Label of the vertex that collapses the complement in a wired subnetwork.
INFINITY = "∞"


class NetworkError(ValueError):
    """Raised when input violates a network invariant or cannot be parsed."""

    def __init__(self, message: str, invariant: str | None = None, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.invariant = invariant
        self.line = line


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    passed: bool
    witness: object = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[InvariantCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[InvariantCheck]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> InvariantCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class Network:
    """Finite weighted network.

    ``edges`` holds one ``(i, j, conductance)`` triple per unordered pair with
    ``i < j`` indexing into ``vertices``. Conductances keep whatever numeric
    type they were given (``Fraction`` stays exact); numerical routines read
    the float view :attr:`conductances`.
    """

    vertices: tuple[str, ...]
    edges: tuple[tuple[int, int, object], ...]
    base: str
    labels: Mapping[str, str] = field(default_factory=dict)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[object, object, object]],
        base: object | None = None,
        vertices: Sequence[object] | None = None,
        labels: Mapping[str, str] | None = None,
        check: bool = True,
    ) -> "Network":
        """Build a network from ``(u, v, c)`` triples.

        Parallel edges are merged by summing conductances, zero conductances
        are dropped. With ``check=True`` every invariant is enforced and a
        :class:`NetworkError` is raised on the first violation; with
        ``check=False`` offending edges are kept so :func:`validate` can
        report them.
        """
        order: dict[str, int] = {}
        if vertices is not None:
            for v in vertices:
                order.setdefault(str(v), len(order))
        merged: dict[tuple[int, int], object] = {}
        for u, v, c in edges:
            u, v = str(u), str(v)
            for w in (u, v):
                if w not in order:
                    order[w] = len(order)
            if c == 0:
                continue
            if check and u == v:
                raise NetworkError(f"self-loop at {u!r}", "no-self-loops")
            if check and not c > 0:
                raise NetworkError(f"nonpositive conductance {c} on ({u}, {v})", "positive")
            i, j = sorted((order[u], order[v]))
            merged[(i, j)] = merged[(i, j)] + c if (i, j) in merged else c
        if not order:
            if base is None:
                raise NetworkError("empty network", "nonempty")
            order[str(base)] = 0
        base = str(base) if base is not None else next(iter(order))
        if base not in order:
            raise NetworkError(f"base vertex {base!r} is not in the network", "base")
        net = cls(
            vertices=tuple(order),
            edges=tuple((i, j, c) for (i, j), c in sorted(merged.items())),
            base=base,
            labels=dict(labels or {}),
        )
        if check:
            report = validate(net)
            if not report.ok:
                bad = report.failures()[0]
                raise NetworkError(f"invariant violated: {bad.name} (witness {bad.witness!r})", bad.name)
        return net

    @classmethod
    def from_matrix(cls, conductance, ids: Sequence[object] | None = None, base: object | None = None) -> "Network":
        """Build a network from a dense symmetric conductance matrix."""
        C = np.asarray(conductance, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise NetworkError("conductance matrix must be square", "shape")
        n = C.shape[0]
        ids = [str(i) for i in (ids if ids is not None else range(n))]
        bad = np.argwhere(~np.isclose(C, C.T, rtol=1e-12, atol=0.0))
        if bad.size:
            i, j = bad[0]
            raise NetworkError(f"asymmetric conductance between {ids[i]} and {ids[j]}", "symmetric")
        edges = [(ids[i], ids[j], C[i, j]) for i in range(n) for j in range(i, n) if C[i, j] != 0]
        return cls.from_edges(edges, base=base if base is not None else ids[0], vertices=ids)

    # -- views ------------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @property
    def base_index(self) -> int:
        return self.index[self.base]

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.intp)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.intp)

    @cached_property
    def conductances(self) -> np.ndarray:
        return np.array([float(e[2]) for e in self.edges], dtype=float)

    @cached_property
    def conductance_matrix(self) -> sp.csr_matrix:
        C = sp.coo_matrix((self.conductances, (self.heads, self.tails)), shape=(self.n, self.n))
        return (C + C.T).tocsr()

    @cached_property
    def total_conductance(self) -> np.ndarray:
        """c(x) for every vertex, in vertex order."""
        out = np.zeros(self.n)
        np.add.at(out, self.heads, self.conductances)
        np.add.at(out, self.tails, self.conductances)
        return out

    @cached_property
    def _adjacency(self) -> list[list[tuple[int, object]]]:
        adj: list[list[tuple[int, object]]] = [[] for _ in self.vertices]
        for i, j, c in self.edges:
            adj[i].append((j, c))
            adj[j].append((i, c))
        return adj

    def neighbors(self, v: str) -> list[tuple[str, object]]:
        return [(self.vertices[j], c) for j, c in self._adjacency[self.index[v]]]

    def degree(self, v: str) -> int:
        return len(self._adjacency[self.index[v]])

    def conductance(self, u: str, v: str):
        j = self.index[v]
        for k, c in self._adjacency[self.index[u]]:
            if k == j:
                return c
        return 0

    def c(self, v: str) -> float:
        return float(self.total_conductance[self.index[v]])

    def edge_list(self) -> list[tuple[str, str, object]]:
        return [(self.vertices[i], self.vertices[j], c) for i, j, c in self.edges]

    def is_tree(self) -> bool:
        return self.m == self.n - 1 and validate(self)["connected"].passed

    def with_base(self, base: str) -> "Network":
        if base not in self.index:
            raise NetworkError(f"base vertex {base!r} is not in the network", "base")
        return Network(self.vertices, self.edges, base, self.labels)

    def __repr__(self) -> str:
        return f"Network(n={self.n}, m={self.m}, base={self.base!r})"


@dataclass(frozen=True, eq=False)
class InfiniteNetworkSpec:
    """Lazy description of an infinite, locally finite network.

    ``neighbor_fn`` maps a vertex id to its ``(neighbour, conductance)`` list
    and must be symmetric; ``enumerate_fn`` yields every vertex exactly once
    in a deterministic order starting at ``base``.
    """

    name: str
    params: Mapping[str, object]
    neighbor_fn: Callable[[str], list[tuple[str, object]]]
    enumerate_fn: Callable[[], Iterator[str]]
    base: str

    def neighbors(self, v: str) -> list[tuple[str, object]]:
        return self.neighbor_fn(v)

    def enumerate(self, limit: int | None = None) -> list[str]:
        return list(islice(self.enumerate_fn(), limit))

    def __repr__(self) -> str:
        args = ",".join(f"{v}" for v in self.params.values())
        return f"InfiniteNetworkSpec({self.name}{':' + args if args else ''})"


NetworkLike = Union[Network, InfiniteNetworkSpec]


@dataclass(frozen=True)
class Exhaustion:
    """Nested vertex lists ``V[G_1] ⊆ V[G_2] ⊆ ...`` around the base vertex."""

    sets: tuple[tuple[str, ...], ...]
    radii: tuple[int, ...]
    exhausted: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(zip(self.radii, self.sets))

    @property
    def last(self) -> tuple[str, ...]:
        return self.sets[-1]


# ---------------------------------------------------------------------------
# validation


def validate(net: Network) -> ValidationReport:
    """Check every network invariant; failures carry a witness vertex or edge."""
    checks = []
    loops = [(net.vertices[i], net.vertices[j]) for i, j, _ in net.edges if i == j]
    checks.append(InvariantCheck("no-self-loops", not loops, loops[0] if loops else None))
    bad = [(net.vertices[i], net.vertices[j], c) for i, j, c in net.edges if not c > 0]
    checks.append(InvariantCheck("positive", not bad, bad[0] if bad else None))
    # one stored entry per unordered pair means symmetry holds by construction
    pairs = [(i, j) for i, j, _ in net.edges]
    dup = len(set(pairs)) != len(pairs) or any(i > j for i, j in pairs)
    checks.append(InvariantCheck("symmetric", not dup, None))
    finite = [v for v, c in zip(net.vertices, net.total_conductance) if not math.isfinite(c)]
    checks.append(InvariantCheck("finite-total-conductance", not finite, finite[0] if finite else None))
    seen = {net.base_index}
    queue = deque(seen)
    adj = [[] for _ in net.vertices]
    for i, j, c in net.edges:
        if c > 0:
            adj[i].append(j)
            adj[j].append(i)
    while queue:
        i = queue.popleft()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    missing = [v for k, v in enumerate(net.vertices) if k not in seen]
    checks.append(InvariantCheck("connected", not missing, missing[0] if missing else None))
    return ValidationReport(tuple(checks))


# ---------------------------------------------------------------------------
# edge-list text format

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def loads_network(text: str, check: bool = True) -> Network:
    """Parse the edge-list format (``#`` comments, ``base <id>``, ``u v c`` lines).

    Syntax errors always raise. With ``check=False`` invariant violations are
    left for :func:`validate` to report instead of raising.
    """
    base = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "base":
            if len(parts) != 2:
                raise NetworkError("base directive takes exactly one vertex id", "syntax", lineno)
            base = parts[1]
            continue
        if len(parts) != 3:
            raise NetworkError(f"expected '<u> <v> <conductance>', got {line!r}", "syntax", lineno)
        u, v, c = parts
        if not _NUMBER.match(c):
            raise NetworkError(f"conductance {c!r} is not a decimal literal", "syntax", lineno)
        value = float(c)
        if check and u == v:
            raise NetworkError(f"self-loop at {u!r}", "no-self-loops", lineno)
        if check and value < 0:
            raise NetworkError(f"nonpositive conductance {c} on ({u}, {v})", "positive", lineno)
        edges.append((u, v, value))
    if not edges and base is None:
        raise NetworkError("no edges", "nonempty")
    return Network.from_edges(edges, base=base, check=check)


def load_network(path, check: bool = True) -> Network:
    with open(path, encoding="utf-8") as fh:
        return loads_network(fh.read(), check)


def dumps_network(net: Network) -> str:
    """Canonical serialization: base directive, then edges in vertex order, 17 digits."""
    lines = [f"base {net.base}"]
    for i, j, c in sorted(net.edges):
        lines.append(f"{net.vertices[i]} {net.vertices[j]} {float(c):.17g}")
    return "\n".join(lines) + "\n"


def dump_network(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_network(net))


# ---------------------------------------------------------------------------
# generators


def _path(n: int) -> Network:
    if n < 2:
        raise NetworkError("path needs n >= 2", "parameter")
    return Network.from_edges([(i, i + 1, 1) for i in range(n - 1)], base=0)


def _cycle(n: int) -> Network:
    if n < 3:
        raise NetworkError("cycle needs n >= 3", "parameter")
    return Network.from_edges([(i, (i + 1) % n, 1) for i in range(n)], base=0)


def _grid(m: int, n: int) -> Network:
    if m < 1 or n < 1 or m * n < 2:
        raise NetworkError("grid needs at least two vertices", "parameter")
    name = lambda i, j: f"{i}_{j}"  # noqa: E731
    edges = [(name(i, j), name(i, j + 1), 1) for i in range(m) for j in range(n - 1)]
    edges += [(name(i, j), name(i + 1, j), 1) for i in range(m - 1) for j in range(n)]
    return Network.from_edges(edges, base=name(0, 0))


def _complete(n: int) -> Network:
    if n < 2:
        raise NetworkError("complete graph needs n >= 2", "parameter")
    return Network.from_edges([(i, j, 1) for i in range(n) for j in range(i + 1, n)], base=0)


def _integer_line(name: str, params: dict, edge_cond: Callable[[int], object]) -> InfiniteNetworkSpec:
    """Integer lattice Z with conductance ``edge_cond(n)`` on the edge (n-1, n)."""

    def neighbors(v: str) -> list[tuple[str, object]]:
        k = int(v)
        return [(str(k + 1), edge_cond(k + 1)), (str(k - 1), edge_cond(k))]

    def enumerate_fn() -> Iterator[str]:
        yield "0"
        k = 1
        while True:
            yield str(k)
            yield str(-k)
            k += 1

    return InfiniteNetworkSpec(name, params, neighbors, enumerate_fn, "0")


def geometric_z(c=2) -> InfiniteNetworkSpec:
    """Integers with ``c_{n-1,n} = c**max(|n|, |n-1|)`` (transient, Harm != 0)."""
    if not c > 1:
        raise NetworkError("geometric-z requires c > 1", "parameter")
    return _integer_line("geometric-z", {"c": c}, lambda n: c ** max(abs(n), abs(n - 1)))


def damped_z(c=2) -> InfiniteNetworkSpec:
    """Integers with ``c_{n-1,n} = c**-max(|n|, |n-1|)``: recurrent, geometric truncation error."""
    if not c > 1:
        raise NetworkError("damped-z requires c > 1", "parameter")
    from fractions import Fraction

    one = Fraction(1) if isinstance(c, int) else 1.0
    return _integer_line("damped-z", {"c": c}, lambda n: one / c ** max(abs(n), abs(n - 1)))


def unit_z() -> InfiniteNetworkSpec:
    return _integer_line("z", {}, lambda n: 1)


def binary_tree() -> InfiniteNetworkSpec:
    """Rooted binary tree with unit conductances; vertex ``i`` has children ``2i+1, 2i+2``."""

    def neighbors(v: str) -> list[tuple[str, object]]:
        i = int(v)
        out = [(str((i - 1) // 2), 1)] if i > 0 else []
        return out + [(str(2 * i + 1), 1), (str(2 * i + 2), 1)]

    def enumerate_fn() -> Iterator[str]:
        i = 0
        while True:
            yield str(i)
            i += 1

    return InfiniteNetworkSpec("binary-tree", {}, neighbors, enumerate_fn, "0")


def ladder() -> InfiniteNetworkSpec:
    """One-sided ladder: rails ``t_n - t_{n+1}``, ``b_n - b_{n+1}`` with resistance
    ``4**-(n+1)``, rungs ``t_n - b_n`` with resistance ``4**-n``. Base is ``t0``."""

    def neighbors(v: str) -> list[tuple[str, object]]:
        side, k = v[0], int(v[1:])
        other = "b" if side == "t" else "t"
        out = [(f"{other}{k}", 4**k), (f"{side}{k + 1}", 4 ** (k + 1))]
        if k > 0:
            out.append((f"{side}{k - 1}", 4**k))
        return out

    def enumerate_fn() -> Iterator[str]:
        k = 0
        while True:
            yield f"t{k}"
            yield f"b{k}"
            k += 1

    return InfiniteNetworkSpec("ladder", {}, neighbors, enumerate_fn, "t0")


def random_network(
    rng: np.random.Generator,
    n: int,
    extra_edge_prob: float = 0.15,
    low: float = 1e-2,
    high: float = 1e2,
    unit: bool = False,
) -> Network:
    """Random connected network: random spanning tree plus Bernoulli extra edges,
    conductances log-uniform in ``[low, high]`` (or all 1 with ``unit=True``)."""
    if n < 2:
        raise NetworkError("random network needs n >= 2", "parameter")
    perm = rng.permutation(n)
    pairs = {tuple(sorted((int(perm[k]), int(perm[rng.integers(0, k)])))) for k in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_edge_prob:
                pairs.add((i, j))
    pairs = sorted(pairs)
    if unit:
        cond = [1.0] * len(pairs)
    else:
        cond = np.exp(rng.uniform(np.log(low), np.log(high), size=len(pairs)))
    return Network.from_edges([(i, j, float(c)) for (i, j), c in zip(pairs, cond)], base=0, vertices=range(n))


def random_tree(rng: np.random.Generator, n: int, low: float = 1e-2, high: float = 1e2) -> Network:
    return random_network(rng, n, extra_edge_prob=0.0, low=low, high=high)


_FINITE = {"path": _path, "cycle": _cycle, "grid": _grid, "complete": _complete}
_INFINITE = {
    "geometric-z": geometric_z,
    "damped-z": damped_z,
    "z": unit_z,
    "binary-tree": binary_tree,
    "ladder": ladder,
}
MODELS = tuple(_FINITE) + tuple(_INFINITE)


def _parse_number(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        try:
            return float(token)
        except ValueError:
            raise NetworkError(f"invalid model parameter {token!r}", "parameter") from None


def generate(model: str, *params) -> NetworkLike:
    """Build a named model. ``model`` may carry parameters as ``name:p1,p2``."""
    if ":" in model:
        model, _, tail = model.partition(":")
        params = tuple(_parse_number(t) for t in tail.split(",") if t.strip()) + tuple(params)
    if model in _FINITE:
        fn = _FINITE[model]
    elif model in _INFINITE:
        fn = _INFINITE[model]
    else:
        raise NetworkError(f"unknown model {model!r}; known: {', '.join(MODELS)}", "model")
    try:
        return fn(*params)
    except TypeError as exc:
        raise NetworkError(f"bad parameters for {model}: {exc}", "parameter") from None


# ---------------------------------------------------------------------------
# exhaustions and subnetworks


def _bfs_layers(parent: NetworkLike, radius: int) -> tuple[list[str], dict[str, int]]:
    dist = {parent.base: 0}
    order = [parent.base]
    queue = deque(order)
    while queue:
        v = queue.popleft()
        if dist[v] == radius:
            continue
        for w, c in parent.neighbors(v):
            if c and w not in dist:
                dist[w] = dist[v] + 1
                order.append(w)
                queue.append(w)
    return order, dist


def ball(parent: NetworkLike, radius: int) -> list[str]:
    """Vertices within ``radius`` edges of the base, in BFS discovery order."""
    return _bfs_layers(parent, radius)[0]


def ball_exhaustion(parent: NetworkLike, radii: Iterable[int]) -> Exhaustion:
    radii = tuple(int(r) for r in radii)
    if not radii:
        raise NetworkError("radii must be nonempty", "parameter")
    if radii[0] < 1 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise NetworkError("radii must be strictly increasing and >= 1", "parameter")
    order, dist = _bfs_layers(parent, radii[-1])
    sets, exhausted = [], []
    for r in radii:
        members = tuple(v for v in order if dist[v] <= r)
        sets.append(members)
        full = isinstance(parent, Network) and len(members) == parent.n
        exhausted.append(full and (max(dist.values()) < r))
    if any(exhausted):
        logger.warning("ball exhaustion covers the whole finite network from radius %d on",
                       radii[exhausted.index(True)])
    return Exhaustion(tuple(sets), radii, tuple(exhausted))


def _check_subset(parent: NetworkLike, vertices: Sequence[str]) -> list[str]:
    vs = list(dict.fromkeys(str(v) for v in vertices))
    if parent.base not in vs:
        raise NetworkError("vertex set must contain the base vertex", "base")
    if isinstance(parent, Network):
        missing = [v for v in vs if v not in parent.index]
        if missing:
            raise NetworkError(f"vertex {missing[0]!r} is not in the parent network", "subset")
    return vs


def _induced_edges(parent: NetworkLike, vs: Sequence[str]):
    member = set(vs)
    pos = {v: k for k, v in enumerate(vs)}
    inner, frontier = {}, {}
    for v in vs:
        for w, c in parent.neighbors(v):
            if not c:
                continue
            if w in member:
                if pos[v] < pos[w]:
                    inner[(v, w)] = inner[(v, w)] + c if (v, w) in inner else c
            else:
                frontier[v] = frontier[v] + c if v in frontier else c
    return inner, frontier


def full_subnetwork(parent: NetworkLike, vertices: Sequence[str]) -> Network:
    """Induced subnetwork with unchanged conductances (the free truncation)."""
    vs = _check_subset(parent, vertices)
    inner, _ = _induced_edges(parent, vs)
    return Network.from_edges(
        [(u, v, c) for (u, v), c in inner.items()], base=parent.base, vertices=vs
    )


def wired_subnetwork(parent: NetworkLike, vertices: Sequence[str]) -> Network:
    """Induced subnetwork plus one vertex :data:`INFINITY` standing for the whole
    complement; each boundary vertex is joined to it by its total cut conductance."""
    vs = _check_subset(parent, vertices)
    if INFINITY in vs:
        raise NetworkError(f"vertex id {INFINITY!r} is reserved", "reserved-id")
    inner, frontier = _induced_edges(parent, vs)
    edges = [(u, v, c) for (u, v), c in inner.items()]
    edges += [(v, INFINITY, frontier[v]) for v in vs if v in frontier]
    order = vs + ([INFINITY] if frontier else [])
    return Network.from_edges(edges, base=parent.base, vertices=order)
