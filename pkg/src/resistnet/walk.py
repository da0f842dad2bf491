"""Random walks on networks: seeded Monte Carlo and exact absorbing-chain solves.

Simulation runs in fixed blocks of episodes. Block ``i`` draws from its own
PCG64 stream spawned from ``SeedSequence(seed)``, so results depend only on
the seed and never on how many threads ran the blocks.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .forms import energy_kernel_element, solve_dirichlet
from .network import INFINITY, Exhaustion, Network, NetworkLike, wired_subnetwork, full_subnetwork
from .resistance import effective_resistance

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence.spawn(block)"
TRUNCATION_WARN_FRACTION = 1e-3


@dataclass(frozen=True)
class WalkConfig:
    seed: int = 0
    max_steps: int = 10**6
    episodes: int = 10**5
    block_size: int = 8192
    threads: int | None = None

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.episodes < 1 or self.max_steps < 1 or self.block_size < 1:
            raise ValueError("episodes, max_steps and block_size must be positive")

    def blocks(self) -> list[tuple[np.random.Generator, int]]:
        n_blocks = -(-self.episodes // self.block_size)
        seqs = np.random.SeedSequence(int(self.seed)).spawn(n_blocks)
        sizes = [self.block_size] * (n_blocks - 1) + [self.episodes - self.block_size * (n_blocks - 1)]
        return [(np.random.Generator(np.random.PCG64(s)), m) for s, m in zip(seqs, sizes)]

    def workers(self) -> int:
        if self.threads:
            return int(self.threads)
        env = os.environ.get("RESISTNET_THREADS")
        return int(env) if env else 1


@dataclass(frozen=True)
class HittingEstimate:
    estimate: float
    episodes: int
    successes: int
    truncated: int
    seed: int
    algorithm: str = RNG_ALGORITHM

    @property
    def std_error(self) -> float:
        p, n = self.estimate, self.episodes
        return math.sqrt(p * (1 - p) / n) if n else math.nan

    def z_score(self, exact: float) -> float:
        se = self.std_error
        if se == 0:
            return 0.0 if self.estimate == exact else math.inf
        return abs(self.estimate - exact) / se


class _Sampler:
    """Vectorised next-step sampler for a network's transition kernel."""

    def __init__(self, net: Network):
        P = net.conductance_matrix.tocsr()
        P.sort_indices()
        self.indptr = P.indptr
        self.indices = P.indices
        cum = np.empty_like(P.data)
        for x in range(net.n):
            lo, hi = P.indptr[x], P.indptr[x + 1]
            row = np.cumsum(P.data[lo:hi])
            cum[lo:hi] = row / row[-1]
            cum[hi - 1] = 1.0
        # rows occupy disjoint intervals (x, x + 1] of one sorted key array
        rows = np.repeat(np.arange(net.n), np.diff(P.indptr))
        self.keys = rows + cum

    def step(self, pos: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(pos.shape[0])
        k = np.searchsorted(self.keys, pos + u, side="right")
        np.minimum(k, self.indptr[pos + 1] - 1, out=k)
        return self.indices[k]


def _run_blocks(fn, cfg: WalkConfig):
    blocks = cfg.blocks()
    workers = cfg.workers()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: fn(*b), blocks))
    return [fn(rng, m) for rng, m in blocks]


def _escape_block(sampler: _Sampler, a: int, b: int, max_steps: int, rng, m: int):
    pos = np.full(m, a, dtype=np.intp)
    active = np.arange(m)
    success = 0
    steps = 0
    while active.size and steps < max_steps:
        pos[active] = sampler.step(pos[active], rng)
        steps += 1
        hit_b = pos[active] == b
        hit_a = pos[active] == a
        success += int(hit_b.sum())
        active = active[~(hit_a | hit_b)]
    return success, int(active.size)


def simulate_escape(net: Network, a: str, b: str, cfg: WalkConfig | None = None) -> HittingEstimate:
    """Monte Carlo estimate of the probability that the walk from ``a`` reaches
    ``b`` before returning to ``a``."""
    cfg = cfg or WalkConfig()
    if a == b:
        raise ValueError("escape needs two distinct vertices")
    sampler = _Sampler(net)
    ia, ib = net.index[a], net.index[b]
    parts = _run_blocks(lambda rng, m: _escape_block(sampler, ia, ib, cfg.max_steps, rng, m), cfg)
    successes = sum(p[0] for p in parts)
    truncated = sum(p[1] for p in parts)
    if truncated > TRUNCATION_WARN_FRACTION * cfg.episodes:
        logger.warning("%d of %d episodes hit the step limit and were excluded", truncated, cfg.episodes)
    counted = cfg.episodes - truncated
    est = successes / counted if counted else math.nan
    return HittingEstimate(est, counted, successes, truncated, int(cfg.seed))


# ---------------------------------------------------------------------------
# exact absorbing computations


def exact_hitting(net: Network, start: str | None, targets: Iterable[str], avoid: Iterable[str] = ()):
    """Probability of reaching ``targets`` before ``avoid``, for every start vertex
    (vector in vertex order) or for ``start`` alone."""
    targets, avoid = set(map(str, targets)), set(map(str, avoid))
    if targets & avoid:
        raise ValueError("targets and avoid must be disjoint")
    if not targets:
        raise ValueError("targets must be nonempty")
    if not avoid:
        h = np.ones(net.n)
    else:
        boundary = {v: 1.0 for v in targets}
        boundary.update({v: 0.0 for v in avoid})
        h = np.clip(solve_dirichlet(net, boundary), 0.0, 1.0)
    return h if start is None else float(h[net.index[start]])


def escape_probability(net: Network, a: str, b: str) -> float:
    """Exact probability that the walk from ``a`` hits ``b`` before returning to ``a``,
    by conditioning on the first step."""
    h = exact_hitting(net, None, [b], [a])
    ca = net.c(a)
    return float(sum(float(c) / ca * h[net.index[w]] for w, c in net.neighbors(a)))


@dataclass(frozen=True)
class PathIntegralResult:
    x: str
    y: str
    exact: float
    resistance: float
    escape: float
    monte_carlo: HittingEstimate | None = None

    @property
    def mc_resistance(self) -> float:
        if self.monte_carlo is None or not self.monte_carlo.estimate:
            return math.nan
        return self.exact * self.escape / self.monte_carlo.estimate

    @property
    def relative_error(self) -> float:
        return abs(self.exact - self.resistance) / self.resistance

    @property
    def z_score(self) -> float:
        return self.monte_carlo.z_score(self.escape) if self.monte_carlo else math.nan


def path_integral_resistance(net: Network, x: str, y: str, cfg: WalkConfig | None = None,
                             monte_carlo: bool = True) -> PathIntegralResult:
    """``1 / (c(x) P[x -> y])`` exactly and, optionally, with a simulated escape probability."""
    p = escape_probability(net, x, y)
    exact = 1.0 / (net.c(x) * p)
    mc = simulate_escape(net, x, y, cfg) if monte_carlo else None
    return PathIntegralResult(x, y, exact, effective_resistance(net, x, y), p, mc)


@dataclass(frozen=True)
class IdentityReport:
    """Max-norm discrepancy between two vertex functions, relative to ``scale``."""

    error: float
    scale: float
    rtol: float = 1e-9
    details: dict = field(default_factory=dict)

    @property
    def relative_error(self) -> float:
        return self.error / self.scale if self.scale else self.error

    @property
    def ok(self) -> bool:
        return self.relative_error <= self.rtol


def dipole_probability_check(net: Network, x: str, rtol: float = 1e-9) -> IdentityReport:
    """Compare ``v_x`` with ``R(o, x)`` times the probability of hitting ``x`` before ``o``."""
    o = net.base
    if x == o:
        raise ValueError("x must differ from the base vertex")
    v = energy_kernel_element(net, x).values
    R = effective_resistance(net, o, x)
    u = exact_hitting(net, None, [x], [o])
    return IdentityReport(float(np.max(np.abs(v - R * u))), float(np.max(np.abs(v))), rtol,
                          {"resistance": R})


@dataclass(frozen=True)
class WiredIdentityRow:
    radius: int
    error: float
    scale: float
    prefactor: float  # c(x) / c(∞_k)
    resistance: float

    @property
    def relative_error(self) -> float:
        return self.error / self.scale if self.scale else self.error


@dataclass(frozen=True)
class WiredIdentityReport:
    x: str
    rows: tuple[WiredIdentityRow, ...]
    rtol: float = 1e-9

    @property
    def ok(self) -> bool:
        return all(r.relative_error <= self.rtol for r in self.rows)

    @property
    def prefactors(self) -> list[float]:
        return [r.prefactor for r in self.rows]

    @property
    def prefactor_decays(self) -> bool:
        p = [q for q in self.prefactors if q > 0]
        return all(b < a for a, b in zip(p, p[1:]))


def wired_fx_probabilistic(spec: NetworkLike, x: str, exhaustion: Exhaustion,
                           rtol: float = 1e-9) -> WiredIdentityReport:
    """On every wired truncation compare the wired kernel element ``f_x`` with
    ``R(o, x) P_y[hit x before o]`` and record the prefactor ``c(x) / c(∞_k)``
    of the correction term."""
    rows = []
    for radius, vs in exhaustion:
        if x not in vs:
            continue
        G = wired_subnetwork(spec, vs)
        f = energy_kernel_element(G, x).values
        R = effective_resistance(G, G.base, x)
        u = exact_hitting(G, None, [x], [G.base])
        c_inf = G.c(INFINITY) if INFINITY in G.index else 0.0
        prefactor = G.c(x) / c_inf if c_inf else 0.0
        rows.append(WiredIdentityRow(radius, float(np.max(np.abs(f - R * u))),
                                     float(np.max(np.abs(f))), prefactor, R))
    return WiredIdentityReport(x, tuple(rows), rtol)


@dataclass(frozen=True)
class TransitionComparison:
    x: str
    y: str
    trace_over_original: float  # c^tr_xy / c(x)
    trace_normalized: float  # c^tr_xy / c^tr(x)
    expected: float  # p(x,y) + P[x -> y through the complement]

    @property
    def error(self) -> float:
        return abs(self.trace_over_original - self.expected)


@dataclass(frozen=True)
class TransitionReport:
    comparisons: tuple[TransitionComparison, ...]
    tol: float = 1e-9

    @property
    def max_error(self) -> float:
        return max((c.error for c in self.comparisons), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_error <= self.tol


def trace_transition_check(net: Network, keep: Sequence[str], tol: float = 1e-9) -> TransitionReport:
    """Transition probabilities of the trace network versus one-step probability
    plus the probability of travelling through the complement.

    The identity holds with the trace conductances divided by the original
    ``c(x)``; the remaining mass ``1 - c^tr(x)/c(x)`` is the chance of returning
    to ``x`` itself. The normalized kernel of the trace network is reported too.
    """
    from .trace import schur_trace, through_complement

    tr = schur_trace(net, keep)
    keep = tr.keep
    ctr = -tr.laplacian.copy()
    np.fill_diagonal(ctr, 0.0)
    totals = ctr.sum(axis=1)
    out = []
    for a, x in enumerate(keep):
        cx = net.c(x)
        for b, y in enumerate(keep):
            if a == b:
                continue
            expected = float(net.conductance(x, y)) / cx + through_complement(net, keep, x, y)
            normalized = float(ctr[a, b] / totals[a]) if totals[a] else 0.0
            out.append(TransitionComparison(x, y, float(ctr[a, b] / cx), normalized, expected))
    return TransitionReport(tuple(out), tol)


# ---------------------------------------------------------------------------
# further simulation checks


@dataclass(frozen=True)
class VisitEstimate:
    mean: float
    std_error: float
    episodes: int
    truncated: int
    exact: float

    @property
    def z_score(self) -> float:
        return abs(self.mean - self.exact) / self.std_error if self.std_error else math.inf


def _visit_block(sampler, a, b, max_steps, rng, m):
    pos = np.full(m, a, dtype=np.intp)
    visits = np.ones(m, dtype=np.int64)
    active = np.arange(m)
    steps = 0
    while active.size and steps < max_steps:
        pos[active] = sampler.step(pos[active], rng)
        steps += 1
        visits[active] += pos[active] == a
        active = active[pos[active] != b]
    done = np.ones(m, dtype=bool)
    done[active] = False
    return visits[done], int(active.size)


def simulate_visits(net: Network, a: str, b: str, cfg: WalkConfig | None = None) -> VisitEstimate:
    """Mean number of visits to ``a`` (counting the start) before the walk hits ``b``;
    the exact value is ``c(a) R(a, b)``."""
    cfg = cfg or WalkConfig()
    sampler = _Sampler(net)
    ia, ib = net.index[a], net.index[b]
    parts = _run_blocks(lambda rng, m: _visit_block(sampler, ia, ib, cfg.max_steps, rng, m), cfg)
    visits = np.concatenate([p[0] for p in parts])
    truncated = sum(p[1] for p in parts)
    n = visits.size
    sd = float(visits.std(ddof=1)) if n > 1 else math.nan
    return VisitEstimate(float(visits.mean()), sd / math.sqrt(n), n, truncated,
                         net.c(a) * effective_resistance(net, a, b))


@dataclass(frozen=True)
class DetailedBalanceReport:
    counts: np.ndarray
    max_z: float

    @property
    def ok(self) -> bool:
        return self.max_z <= 4.0


def simulate_transitions(net: Network, steps: int, cfg: WalkConfig | None = None,
                         start: str | None = None) -> np.ndarray:
    """Transition counts ``N[x, y]`` from one walk per block, pooled over blocks."""
    cfg = cfg or WalkConfig()
    sampler = _Sampler(net)
    s = net.index[start or net.base]

    def block(rng, m):
        pos = np.full(m, s, dtype=np.intp)
        counts = np.zeros((net.n, net.n), dtype=np.int64)
        for _ in range(steps):
            nxt = sampler.step(pos, rng)
            np.add.at(counts, (pos, nxt), 1)
            pos = nxt
        return counts

    return sum(_run_blocks(block, cfg))


def detailed_balance_check(net: Network, steps: int = 2000, cfg: WalkConfig | None = None) -> DetailedBalanceReport:
    """Compare ``c(x) p̂(x,y)`` with ``c(y) p̂(y,x)`` from simulated transition counts."""
    N = simulate_transitions(net, steps, cfg)
    visits = N.sum(axis=1)
    c = net.total_conductance
    zmax = 0.0
    for i, j, _ in net.edges:
        if visits[i] == 0 or visits[j] == 0:
            continue
        pi, pj = N[i, j] / visits[i], N[j, i] / visits[j]
        lhs, rhs = c[i] * pi, c[j] * pj
        var = c[i] ** 2 * pi * (1 - pi) / visits[i] + c[j] ** 2 * pj * (1 - pj) / visits[j]
        if var > 0:
            zmax = max(zmax, abs(lhs - rhs) / math.sqrt(var))
    return DetailedBalanceReport(N, zmax)


def experimental_free_kernel(spec: NetworkLike, x: str, y: str, exhaustion: Exhaustion) -> list[tuple[int, float]]:
    """Experimental: ``R(o, x) P_y[hit x before o]`` on each free truncation.

    The walk is confined to the truncation. This is offered for exploration
    only; no statement is made about its limit.
    """
    out = []
    for radius, vs in exhaustion:
        if x not in vs or y not in vs:
            continue
        G = full_subnetwork(spec, vs)
        R = effective_resistance(G, G.base, x)
        out.append((radius, R * exact_hitting(G, y, [x], [G.base])))
    return out
