"""Free, wired, harmonic and boundary resistance as limits over exhaustions."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .forms import PotentialFunction, energy, energy_kernel_element, laplacian_apply
from .network import (
    Exhaustion,
    Network,
    NetworkError,
    NetworkLike,
    ball,
    ball_exhaustion,
    full_subnetwork,
    wired_subnetwork,
)
from .resistance import effective_resistance, resistance_matrix

DEFAULT_TOL = 1e-7
DEFAULT_WINDOW = 3
DEFAULT_MAX_RADIUS = 40
DEFAULT_MAX_VERTICES = 1 << 15
# R^harm below this fraction of R^F is reported as an infinite boundary resistance
INFINITE_RTOL = 1e-9


@dataclass(frozen=True)
class LimitEstimate:
    """Per-truncation values and a convergence verdict.

    The verdict is ``converged`` when the last ``window`` successive relative
    differences are all at most ``tol`` (or the exhaustion already covers a
    finite network); the estimate is the last value either way.
    """

    name: str
    radii: tuple[int, ...]
    values: tuple[float, ...]
    converged: bool
    estimate: float
    monotone: bool | None = None
    tol: float = DEFAULT_TOL
    extras: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "converged" if self.converged else "not-converged"

    @property
    def infinite(self) -> bool:
        return math.isinf(self.estimate)

    @property
    def relative_differences(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        if len(v) < 2:
            return np.zeros(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(np.diff(v)) / np.maximum(np.abs(v[1:]), np.finfo(float).tiny)

    @classmethod
    def from_values(cls, name, radii, values, tol=DEFAULT_TOL, window=DEFAULT_WINDOW,
                    exhausted=False, direction: int = 0, **extras) -> "LimitEstimate":
        values = tuple(float(v) for v in values)
        radii = tuple(int(r) for r in radii)
        v = np.asarray(values)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(np.diff(v)) / np.maximum(np.abs(v[1:]), np.finfo(float).tiny)
        converged = bool(exhausted) or (len(rel) >= window and bool(np.all(rel[-window:] <= tol)))
        monotone = None
        if direction and len(v) > 1:
            slack = 1e-12 * np.maximum(np.abs(v[1:]), np.abs(v[:-1]))
            monotone = bool(np.all(direction * np.diff(v) >= -slack))
        return cls(name, radii, values, converged, values[-1], monotone, tol, dict(extras))


def default_exhaustion(spec: NetworkLike, max_radius: int = DEFAULT_MAX_RADIUS,
                       max_vertices: int = DEFAULT_MAX_VERTICES) -> Exhaustion:
    """Balls of radius 1, 2, ... up to ``max_radius``, stopping early if a
    ball would exceed ``max_vertices``."""
    radii = [1]
    for r in range(2, max_radius + 1):
        if len(ball(spec, r)) > max_vertices:
            break
        radii.append(r)
    return ball_exhaustion(spec, radii)


def _usable(exhaustion: Exhaustion, points: Sequence[str]):
    rows = [(r, vs, ex) for (r, vs), ex in zip(exhaustion, exhaustion.exhausted)
            if all(p in vs for p in points)]
    if not rows:
        raise NetworkError(f"vertices {list(points)} never appear together in the exhaustion", "subset")
    return rows


def _map(fn: Callable, items, workers: int | None):
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def truncation_values(spec, x, y, exhaustion, kind: str, workers: int | None = None):
    builder = {"free": full_subnetwork, "wired": wired_subnetwork}[kind]
    rows = _usable(exhaustion, [x, y])

    def one(row):
        return effective_resistance(builder(spec, row[1]), x, y)

    return [r for r, _, _ in rows], _map(one, rows, workers), any(e for _, _, e in rows)


def free_resistance(spec: NetworkLike, x: str, y: str, exhaustion: Exhaustion | None = None,
                    tol: float = DEFAULT_TOL, workers: int | None = None) -> LimitEstimate:
    """Limit of effective resistance over the induced (free) truncations."""
    exhaustion = exhaustion or default_exhaustion(spec)
    radii, vals, ex = truncation_values(spec, x, y, exhaustion, "free", workers)
    return LimitEstimate.from_values("free", radii, vals, tol, exhausted=ex, direction=-1)


def wired_resistance(spec: NetworkLike, x: str, y: str, exhaustion: Exhaustion | None = None,
                     tol: float = DEFAULT_TOL, workers: int | None = None,
                     compare_free: bool = True) -> LimitEstimate:
    """Limit of effective resistance over the wired truncations.

    With ``compare_free`` the free values are computed too and
    ``extras['rayleigh']`` records whether wired <= free held at every radius.
    """
    exhaustion = exhaustion or default_exhaustion(spec)
    radii, vals, ex = truncation_values(spec, x, y, exhaustion, "wired", workers)
    extras = {}
    if compare_free:
        _, free_vals, _ = truncation_values(spec, x, y, exhaustion, "free", workers)
        extras["free_values"] = tuple(free_vals)
        extras["rayleigh"] = all(w <= f * (1 + 1e-12) for w, f in zip(vals, free_vals))
    return LimitEstimate.from_values("wired", radii, vals, tol, exhausted=ex, direction=+1, **extras)


@dataclass(frozen=True)
class RoydenSplit:
    """Energy-kernel element split into its wired part and a harmonic remainder
    on the largest truncation of an exhaustion.

    ``v`` lives on the free truncation, ``f`` on the wired one (including the
    vertex at infinity) and ``h = v - f`` on the shared vertices.
    """

    x: str
    radius: int
    free_net: Network
    wired_net: Network
    v: PotentialFunction
    f: PotentialFunction
    h: PotentialFunction
    energy_v: float
    energy_f: float
    energy_h: float
    harmonic_residual: float

    @property
    def orthogonality_defect(self) -> float:
        return abs(self.energy_f + self.energy_h - self.energy_v) / max(self.energy_v, np.finfo(float).tiny)

    def f_on_free(self) -> PotentialFunction:
        return self.f.restrict(self.free_net)


def _interior(spec: NetworkLike, vs: Sequence[str], depth: int) -> list[str]:
    """Vertices of ``vs`` at graph distance >= ``depth`` from the complement."""
    member = set(vs)
    outside_adjacent = {v for v in vs if any(w not in member for w, c in spec.neighbors(v) if c)}
    dist = {v: 1 for v in outside_adjacent}
    frontier = list(outside_adjacent)
    d = 1
    while frontier and d < depth:
        d += 1
        nxt = []
        for v in frontier:
            for w, c in spec.neighbors(v):
                if c and w in member and w not in dist:
                    dist[w] = d
                    nxt.append(w)
        frontier = nxt
    return [v for v in vs if v not in dist]


def royden_split(spec: NetworkLike, x: str, exhaustion: Exhaustion | None = None,
                 other: str | None = None) -> RoydenSplit:
    """Split ``v_x`` (or ``v_x - v_other``) on the largest truncation."""
    exhaustion = exhaustion or default_exhaustion(spec)
    vs = exhaustion.last
    radius = exhaustion.radii[-1]
    G_F = full_subnetwork(spec, vs)
    G_W = wired_subnetwork(spec, vs)

    def kernel(net, a):
        k = energy_kernel_element(net, a)
        if other is not None:
            k = k - energy_kernel_element(net, other)
        return k

    v = kernel(G_F, x)
    f = kernel(G_W, x)
    f_free = f.restrict(G_F)
    h = v - f_free
    interior = _interior(spec, vs, 2)
    lap = laplacian_apply(G_F, h)
    idx = [G_F.index[w] for w in interior]
    cx = G_F.c(x)
    residual = float(np.max(np.abs(lap[idx])) / cx) if idx else 0.0
    return RoydenSplit(
        x, radius, G_F, G_W, v, f, h,
        energy(G_F, v), energy(G_W, f), energy(G_F, h), residual,
    )


def harmonic_resistance(spec: NetworkLike, x: str, y: str, exhaustion: Exhaustion | None = None,
                        tol: float = DEFAULT_TOL, free: LimitEstimate | None = None,
                        wired: LimitEstimate | None = None, workers: int | None = None) -> LimitEstimate:
    """Free minus wired resistance, cross-checked against the energy of the
    harmonic part of ``v_x - v_y`` on the largest truncation."""
    exhaustion = exhaustion or default_exhaustion(spec)
    free = free or free_resistance(spec, x, y, exhaustion, tol, workers)
    wired = wired or wired_resistance(spec, x, y, exhaustion, tol, workers, compare_free=False)
    vals = [f - w for f, w in zip(free.values, wired.values)]
    split = royden_split(spec, x, exhaustion, other=y)
    est = free.estimate - wired.estimate
    scale = max(free.estimate, np.finfo(float).tiny)
    extras = {
        "free": free,
        "wired": wired,
        "split_energy": split.energy_h,
        "split_relative_error": abs(split.energy_h - est) / max(abs(est), INFINITE_RTOL * scale),
        "nonnegative": est >= -1e-9 * scale,
    }
    converged = free.converged and wired.converged
    return LimitEstimate(
        "harmonic", free.radii, tuple(vals), converged, est, None, tol, extras
    )


def boundary_resistance(spec: NetworkLike, x: str, y: str, exhaustion: Exhaustion | None = None,
                        tol: float = DEFAULT_TOL, harmonic: LimitEstimate | None = None,
                        workers: int | None = None) -> LimitEstimate:
    """Resistance across the boundary at infinity.

    Computed from the limits as ``1 / (1/R^W - 1/R^F)`` and, independently,
    from the energies of the split on the largest truncation as
    ``E(f) E(v) / E(h)``. When the harmonic resistance is negligible the
    estimate is ``inf``.
    """
    exhaustion = exhaustion or default_exhaustion(spec)
    harm = harmonic or harmonic_resistance(spec, x, y, exhaustion, tol, workers=workers)
    free, wired = harm.extras["free"], harm.extras["wired"]
    RF, RW, RH = free.estimate, wired.estimate, harm.estimate
    if RH < INFINITE_RTOL * RF:
        return LimitEstimate("boundary", harm.radii, tuple(math.inf for _ in harm.radii),
                             harm.converged, math.inf, None, tol,
                             {"harmonic": harm, "product_formula": math.inf, "agreement": 0.0})
    vals = []
    for f, w in zip(free.values, wired.values):
        d = 1.0 / w - 1.0 / f
        vals.append(1.0 / d if d > 0 else math.inf)
    reciprocal = 1.0 / (1.0 / RW - 1.0 / RF)
    split = royden_split(spec, x, exhaustion, other=y)
    product = split.energy_f * split.energy_v / split.energy_h
    agreement = abs(reciprocal - product) / reciprocal
    return LimitEstimate("boundary", harm.radii, tuple(vals), harm.converged, reciprocal, None, tol,
                         {"harmonic": harm, "product_formula": product, "agreement": agreement})


def trace_limit(spec, x, y, exhaustion=None, tol=DEFAULT_TOL) -> LimitEstimate:
    from .trace import trace_resistance

    return trace_resistance(spec, x, y, exhaustion or default_exhaustion(spec), tol)


METRICS = {
    "free": free_resistance,
    "wired": wired_resistance,
    "harmonic": harmonic_resistance,
    "boundary": boundary_resistance,
    "trace": trace_limit,
}


def limit(spec, x, y, metric: str = "free", exhaustion=None, tol=DEFAULT_TOL) -> LimitEstimate:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    return METRICS[metric](spec, x, y, exhaustion, tol)


@dataclass(frozen=True)
class LimitMatrix:
    vertices: tuple[str, ...]
    radii: tuple[int, ...]
    matrices: tuple[np.ndarray, ...]
    converged: bool

    @property
    def matrix(self) -> np.ndarray:
        return self.matrices[-1]


def limit_resistance_matrix(spec: NetworkLike, vertices: Sequence[str], kind: str = "free",
                            exhaustion: Exhaustion | None = None, tol: float = DEFAULT_TOL,
                            window: int = DEFAULT_WINDOW) -> LimitMatrix:
    """Pairwise free or wired resistance among ``vertices`` on every truncation
    that contains them all."""
    exhaustion = exhaustion or default_exhaustion(spec)
    builder = {"free": full_subnetwork, "wired": wired_subnetwork}[kind]
    rows = _usable(exhaustion, vertices)
    mats = tuple(resistance_matrix(builder(spec, vs), vertices) for _, vs, _ in rows)
    diffs = [np.max(np.abs(b - a)) / max(np.max(np.abs(b)), np.finfo(float).tiny)
             for a, b in zip(mats, mats[1:])]
    converged = any(e for _, _, e in rows) or (len(diffs) >= window and max(diffs[-window:]) <= tol)
    return LimitMatrix(tuple(vertices), tuple(r for r, _, _ in rows), mats, converged)
