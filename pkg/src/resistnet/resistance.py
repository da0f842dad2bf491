"""Effective resistance on finite networks, computed several independent ways."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .forms import (
    PotentialFunction,
    dissipation,
    drop,
    energy,
    energy_kernel_element,
    solve_dipole,
    solve_dirichlet,
)
from .network import Network

FORMULATIONS = (
    "potential_drop",
    "dipole_energy",
    "min_dissipation",
    "reciprocal_min_energy",
    "best_constant",
    "sup_form",
)


@dataclass(frozen=True)
class ResistanceReport:
    """Effective resistance between ``x`` and ``y`` from every formulation.

    ``values`` maps each name in :data:`FORMULATIONS` to its result;
    ``spread`` is the largest pairwise difference.
    """

    x: str
    y: str
    values: dict
    sup_check_passed: bool = True

    @property
    def consensus(self) -> float:
        return float(np.median(list(self.values.values())))

    @property
    def spread(self) -> float:
        vals = list(self.values.values())
        return float(max(vals) - min(vals))

    @property
    def relative_spread(self) -> float:
        c = self.consensus
        return self.spread / c if c else self.spread

    def agrees(self, rtol: float = 1e-8) -> bool:
        return self.relative_spread <= rtol


def effective_resistance(net: Network, x: str, y: str) -> float:
    """``v(x) - v(y)`` for the unit dipole between ``x`` and ``y``."""
    if x == y:
        return 0.0
    v = solve_dipole(net, x, y)
    return v[x] - v[y]


def harmonic_interpolation(net: Network, x: str, y: str) -> PotentialFunction:
    """Potential with value 1 at ``x``, 0 at ``y`` and harmonic elsewhere."""
    return PotentialFunction(net, solve_dirichlet(net, {x: 1.0, y: 0.0}), pinned=False)


def resistance_report(net: Network, x: str, y: str, n_random: int = 100,
                      rng: np.random.Generator | None = None) -> ResistanceReport:
    if x == y:
        raise ValueError("resistance report needs two distinct vertices")
    v = solve_dipole(net, x, y)
    values = {
        "potential_drop": v[x] - v[y],
        "dipole_energy": energy(net, v),
        "min_dissipation": dissipation(net, drop(net, v)),
    }
    w = harmonic_interpolation(net, x, y)
    values["reciprocal_min_energy"] = 1.0 / energy(net, w)
    # best constant in |u(x)-u(y)|^2 <= k E(u): attained along v_x - v_y
    k = energy_kernel_element(net, x) - energy_kernel_element(net, y)
    kappa = energy(net, k)
    values["best_constant"] = kappa
    # the supremum of |u(x)-u(y)| over the energy unit ball is attained at k / |k|
    unit = k / np.sqrt(kappa)
    values["sup_form"] = (unit[x] - unit[y]) ** 2

    rng = rng if rng is not None else np.random.default_rng(0)
    ok = True
    for _ in range(n_random):
        u = rng.standard_normal(net.n)
        lhs = (u[net.index[x]] - u[net.index[y]]) ** 2
        if lhs > kappa * energy(net, u) * (1 + 1e-10) + 1e-14:
            ok = False
            break
    return ResistanceReport(x, y, values, ok)


@dataclass(frozen=True)
class MetricAxiomReport:
    checked_triples: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_metric(dist: dict, vertices: Sequence[str], triples: Iterable[tuple] | None = None,
                 slack: float = 1e-9) -> MetricAxiomReport:
    """Check symmetry, positivity and the triangle inequality on a distance table
    keyed by ordered vertex pairs."""

    def d(a, b):
        return 0.0 if a == b else dist[(a, b)]

    failures = []
    for a, b in itertools.permutations(vertices, 2):
        if abs(d(a, b) - d(b, a)) > slack:
            failures.append(("symmetry", (a, b), d(a, b) - d(b, a)))
        if not d(a, b) > 0:
            failures.append(("positivity", (a, b), d(a, b)))
    if triples is None:
        triples = itertools.permutations(vertices, 3)
    n = 0
    for a, b, c in triples:
        n += 1
        excess = d(a, c) - d(a, b) - d(b, c)
        if excess > slack:
            failures.append(("triangle", (a, b, c), excess))
    return MetricAxiomReport(n, failures)


def resistance_matrix(net: Network, vertices: Sequence[str] | None = None) -> np.ndarray:
    """Pairwise effective resistance among ``vertices`` (all vertices by default)."""
    from .trace import schur_trace

    vertices = list(dict.fromkeys(net.vertices if vertices is None else vertices))
    k = len(vertices)
    if k < 2:
        return np.zeros((k, k))
    # Reduce onto the requested vertices first (resistance is preserved), then
    # invert the small grounded Laplacian: R(x,y) = K_xx + K_yy - 2 K_xy.
    L = schur_trace(net, vertices, check_condition=False).laplacian
    K = np.zeros((k, k))
    K[1:, 1:] = np.linalg.inv(L[1:, 1:])
    Ksym = 0.5 * (K + K.T)
    diag = np.diag(Ksym)
    R = diag[:, None] + diag[None, :] - 2.0 * Ksym
    np.fill_diagonal(R, 0.0)
    return R


def check_metric_axioms(net: Network, pairs: Iterable[tuple[str, str]] | None = None,
                        slack: float = 1e-9) -> MetricAxiomReport:
    """Metric axioms of effective resistance over the vertices appearing in
    ``pairs`` (or all vertices)."""
    if pairs is None:
        vertices = list(net.vertices)
    else:
        vertices = list(dict.fromkeys(v for p in pairs for v in p))
    dist = {}
    for a, b in itertools.permutations(vertices, 2):
        dist[(a, b)] = effective_resistance(net, a, b)
    return check_metric(dist, vertices, slack=slack)
