from fractions import Fraction
import math

import numpy as np
import pytest

from resistnet.forms import energy, laplacian_apply
from resistnet.limits import (
    LimitEstimate,
    boundary_resistance,
    default_exhaustion,
    free_resistance,
    harmonic_resistance,
    limit,
    limit_resistance_matrix,
    royden_split,
    wired_resistance,
)
from resistnet.network import ball_exhaustion, full_subnetwork, generate, random_network
from resistnet.resistance import effective_resistance


def geometric_edge(c, n):
    """Conductance between n-1 and n on the geometric integers."""
    return Fraction(c) ** max(abs(n), abs(n - 1))


def wired_cycle_resistance(c, radius):
    """Exact R(0, 1) on the wired truncation {-radius..radius} + infinity.

    The wired truncation of the integer line is a single cycle, so the
    resistance between neighbours 0 and 1 is the direct edge in parallel
    with the rest of the cycle.
    """
    direct = 1 / geometric_edge(c, 1)
    rest = sum(1 / geometric_edge(c, n) for n in range(-radius + 1, radius + 1) if n != 1)
    rest += 1 / (Fraction(c) ** (radius + 1)) * 2  # the two frontier edges into infinity
    return direct * rest / (direct + rest)


@pytest.fixture(scope="module")
def gz():
    return generate("geometric-z:2")


@pytest.fixture(scope="module")
def gz_exhaustion(gz):
    return ball_exhaustion(gz, range(1, 31))


def test_free_limit_geometric(gz, gz_exhaustion):
    est = free_resistance(gz, "0", "1", gz_exhaustion)
    assert est.converged and est.monotone
    assert est.estimate == pytest.approx(0.5, abs=1e-6)


def test_wired_limit_geometric(gz, gz_exhaustion):
    est = wired_resistance(gz, "0", "1", gz_exhaustion)
    assert est.converged and est.monotone and est.extras["rayleigh"]
    assert est.estimate == pytest.approx(3 / 8, abs=1e-9)
    for r, v in zip(est.radii, est.values):
        assert v == pytest.approx(float(wired_cycle_resistance(2, r)), rel=1e-9)


def test_harmonic_and_boundary(gz, gz_exhaustion):
    harm = harmonic_resistance(gz, "0", "1", gz_exhaustion)
    assert harm.estimate == pytest.approx(1 / 8, abs=1e-9)
    assert harm.extras["nonnegative"]
    bd = boundary_resistance(gz, "0", "1", gz_exhaustion, harmonic=harm)
    assert bd.estimate == pytest.approx(1.5, rel=1e-9)
    assert bd.extras["agreement"] <= 1e-6


def test_recurrent_models_have_infinite_boundary_resistance():
    spec = generate("damped-z:2")
    est = boundary_resistance(spec, "0", "1", ball_exhaustion(spec, range(1, 41)))
    assert est.infinite
    p = generate("path:5")
    est = boundary_resistance(p, "0", "4", ball_exhaustion(p, [4, 5]))
    assert est.infinite and est.converged


def test_unit_z_free_and_wired_agree():
    spec = generate("z")
    ex = ball_exhaustion(spec, [5, 10, 20])
    assert free_resistance(spec, "0", "1", ex).values == pytest.approx((1.0,) * 3)
    w = wired_resistance(spec, "0", "1", ex).values
    # wired truncation is a cycle of 2k+2 unit edges
    assert w == pytest.approx(tuple((2 * k + 1) / (2 * k + 2) for k in (5, 10, 20)))


def test_schedules_agree(gz):
    a = ball_exhaustion(gz, range(2, 31, 2))
    b = ball_exhaustion(gz, range(3, 31, 3))
    for fn in (free_resistance, wired_resistance):
        assert fn(gz, "0", "1", a).estimate == pytest.approx(fn(gz, "0", "1", b).estimate, rel=1e-6)


def test_non_convergence_reported():
    est = LimitEstimate.from_values("free", [1, 2, 3, 4], [1.0, 2.0, 3.0, 4.0])
    assert not est.converged and est.verdict == "not-converged" and est.estimate == 4.0
    est = LimitEstimate.from_values("free", [1, 2, 3, 4], [1.0, 1.0, 1.0, 1.0])
    assert est.converged


@pytest.mark.parametrize("c", [2, 3, 5])
def test_monopole_on_geometric_integers(c):
    spec = generate(f"geometric-z:{c}")
    radius = 20
    net = full_subnetwork(spec, ball_exhaustion(spec, [radius]).last)
    r = 1 / c
    a = r / (2 * (1 - r))
    w = np.array([a * r ** abs(int(v)) for v in net.vertices])
    lap = laplacian_apply(net, w)
    for v, value in zip(net.vertices, lap):
        if abs(int(v)) < radius:
            assert value == pytest.approx(1.0 if v == "0" else 0.0, abs=1e-10)


def test_holder_bound_on_truncations(gz):
    rng = np.random.default_rng(0)
    net = full_subnetwork(gz, ball_exhaustion(gz, [8]).last)
    for _ in range(20):
        v = rng.standard_normal(net.n)
        E = energy(net, v)
        x, y = rng.choice(net.vertices, 2, replace=False)
        R = effective_resistance(net, x, y)
        assert (v[net.index[x]] - v[net.index[y]]) ** 2 <= R * E * (1 + 1e-12)


def test_royden_split_orthogonal(gz, gz_exhaustion):
    split = royden_split(gz, "1", gz_exhaustion)
    assert split.orthogonality_defect <= 1e-8
    assert split.harmonic_residual <= 1e-8


def test_finite_network_limits_are_exact():
    net = random_network(np.random.default_rng(2), 12)
    ex = default_exhaustion(net)
    R = effective_resistance(net, "0", "5")
    for metric in ("free", "wired", "trace"):
        est = limit(net, "0", "5", metric, ex)
        assert est.converged and est.estimate == pytest.approx(R, rel=1e-10)
    with pytest.raises(ValueError):
        limit(net, "0", "5", "bogus", ex)


def test_limit_matrix(gz):
    ex = ball_exhaustion(gz, range(3, 31))
    vs = ["-2", "-1", "0", "1", "2"]
    F = limit_resistance_matrix(gz, vs, "free", ex)
    W = limit_resistance_matrix(gz, vs, "wired", ex)
    assert F.converged and W.converged
    assert np.all(W.matrix <= F.matrix + 1e-12)
    assert F.matrix[2, 3] == pytest.approx(0.5, abs=1e-6)
    assert W.matrix[2, 3] == pytest.approx(3 / 8, abs=1e-6)
    assert math.isclose(F.matrix[1, 3], F.matrix[3, 1])
