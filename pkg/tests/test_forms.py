import numpy as np
import pytest
from hypothesis import given, strategies as st

from resistnet.forms import (
    CurrentFlow,
    PotentialFunction,
    assemble_laplacian,
    backward_error,
    delta,
    dissipation,
    divergence,
    drop,
    energy,
    energy_kernel_element,
    laplacian_apply,
    solve_dipole,
    solve_poisson,
    transition_kernel,
)
from resistnet.network import Network, generate, random_network

from .conftest import network_and_pair, networks


def test_single_edge_laplacian():
    net = Network.from_edges([("x", "y", 3.0)])
    assert np.array_equal(assemble_laplacian(net).toarray(), [[3, -3], [-3, 3]])


def test_path_laplacian():
    L = assemble_laplacian(generate("path:3")).toarray()
    assert np.array_equal(np.diag(L), [1, 2, 1])
    assert L[0, 1] == L[1, 2] == -1 and L[0, 2] == 0


def test_star_laplacian_with_center_last():
    net = Network.from_edges([("t", "a", 1), ("t", "b", 1), ("t", "c", 1)], base="a")
    blocks = assemble_laplacian(net, keep=["a", "b", "c"])
    assert np.array_equal(blocks.A.toarray(), np.eye(3))
    assert np.array_equal(blocks.D.toarray(), [[3]])
    assert np.array_equal(blocks.B.toarray(), [[-1, -1, -1]])


def test_ordering_must_be_permutation():
    with pytest.raises(ValueError):
        assemble_laplacian(generate("path:3"), ordering=["0", "1"])


def test_transition_kernel_examples():
    P = transition_kernel(Network.from_edges([("0", "1", 5)])).toarray()
    assert np.array_equal(P, [[0, 1], [1, 0]])
    P = transition_kernel(generate("path:3")).toarray()
    assert P[1, 0] == P[1, 2] == 0.5
    from resistnet.network import full_subnetwork

    g = full_subnetwork(generate("geometric-z:2"), ["0", "1", "-1", "2", "-2"])
    P = transition_kernel(g).toarray()
    i = g.index
    assert P[i["1"], i["2"]] == pytest.approx(4 / 6, abs=1e-15)
    assert P[i["1"], i["0"]] == pytest.approx(2 / 6, abs=1e-15)


@given(networks(max_n=30))
def test_laplacian_rows_and_detailed_balance(net):
    L = assemble_laplacian(net).toarray()
    assert np.max(np.abs(L.sum(axis=1))) <= 1e-12 * net.total_conductance.max()
    assert np.array_equal(L, L.T)
    P = transition_kernel(net).toarray()
    assert np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-14)
    flow = net.total_conductance[:, None] * P
    assert np.allclose(flow, flow.T, rtol=1e-14, atol=0)


def test_energy_examples():
    net = generate("complete:4")
    for x in net.vertices:
        assert energy(net, delta(net, x)) == pytest.approx(net.c(x))
    assert energy(net, np.full(net.n, 3.7)) == 0
    assert energy(generate("path:3"), [0, 1, 2]) == 2


def test_dissipation_and_drop_examples():
    edge = Network.from_edges([("0", "1", 2.0)])
    I = drop(edge, [0, 1])
    assert I("0", "1") == -2 and I("1", "0") == 2
    assert dissipation(edge, CurrentFlow(edge, [1.0])) == 0.5
    assert dissipation(edge, CurrentFlow(edge, [0.0])) == 0
    p3 = generate("path:3")
    I = drop(p3, [0, 1, 2])
    assert I("1", "0") == 1 and I("2", "1") == 1
    assert np.array_equal(divergence(p3, I), [-1, 0, 1])
    assert not np.any(drop(p3, [4, 4, 4]).values)


def test_path_flow_divergence():
    p3 = generate("path:3")
    chi = CurrentFlow.along_path(p3, ["0", "1", "2"])
    assert np.array_equal(divergence(p3, chi), [1, 0, -1])
    assert np.array_equal(divergence(p3, CurrentFlow(p3, np.zeros(2))), [0, 0, 0])


@given(networks(max_n=30), st.integers(0, 2**31))
def test_drop_is_isometry(net, seed):
    u = np.random.default_rng(seed).standard_normal(net.n)
    E = energy(net, u)
    assert abs(dissipation(net, drop(net, u)) - E) <= 1e-10 * E + 1e-300


@given(networks(max_n=30), st.integers(0, 2**31))
def test_delta_reproduces_laplacian(net, seed):
    u = np.random.default_rng(seed).standard_normal(net.n)
    Lu = laplacian_apply(net, u)
    for x in net.vertices[:5]:
        assert energy(net, delta(net, x), u) == pytest.approx(Lu[net.index[x]], rel=1e-10, abs=1e-10)


def test_dipole_examples():
    edge = Network.from_edges([("x", "y", 4.0)])
    v = solve_dipole(edge, "x", "y")
    assert v["x"] - v["y"] == pytest.approx(0.25)
    v = solve_dipole(generate("path:3"), "2", "0")
    assert np.allclose(v.values, [0, 1, 2])
    k3 = generate("complete:3")
    v = solve_dipole(k3, "0", "1")
    assert v["0"] - v["1"] == pytest.approx(2 / 3, rel=1e-14)
    with pytest.raises(ValueError):
        solve_dipole(k3, "0", "0")


@given(network_and_pair(max_n=40))
def test_dipole_residual_and_maximum_principle(case):
    net, x, y = case
    v = solve_dipole(net, x, y)
    b = delta(net, x) - delta(net, y)
    assert backward_error(net, v.values, b) <= 1e-10
    assert v[net.base] == 0
    # the extremes are attained at the poles (ties are possible on dead ends)
    assert v[x] == v.values.max()
    assert v[y] == v.values.min()
    assert np.allclose(divergence(net, drop(net, v)), b, atol=1e-9 * net.total_conductance.max())


def test_sparse_path_agrees_with_elimination():
    net = random_network(np.random.default_rng(4), 40)
    b = delta(net, "3") - delta(net, "17")
    v = solve_dipole(net, "3", "17").values
    assert np.allclose(solve_poisson(net, b), v, rtol=1e-10, atol=1e-12)


def test_kernel_element_examples():
    p3 = generate("path:3")
    assert not np.any(energy_kernel_element(p3, "0").values)
    v2 = energy_kernel_element(p3, "2")
    assert np.allclose(v2.values, [0, 1, 2])
    rng = np.random.default_rng(0)
    for _ in range(10):
        u = rng.standard_normal(3)
        u -= u[0]
        assert energy(p3, v2, u) == pytest.approx(u[2])
    k4 = generate("complete:4")
    for x in k4.vertices:
        vx = energy_kernel_element(k4, x)
        assert energy(k4, vx) == pytest.approx(vx[x], abs=1e-15)


@given(networks(max_n=25), st.integers(0, 2**31))
def test_reproducing_property(net, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(net.n)
    u -= u[net.base_index]
    norm = np.sqrt(energy(net, u))
    for x in net.vertices:
        vx = energy_kernel_element(net, x)
        assert abs(energy(net, vx, u) - (u[net.index[x]] - u[net.base_index])) <= 1e-10 * norm * max(1, np.sqrt(energy(net, vx)))


def test_potential_arithmetic():
    p3 = generate("path:3")
    u = PotentialFunction(p3, [1.0, 2.0, 3.0], pinned=False)
    assert np.array_equal(u.pin().values, [0, 1, 2])
    assert (2 * u - u)["2"] == 3.0
    with pytest.raises(ValueError):
        PotentialFunction(p3, [1.0])
