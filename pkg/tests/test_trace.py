import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from resistnet.network import Network, NetworkError, ball_exhaustion, generate, random_network
from resistnet.resistance import effective_resistance
from resistnet.trace import (
    TraceError,
    loewner_leq,
    parallel_merge,
    reduce_to_pair,
    regularized_schur,
    schur_complement_dense,
    schur_trace,
    series_reduce,
    shorted_operator,
    trace_conductance_check,
    trace_resistance,
    wye_delta,
)

from .conftest import networks


def star(n, c=None):
    c = c or [1.0] * n
    return Network.from_edges([("t", f"x{i}", c[i]) for i in range(n)], base="x0")


def test_path_trace():
    tr = schur_trace(generate("path:3"), ["0", "2"])
    assert np.allclose(tr.laplacian, 0.5 * np.array([[1, -1], [-1, 1]]))
    assert tr.network.conductance("0", "2") == pytest.approx(0.5)
    assert tr.log[0].transform == "series"


def test_star_trace_is_triangle():
    tr = schur_trace(star(3), ["x0", "x1", "x2"])
    for a, b in itertools.combinations(tr.keep, 2):
        assert tr.conductance(a, b) == pytest.approx(1 / 3)
    assert tr.log[0].transform == "wye-delta"


@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=8))
def test_star_elimination_formula(cs):
    net = star(len(cs), cs)
    keep = [f"x{i}" for i in range(len(cs))]
    tr = schur_trace(net, keep)
    total = sum(cs)
    for i, j in itertools.combinations(range(len(cs)), 2):
        assert tr.conductance(keep[i], keep[j]) == pytest.approx(cs[i] * cs[j] / total, rel=1e-12)


def test_keep_all_is_identity():
    net = generate("complete:4")
    tr = schur_trace(net, net.vertices)
    from resistnet.forms import assemble_laplacian

    assert np.allclose(tr.laplacian, assemble_laplacian(net).toarray())
    assert tr.log == ()


@given(networks(min_n=3, max_n=30), st.data())
def test_trace_matches_block_formula_and_is_laplacian(net, data):
    k = data.draw(st.integers(1, net.n - 1))
    keep = list(data.draw(st.permutations(net.vertices)))[:k]
    tr = schur_trace(net, keep, check_condition=False)
    ref = schur_complement_dense(net, keep)
    scale = net.total_conductance.max()
    assert np.allclose(tr.laplacian, ref, rtol=1e-9, atol=1e-10 * scale)
    L = tr.laplacian
    assert np.allclose(L, L.T)
    assert np.abs(L.sum(axis=1)).max() <= 1e-10 * scale
    off = L - np.diag(np.diag(L))
    assert off.max() <= 0
    # conductances only grow
    for a, b in itertools.combinations(keep, 2):
        assert tr.conductance(a, b) >= float(net.conductance(a, b)) * (1 - 1e-12)


@given(networks(min_n=4, max_n=30), st.data())
def test_trace_invariance(net, data):
    perm = data.draw(st.permutations(net.vertices))
    k1 = data.draw(st.integers(2, net.n))
    k2 = data.draw(st.integers(2, k1))
    H1, H2 = list(perm[:k1]), list(perm[:k2])
    a, b = H2[0], H2[1]
    r1 = effective_resistance(schur_trace(net, H1, check_condition=False).network, a, b)
    r2 = effective_resistance(schur_trace(net, H2, check_condition=False).network, a, b)
    r = effective_resistance(net, a, b)
    assert r1 == pytest.approx(r, rel=1e-9)
    assert r2 == pytest.approx(r1, rel=1e-9)


def test_nested_traces_on_k5():
    k5 = generate("complete:5")
    r1 = effective_resistance(schur_trace(k5, ["0", "1", "2", "3"]).network, "0", "1")
    r2 = effective_resistance(schur_trace(k5, ["0", "1"]).network, "0", "1")
    assert r1 == pytest.approx(r2, rel=1e-12) == pytest.approx(2 / 5)


def test_transform_examples():
    s = series_reduce(Network.from_edges([("a", "z", 2), ("z", "b", 2)]), "z")
    assert s.edge_list() == [("a", "b", 1.0)]
    d = wye_delta(star(3), "t")
    assert all(c == pytest.approx(1 / 3) for _, _, c in d.edge_list())
    with pytest.raises(NetworkError):
        series_reduce(star(3), "t")
    with pytest.raises(NetworkError):
        wye_delta(generate("path:3"), "1")
    net = generate("cycle:5")
    assert parallel_merge(net) is net


@given(networks(min_n=4, max_n=20, extra=0.1), st.data())
def test_transforms_preserve_resistance(net, data):
    candidates = [v for v in net.vertices if v != net.base and net.degree(v) in (2, 3)]
    if not candidates:
        return
    t = data.draw(st.sampled_from(candidates))
    reduced = (series_reduce if net.degree(t) == 2 else wye_delta)(net, t)
    for a, b in itertools.combinations(reduced.vertices, 2):
        assert effective_resistance(reduced, a, b) == pytest.approx(effective_resistance(net, a, b), rel=1e-9)


def test_reduce_to_pair_examples():
    assert reduce_to_pair(generate("complete:3"), "0", "1") == pytest.approx(1.5)
    assert reduce_to_pair(generate("path:3"), "0", "2") == pytest.approx(0.5)
    assert reduce_to_pair(Network.from_edges([("a", "b", 7.0)]), "a", "b") == 7.0


@given(networks(min_n=2, max_n=30))
def test_reduce_to_pair_matches_resistance(net):
    x, y = net.vertices[0], net.vertices[-1]
    assert 1 / reduce_to_pair(net, x, y) == pytest.approx(effective_resistance(net, x, y), rel=1e-9)


def test_condition_guard():
    # a cluster held together by huge conductances but tied to the kept set weakly
    edges = [("k", "a", 1e-8), ("a", "b", 1e8), ("b", "c", 1e8), ("c", "k2", 1e-8), ("k", "k2", 1.0)]
    net = Network.from_edges(edges, base="k")
    with pytest.raises(TraceError):
        schur_trace(net, ["k", "k2"])
    tr = schur_trace(net, ["k", "k2"], check_condition=False)
    assert 1 / tr.conductance("k", "k2") == pytest.approx(effective_resistance(net, "k", "k2"), rel=1e-12)


def test_trace_conductance_examples():
    rep = trace_conductance_check(generate("path:3"), ["0", "2"])
    (cmp,) = rep.comparisons
    assert cmp.schur == pytest.approx(0.5) and cmp.probabilistic == pytest.approx(0.5)
    net = generate("complete:4")
    rep = trace_conductance_check(net, net.vertices)
    assert all(c.schur == c.probabilistic == 1.0 for c in rep.comparisons)
    assert trace_conductance_check(net, ["0", "1", "2"]).ok


@given(networks(min_n=3, max_n=25), st.data())
def test_trace_conductance_property(net, data):
    k = data.draw(st.integers(2, net.n))
    keep = list(data.draw(st.permutations(net.vertices)))[:k]
    assert trace_conductance_check(net, keep).ok


def test_trace_resistance_sequence():
    g = generate("geometric-z:2")
    est = trace_resistance(g, "0", "1", ball_exhaustion(g, range(1, 21)))
    assert np.allclose(est.values, 0.5, rtol=1e-12)
    p = generate("path:4")
    est = trace_resistance(p, "0", "3", ball_exhaustion(p, [3, 4]))
    assert est.values == pytest.approx((3.0, 3.0))


def test_shorted_operator_matches_schur():
    net = random_network(np.random.default_rng(3), 8)
    from resistnet.forms import assemble_laplacian

    T = assemble_laplacian(net).toarray()
    keep = [0, 2, 5]
    sh = shorted_operator(T, keep)
    ref = schur_complement_dense(net, [net.vertices[i] for i in keep])
    assert np.allclose(sh.matrix, ref, rtol=0, atol=1e-8 * np.abs(ref).max())
    # regularised iterates dominate the Schur complement and are dominated by A
    big = regularized_schur(T, keep, 10.0)
    assert loewner_leq(ref, big, atol=1e-12)
    assert loewner_leq(big, T[np.ix_(keep, keep)], atol=1e-12)


def test_shorted_operator_singular_blocks():
    T = np.zeros((3, 3))
    T[0, 0] = 2.0
    sh = shorted_operator(T, [0])  # D = 0 and B = 0
    assert np.allclose(sh.matrix, [[2.0]])
    v = np.ones(3)
    T = np.outer(v, v)
    sh = shorted_operator(T, [0])  # D singular, B in its range
    assert abs(sh.matrix[0, 0]) < 1e-10
    assert loewner_leq(sh.matrix, T[:1, :1])


def test_shorted_operator_input_checks():
    with pytest.raises(ValueError):
        shorted_operator(np.array([[1.0, 2.0], [0.0, 1.0]]), [0])
    with pytest.raises(ValueError):
        shorted_operator(np.eye(2), [0], epsilons=[0.1, 0.2])
    with pytest.raises(TraceError):
        shorted_operator(np.eye(2) + 1.0, [0], epsilons=[1.0, 0.5])
