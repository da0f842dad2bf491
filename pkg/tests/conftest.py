import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from resistnet.network import Network, random_network

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@st.composite
def networks(draw, min_n=2, max_n=20, unit=False, extra=0.2):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_n, max_n))
    return random_network(np.random.default_rng(seed), n, extra_edge_prob=extra, unit=unit)


@st.composite
def network_and_pair(draw, **kw):
    net = draw(networks(**kw))
    i = draw(st.integers(0, net.n - 1))
    j = draw(st.integers(0, net.n - 2))
    if j >= i:
        j += 1
    return net, net.vertices[i], net.vertices[j]


def laplacian_pinv_resistance(net: Network, x: str, y: str) -> float:
    """Reference value from the Moore-Penrose pseudo-inverse of the dense Laplacian."""
    C = net.conductance_matrix.toarray()
    L = np.diag(C.sum(axis=1)) - C
    e = np.zeros(net.n)
    e[net.index[x]] += 1
    e[net.index[y]] -= 1
    return float(e @ np.linalg.pinv(L) @ e)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
