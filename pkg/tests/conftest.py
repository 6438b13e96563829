import numpy as np
import pytest

from memnet.gnar import GnarOrder, GnarParams, filters_from_graph
from memnet.network import graph_from_edges
from memnet.simulate import dgp_preset

FIVENET_EDGES = [(1, 2), (1, 3), (2, 4), (2, 5), (3, 4)]


@pytest.fixture(scope="session")
def fivenet():
    return graph_from_edges(5, FIVENET_EDGES)


@pytest.fixture(scope="session")
def dgp1():
    return dgp_preset("DGP1")


@pytest.fixture(scope="session")
def dgp1_filters(dgp1):
    return filters_from_graph(dgp1.params, dgp1.graph, dgp1.order)


@pytest.fixture(scope="session")
def small_model():
    """Three-node chain with heterogeneous memory and noise; the workhorse
    for dense-oracle comparisons."""
    graph = graph_from_edges(3, [(1, 2), (2, 3)])
    order = GnarOrder(p=1, s=(1,))
    params = GnarParams(alpha=np.array([0.4]), beta=(np.array([[0.25]]),))
    d = np.array([0.1, 0.25, 0.4])
    sigma2 = np.array([1.0, 0.5, 2.0])
    filters = filters_from_graph(params, graph, order)
    return dict(graph=graph, order=order, params=params, d=d, sigma2=sigma2,
                filters=filters)


def random_stationary_model(rng, n=3, max_stage=1):
    """Random stationary single-lag network model for property tests."""
    from memnet.network import fully_connected

    edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)
             if rng.random() < 0.7]
    if not edges:
        edges = [(1, 2)]
    graph = graph_from_edges(n, edges)
    alpha = rng.uniform(-0.5, 0.5)
    beta = rng.uniform(-0.9 + abs(alpha), 0.9 - abs(alpha)) * 0.5
    order = GnarOrder(p=1, s=(1,))
    params = GnarParams(alpha=np.array([alpha]), beta=(np.array([[beta]]),))
    d = rng.uniform(0.02, 0.48, size=n)
    sigma2 = rng.uniform(0.3, 2.5, size=n)
    return graph, order, params, d, sigma2
