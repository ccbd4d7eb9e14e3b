import numpy as np
import pytest

from cba.bases import Graph, shortest_path_metric


def make_random_connected_graph(n, rng, extra=0.5):
    """Random spanning tree plus a few extra unit-weight edges."""
    edges = []
    for v in range(1, n):
        edges.append((int(rng.integers(v)), v, 1.0))
    for _ in range(int(extra * n)):
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u != v:
            edges.append((min(u, v), max(u, v), 1.0))
    return Graph(n, edges)


@pytest.fixture
def random_metric():
    def build(n, seed=0):
        rng = np.random.default_rng(seed)
        return shortest_path_metric(make_random_connected_graph(n, rng))
    return build
