import numpy as np
import pytest

from qtps import graph as graphmod


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_two_path_graph():
    """Square graph: two parallel two-hop routes with actions 1.333 and 1.8."""
    return graphmod.from_weights(
        coords=[[0, 0], [1, 1], [1, -1], [2, 0]],
        edges=[(0, 1), (1, 3), (0, 2), (2, 3)],
        weights_raw=[0.5, 0.5, 0.6, 0.75],
        s=0,
        t=3,
    )


def make_three_path_graph():
    """Direct cheap edge flanked by two expensive three-hop branches.

    Renormalized actions: 0.4444 (direct), 2.6667, 3.0. The direct path
    dominates the Boltzmann law; the annealer proposes near its law when
    alpha is of order the action scale.
    """
    w = [0.4 * 3 / 2.7] + [2.4 * (3 / 2.7) / 3] * 3 + [1.0] * 3
    return graphmod.from_weights(
        coords=[[0, 0], [1, 1], [2, 1], [1, -1], [2, -1], [3, 0]],
        edges=[(0, 5), (0, 1), (1, 2), (2, 5), (0, 3), (3, 4), (4, 5)],
        weights_raw=w,
        s=0,
        t=5,
    )


def make_line_graph():
    return graphmod.from_weights(
        coords=[[0, 0], [1, 0], [2, 0]],
        edges=[(0, 1), (1, 2)],
        weights_raw=[0.8, 1.0],
        s=0,
        t=2,
    )


def make_triangle_graph():
    """s-t direct weight 5, detour via m with 1 + 1."""
    return graphmod.from_weights(
        coords=[[0, 0], [2, 0], [1, 1]],
        edges=[(0, 1), (0, 2), (1, 2)],
        weights_raw=[5.0, 1.0, 1.0],
        s=0,
        t=1,
    )


def random_connected_graph(rng, n_nodes, extra_edges=2, w_lo=0.2, w_hi=1.0):
    """Random spanning tree plus a few extra edges; weights uniform."""
    edges = set()
    order = rng.permutation(n_nodes)
    for i in range(1, n_nodes):
        a, b = int(order[i]), int(order[int(rng.integers(0, i))])
        edges.add((min(a, b), max(a, b)))
    attempts = 0
    while len(edges) < n_nodes - 1 + extra_edges and attempts < 100:
        a, b = rng.integers(0, n_nodes, size=2)
        attempts += 1
        if a == b:
            continue
        edges.add((min(int(a), int(b)), max(int(a), int(b))))
    edges = sorted(edges)
    weights = rng.uniform(w_lo, w_hi, size=len(edges))
    coords = rng.normal(size=(n_nodes, 2))
    return graphmod.from_weights(coords=coords, edges=edges, weights_raw=weights,
                                 s=0, t=n_nodes - 1)
