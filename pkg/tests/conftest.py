"""Shared helpers: random connected instances and small exact oracles."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from slamplan.graph import PriorGraph


def random_connected_graph(rng, n, extra_edge_prob=0.3, unit_lengths=True,
                           scale=1.0):
    """Random spanning tree plus Bernoulli extra edges; always connected."""
    pos = rng.uniform(0.0, 10.0, size=(n, 2))
    vertices = [(i, pos[i, 0], pos[i, 1]) for i in range(n)]
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in edges and rng.uniform() < extra_edge_prob:
                edges.add((u, v))
    if unit_lengths:
        lengths = {e: scale for e in edges}
    else:
        lengths = {e: float(rng.uniform(0.5, 3.0)) * scale for e in edges}
    edge_list = [(u, v, lengths[(u, v)], None) for u, v in sorted(edges)]
    return PriorGraph(vertices, edge_list, start=0)


def spanning_tree_count(n, edges) -> int:
    """Exhaustive Kirchhoff check: count edge subsets of size n-1 that
    connect all n vertices."""
    edges = list(edges)
    count = 0
    for subset in itertools.combinations(edges, n - 1):
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ok = True
        for u, v in subset:
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            count += 1
    return count


def brute_force_open_tour(dist, start=0):
    """Cheapest open tour over index matrix ``dist`` starting at ``start``."""
    n = dist.shape[0]
    rest = [k for k in range(n) if k != start]
    best_cost = np.inf
    best_order = (start,)
    for perm in itertools.permutations(rest):
        order = (start,) + perm
        cost = sum(dist[a, b] for a, b in zip(order[:-1], order[1:]))
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_order = order
    return list(best_order), float(best_cost)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    """The a-b-c unit path used throughout the worked examples."""
    doc = {
        "vertices": [
            {"id": "a", "x": 0.0, "y": 0.0},
            {"id": "b", "x": 1.0, "y": 0.0},
            {"id": "c", "x": 2.0, "y": 0.0},
        ],
        "edges": [
            {"u": "a", "v": "b", "length": 1.0},
            {"u": "b", "v": "c", "length": 1.0},
        ],
        "start": "a",
    }
    from slamplan.graph import load_prior_graph

    return load_prior_graph(doc)


@pytest.fixture
def triangle():
    doc = {
        "vertices": [
            {"id": "a", "x": 0.0, "y": 0.0},
            {"id": "b", "x": 1.0, "y": 0.0},
            {"id": "c", "x": 0.5, "y": 0.9},
        ],
        "edges": [
            {"u": "a", "v": "b", "length": 1.0},
            {"u": "b", "v": "c", "length": 1.0},
            {"u": "a", "v": "c", "length": 1.0},
        ],
        "start": "a",
    }
    from slamplan.graph import load_prior_graph

    return load_prior_graph(doc)
