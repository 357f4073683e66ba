import itertools

import numpy as np
import pytest

from slamplan.errors import SizeLimitError
from slamplan.graph import load_prior_graph, metric_closure
from slamplan.tsp import (
    TourCosts,
    build_tour_costs,
    expand_to_walk,
    plan_coverage_tour,
    solve_fixed_end_tsp,
    solve_open_tsp,
    solve_open_tsp_exact,
)

from conftest import brute_force_open_tour, random_connected_graph


def costs_for(graph, include=None, start=None):
    return TourCosts(metric_closure(graph), include=include, start=start)


def test_triangle_cost_matrix(triangle):
    costs = costs_for(triangle)
    assert costs.ids[0] == "a"
    expect = np.array([[0, 1, 1], [0, 0, 1], [0, 1, 0]], dtype=float)
    assert np.allclose(costs.cost, expect)
    assert np.allclose(costs.sym, costs.sym.T)


def test_single_vertex_costs_and_tour():
    doc = {"vertices": [{"id": "a", "x": 0, "y": 0}], "edges": [], "start": "a"}
    g = load_prior_graph(doc)
    costs = costs_for(g)
    assert costs.cost.shape == (1, 1) and costs.cost[0, 0] == 0.0
    tour = solve_open_tsp(costs)
    assert tour.order == ["a"]
    assert tour.length == 0.0
    exact = solve_open_tsp_exact(costs)
    assert exact.order == ["a"] and exact.length == 0.0


def test_closed_cost_equals_open_cost(rng):
    # Zeroing the start column makes the closing leg free, so cycle cost
    # under .cost equals the open path cost under .sym.
    for _ in range(25):
        n = int(rng.integers(2, 9))
        g = random_connected_graph(rng, n, unit_lengths=False)
        costs = costs_for(g)
        perm = [0] + list(rng.permutation(np.arange(1, n)))
        open_cost = sum(
            costs.sym[a, b] for a, b in zip(perm[:-1], perm[1:])
        )
        assert costs.closed_cost(perm) == pytest.approx(open_cost, abs=1e-9)


def test_path_order_and_cost(path3):
    tour = solve_open_tsp(costs_for(path3))
    assert tour.order == ["a", "b", "c"]
    assert tour.length == pytest.approx(2.0)


def test_four_cycle_open_cost():
    doc = {
        "vertices": [{"id": k, "x": float(k % 2), "y": float(k // 2)} for k in range(4)],
        "edges": [
            {"u": 0, "v": 1, "length": 1.0},
            {"u": 1, "v": 3, "length": 1.0},
            {"u": 3, "v": 2, "length": 1.0},
            {"u": 2, "v": 0, "length": 1.0},
        ],
        "start": 0,
    }
    g = load_prior_graph(doc)
    for solver in (solve_open_tsp, solve_open_tsp_exact):
        tour = solver(costs_for(g))
        assert tour.length == pytest.approx(3.0)


def test_exact_size_limit():
    rng = np.random.default_rng(0)
    g = random_connected_graph(rng, 15, extra_edge_prob=0.2)
    with pytest.raises(SizeLimitError):
        solve_open_tsp_exact(costs_for(g))


def test_exact_beats_every_permutation(rng):
    for _ in range(15):
        n = int(rng.integers(2, 8))
        g = random_connected_graph(rng, n, unit_lengths=False)
        costs = costs_for(g)
        tour = solve_open_tsp_exact(costs)
        _, best = brute_force_open_tour(costs.sym)
        assert tour.length == pytest.approx(best, abs=1e-9)


def test_heuristic_orders_are_valid(rng):
    for _ in range(20):
        n = int(rng.integers(1, 12))
        g = random_connected_graph(rng, n, unit_lengths=False)
        tour = solve_open_tsp(costs_for(g))
        assert tour.order[0] == 0
        assert sorted(tour.order) == sorted(g.ids)


def test_heuristic_quality(rng):
    exact_hits = 0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        g = random_connected_graph(rng, n, unit_lengths=False)
        costs = costs_for(g)
        heur = solve_open_tsp(costs)
        exact = solve_open_tsp_exact(costs)
        assert heur.length <= 1.3 * exact.length + 1e-9
        if heur.length <= exact.length + 1e-9:
            exact_hits += 1
    assert exact_hits >= 90
    for _ in range(20):
        n = int(rng.integers(6, 13))
        g = random_connected_graph(rng, n, unit_lengths=False)
        costs = costs_for(g)
        heur = solve_open_tsp(costs)
        exact = solve_open_tsp_exact(costs)
        assert heur.length <= 1.3 * exact.length + 1e-9


def test_determinism(rng):
    g = random_connected_graph(rng, 10, unit_lengths=False)
    costs = costs_for(g)
    t1 = solve_open_tsp(costs)
    t2 = solve_open_tsp(costs)
    assert t1.order == t2.order and t1.length == t2.length


def test_fixed_end_variants(rng):
    for _ in range(10):
        n = int(rng.integers(3, 8))
        g = random_connected_graph(rng, n, unit_lengths=False)
        costs = costs_for(g)
        end = g.ids[-1]
        heur = solve_fixed_end_tsp(costs, end)
        exact = solve_open_tsp_exact(costs, end=end)
        assert heur.order[0] == 0 and heur.order[-1] == end
        assert exact.order[-1] == end
        # brute force with the endpoint pinned
        rest = [k for k in range(1, n) if k != n - 1]
        best = np.inf
        for perm in itertools.permutations(rest):
            order = [0] + list(perm) + [n - 1]
            cost = sum(costs.sym[a, b] for a, b in zip(order[:-1], order[1:]))
            best = min(best, cost)
        assert exact.length == pytest.approx(best, abs=1e-9)
        assert heur.length >= exact.length - 1e-9


def test_include_subset(path3):
    costs = costs_for(path3, include={"a", "c"})
    assert costs.ids == ["a", "c"]
    tour = solve_open_tsp(costs)
    assert tour.order == ["a", "c"]
    assert tour.length == pytest.approx(2.0)


def test_expand_adjacent_order_is_identity(path3):
    mc = metric_closure(path3)
    walk = expand_to_walk(mc, ["a", "b", "c"])
    assert walk.vertices == ["a", "b", "c"]
    assert walk.length == pytest.approx(2.0)


def test_expand_inserts_intermediates(path3):
    mc = metric_closure(path3)
    walk = expand_to_walk(mc, ["a", "c"])
    assert walk.vertices == ["a", "b", "c"]
    assert walk.length == pytest.approx(2.0)


def test_expand_walk_validity(rng):
    for _ in range(15):
        n = int(rng.integers(2, 10))
        g = random_connected_graph(rng, n, extra_edge_prob=0.1,
                                   unit_lengths=False)
        mc = metric_closure(g)
        tour = solve_open_tsp(costs_for(g))
        walk = expand_to_walk(mc, tour.order)
        for u, v in zip(walk.vertices[:-1], walk.vertices[1:]):
            assert g.has_edge(u, v)
        assert set(walk.vertices) == set(g.ids)
        total = sum(
            g.edge_length(u, v)
            for u, v in zip(walk.vertices[:-1], walk.vertices[1:])
        )
        assert walk.length == pytest.approx(total, abs=1e-9)


def test_plan_coverage_tour(path3):
    tour = plan_coverage_tour(metric_closure(path3))
    assert tour.order == ["a", "b", "c"]


def test_build_tour_costs_alias(path3):
    mc = metric_closure(path3)
    costs = build_tour_costs(mc, start="b")
    assert costs.ids[0] == "b"
    assert np.all(costs.cost[:, 0] == 0.0)
