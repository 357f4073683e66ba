import json

import numpy as np
import pytest

from slamplan.errors import CovarianceError, DisconnectedError, InputError
from slamplan.graph import (
    DEFAULT_SIGMA_DIAG,
    PriorGraph,
    check_spd,
    default_sigma,
    load_prior_graph,
    metric_closure,
    sigma_matrix,
)
from slamplan.laplacian import information_weight

from conftest import random_connected_graph


def test_load_from_dict_text_and_path(tmp_path, path3):
    doc = path3.to_dict()
    from_text = load_prior_graph(json.dumps(doc))
    p = tmp_path / "g.json"
    p.write_text(json.dumps(doc))
    from_path = load_prior_graph(str(p))
    for g in (from_text, from_path):
        assert list(g.ids) == ["a", "b", "c"]
        assert g.start == "a"
        assert g.num_edges() == 2


def test_default_edge_length_is_euclidean():
    doc = {
        "vertices": [{"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 3, "y": 4}],
        "edges": [{"u": 0, "v": 1}],
        "start": 0,
    }
    g = load_prior_graph(doc)
    assert g.edge_length(0, 1) == pytest.approx(5.0)


def test_load_errors_name_offender():
    base = {
        "vertices": [{"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 1, "y": 0}],
        "edges": [{"u": 0, "v": 1}],
        "start": 0,
    }
    dup = dict(base, vertices=base["vertices"] + [{"id": 1, "x": 2, "y": 0}])
    with pytest.raises(InputError, match="1"):
        load_prior_graph(dup)
    bad_edge = dict(base, edges=[{"u": 0, "v": 9}])
    with pytest.raises(InputError, match="9"):
        load_prior_graph(bad_edge)
    bad_start = dict(base, start=7)
    with pytest.raises(InputError, match="7"):
        load_prior_graph(bad_start)
    neg = dict(base, edges=[{"u": 0, "v": 1, "length": -2.0}])
    with pytest.raises(InputError):
        load_prior_graph(neg)


def test_default_covariance_weight():
    # diag(0.1, 0.1, 0.001) stored as-is; its information weight is
    # (1/(0.1*0.1*0.001))^(1/3) = 100000^(1/3)
    doc = {
        "vertices": [{"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 1, "y": 0}],
        "edges": [{"u": 0, "v": 1, "sigma": [0.1, 0.1, 0.001]}],
        "start": 0,
    }
    g = load_prior_graph(doc)
    cov = g.edge_cov(0, 1)
    assert np.allclose(np.diag(cov), DEFAULT_SIGMA_DIAG)
    assert information_weight(cov) == pytest.approx(46.4159, abs=1e-3)


def test_sigma_matrix_stddev_mode():
    var = sigma_matrix([0.1, 0.1, 0.001], "variance")
    std = sigma_matrix([0.1, 0.1, 0.001], "stddev")
    assert np.allclose(np.diag(var), [0.1, 0.1, 0.001])
    assert np.allclose(np.diag(std), [0.01, 0.01, 1e-6])
    with pytest.raises(InputError):
        sigma_matrix([0.1, 0.1, 0.001], "nonsense")


def test_check_spd_rejects_bad_matrices():
    with pytest.raises(CovarianceError):
        check_spd(np.diag([1.0, -1.0, 1.0]), "test")
    with pytest.raises(CovarianceError):
        check_spd(np.array([[1.0, 2.0, 0], [0, 1.0, 0], [0, 0, 1.0]]), "test")
    out = check_spd(default_sigma(), "test")
    assert out.shape == (3, 3)


def test_disconnected_graph_rejected():
    doc = {
        "vertices": [
            {"id": 0, "x": 0, "y": 0},
            {"id": 1, "x": 1, "y": 0},
            {"id": 2, "x": 5, "y": 5},
        ],
        "edges": [{"u": 0, "v": 1}],
        "start": 0,
    }
    with pytest.raises(DisconnectedError):
        load_prior_graph(doc)


def test_closure_path_on_unit_path(path3):
    mc = metric_closure(path3)
    assert mc.dist("a", "c") == pytest.approx(2.0)
    assert mc.path("a", "c") == ["a", "b", "c"]
    assert mc.path("c", "a") == ["c", "b", "a"]
    assert mc.dist("b", "b") == 0.0


def test_closure_on_triangle(triangle):
    mc = metric_closure(triangle)
    assert mc.dist("a", "c") == pytest.approx(1.0)
    assert mc.path("a", "c") == ["a", "c"]


def test_closure_routes_around_long_edge():
    # 4-cycle with one edge of length 10: the short way round wins.
    doc = {
        "vertices": [
            {"id": k, "x": float(k), "y": 0.0} for k in range(4)
        ],
        "edges": [
            {"u": 0, "v": 1, "length": 1.0},
            {"u": 1, "v": 2, "length": 1.0},
            {"u": 2, "v": 3, "length": 1.0},
            {"u": 3, "v": 0, "length": 10.0},
        ],
        "start": 0,
    }
    mc = metric_closure(load_prior_graph(doc))
    assert mc.dist(0, 3) == pytest.approx(3.0)
    assert mc.path(0, 3) == [0, 1, 2, 3]


def test_closure_reconstruction_property(rng):
    for _ in range(20):
        n = int(rng.integers(3, 10))
        g = random_connected_graph(rng, n, unit_lengths=False)
        mc = metric_closure(g)
        for u in g.ids:
            for v in g.ids:
                path = mc.path(u, v)
                assert path[0] == u and path[-1] == v
                total = 0.0
                for a, b in zip(path[:-1], path[1:]):
                    assert g.has_edge(a, b)
                    total += g.edge_length(a, b)
                assert total == pytest.approx(mc.dist(u, v), abs=1e-9)


def test_revision_tracks_mutations(path3):
    mc = metric_closure(path3)
    assert mc.fresh()
    rev = path3.revision
    path3.set_region_cov("a", np.diag([1.0, 1.0, 0.01]))
    assert path3.revision > rev
    assert not mc.fresh()
    path3.add_edge("a", "c", length=2.0)
    assert path3.has_edge("a", "c")
    mc2 = metric_closure(path3)
    assert mc2.dist("a", "c") == pytest.approx(2.0)


def test_to_dict_round_trip(triangle):
    triangle.set_edge_cov("a", "b", np.diag([0.2, 0.2, 0.002]))
    doc = triangle.to_dict()
    g2 = load_prior_graph(doc)
    assert list(g2.ids) == list(triangle.ids)
    assert g2.num_edges() == triangle.num_edges()
    assert np.allclose(g2.edge_cov("a", "b"), triangle.edge_cov("a", "b"))
    assert np.allclose(g2.positions, triangle.positions)
