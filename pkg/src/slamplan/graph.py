"""Prior topo-metric graph: loading, validation and all-pairs shortest paths.

A prior graph describes the coarse structure of an environment: one vertex
per convex region (with a planar position in meters) and one edge per
traversable connection.  Each edge carries a length and a 3x3 SPD
measurement covariance in (m^2, m^2, rad^2); each region carries a
degeneracy matrix of the same shape, updated online during a mission.
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import CovarianceError, DisconnectedError, InputError

# Measurement covariance assigned to edges that do not specify one,
# interpreted per ``covariance_entries`` ("variance" by default).
DEFAULT_SIGMA_DIAG = (0.1, 0.1, 0.001)


def sigma_matrix(diag, covariance_entries: str = "variance") -> np.ndarray:
    """Build a diagonal 3x3 covariance from per-axis entries.

    ``covariance_entries`` selects whether the entries are variances or
    standard deviations.
    """
    d = np.asarray(diag, dtype=float)
    if d.shape != (3,):
        raise InputError(f"sigma must have 3 entries, got {d.tolist()}")
    if covariance_entries == "variance":
        return np.diag(d)
    if covariance_entries == "stddev":
        return np.diag(d * d)
    raise InputError(f"unknown covariance_entries mode {covariance_entries!r}")


def default_sigma() -> np.ndarray:
    return np.diag(DEFAULT_SIGMA_DIAG)


def check_spd(mat: np.ndarray, what: str) -> np.ndarray:
    """Validate symmetry and positive-definiteness; returns the matrix."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (3, 3):
        raise CovarianceError(f"{what}: covariance must be 3x3, got {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise CovarianceError(f"{what}: covariance not symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise CovarianceError(f"{what}: covariance not positive-definite") from None
    return mat


class PriorGraph:
    """Undirected topo-metric graph with positions, lengths and covariances.

    Vertices are identified by user ids (ints or strings); all numeric work
    uses dense indices in insertion order.  Mutating methods bump
    ``revision`` so cached shortest-path closures can be invalidated.
    """

    def __init__(self, vertices, edges, start, covariance_entries="variance"):
        # vertices: iterable of (id, x, y); edges: (u, v, length|None, cov|None)
        self.ids = []
        self.index = {}
        pos = []
        for vid, x, y in vertices:
            if vid in self.index:
                raise InputError(f"duplicate vertex id {vid!r}")
            self.index[vid] = len(self.ids)
            self.ids.append(vid)
            pos.append((float(x), float(y)))
        self.positions = np.asarray(pos, dtype=float).reshape(len(self.ids), 2)

        if start not in self.index:
            raise InputError(f"unknown start vertex {start!r}")
        self.start = start

        self.adjacency = {vid: {} for vid in self.ids}  # id -> {neighbor: length}
        self._edge_cov = {}  # frozenset({u,v}) -> 3x3
        self.edges = []
        for edge in edges:
            u, v, length, cov = edge
            self._add_edge_checked(u, v, length, cov, covariance_entries)

        self.region_cov = {vid: default_sigma() for vid in self.ids}
        self.revision = 0
        self._check_connected()

    # -- construction helpers -------------------------------------------

    def _add_edge_checked(self, u, v, length, cov, covariance_entries="variance"):
        for vid in (u, v):
            if vid not in self.index:
                raise InputError(f"edge ({u!r}, {v!r}) references unknown vertex {vid!r}")
        if u == v:
            raise InputError(f"self-loop at vertex {u!r}")
        key = frozenset((u, v))
        if key in self._edge_cov:
            raise InputError(f"duplicate edge ({u!r}, {v!r})")
        if length is None:
            length = float(np.linalg.norm(self.position(u) - self.position(v)))
        length = float(length)
        if not length > 0:
            raise InputError(f"edge ({u!r}, {v!r}) has non-positive length {length}")
        if cov is None:
            cov = default_sigma()
        elif np.ndim(cov) == 1:
            cov = sigma_matrix(cov, covariance_entries)
        cov = check_spd(np.asarray(cov, dtype=float), f"edge ({u!r}, {v!r})")
        self.adjacency[u][v] = length
        self.adjacency[v][u] = length
        self._edge_cov[key] = cov
        self.edges.append((u, v, length))

    def _check_connected(self):
        seen = {self.start}
        stack = [self.start]
        while stack:
            for nb in self.adjacency[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(self.ids):
            missing = next(v for v in self.ids if v not in seen)
            raise DisconnectedError(
                f"vertex {missing!r} is unreachable from start {self.start!r}"
            )

    # -- queries --------------------------------------------------------

    def __len__(self):
        return len(self.ids)

    def num_edges(self):
        return len(self.edges)

    def position(self, vid) -> np.ndarray:
        return self.positions[self.index[vid]]

    def has_edge(self, u, v) -> bool:
        return v in self.adjacency.get(u, ())

    def edge_length(self, u, v) -> float:
        try:
            return self.adjacency[u][v]
        except KeyError:
            raise InputError(f"no edge ({u!r}, {v!r})") from None

    def edge_cov(self, u, v) -> np.ndarray:
        return self._edge_cov[frozenset((u, v))]

    def neighbors(self, u):
        return self.adjacency[u].keys()

    # -- online updates (bump revision) ---------------------------------

    def add_edge(self, u, v, length=None, cov=None):
        self._add_edge_checked(u, v, length, cov)
        self.revision += 1

    def set_edge_cov(self, u, v, cov):
        key = frozenset((u, v))
        if key not in self._edge_cov:
            raise InputError(f"no edge ({u!r}, {v!r})")
        self._edge_cov[key] = check_spd(cov, f"edge ({u!r}, {v!r})")
        self.revision += 1

    def set_region_cov(self, vid, cov):
        if vid not in self.index:
            raise InputError(f"unknown vertex {vid!r}")
        self.region_cov[vid] = check_spd(cov, f"region {vid!r}")
        self.revision += 1

    def copy(self) -> "PriorGraph":
        g = PriorGraph.__new__(PriorGraph)
        g.ids = list(self.ids)
        g.index = dict(self.index)
        g.positions = self.positions.copy()
        g.start = self.start
        g.adjacency = {v: dict(nbrs) for v, nbrs in self.adjacency.items()}
        g._edge_cov = {k: m.copy() for k, m in self._edge_cov.items()}
        g.edges = list(self.edges)
        g.region_cov = {v: m.copy() for v, m in self.region_cov.items()}
        g.revision = self.revision
        return g

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "vertices": [
                {"id": vid, "x": self.positions[i, 0], "y": self.positions[i, 1]}
                for i, vid in enumerate(self.ids)
            ],
            "edges": [
                {
                    "u": u,
                    "v": v,
                    "length": length,
                    "sigma": np.diag(self.edge_cov(u, v)).tolist(),
                }
                for u, v, length in self.edges
            ],
            "start": self.start,
        }


def load_prior_graph(document, covariance_entries="variance") -> PriorGraph:
    """Parse a prior-graph document (JSON text, path, or parsed dict).

    Missing edge lengths default to the Euclidean distance between endpoint
    positions; missing edge covariances default to the package-wide default.
    """
    doc = _as_dict(document)
    try:
        raw_vertices = doc["vertices"]
        raw_edges = doc["edges"]
        start = doc["start"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"prior-graph document missing key: {exc}") from None

    vertices = []
    for item in raw_vertices:
        try:
            vertices.append((item["id"], item["x"], item["y"]))
        except (KeyError, TypeError):
            raise InputError(f"malformed vertex entry {item!r}") from None
    edges = []
    for item in raw_edges:
        try:
            edges.append((item["u"], item["v"], item.get("length"), item.get("sigma")))
        except (AttributeError, KeyError, TypeError):
            raise InputError(f"malformed edge entry {item!r}") from None
    return PriorGraph(vertices, edges, start, covariance_entries)


def _as_dict(document) -> dict:
    if isinstance(document, dict):
        return document
    text = str(document)
    if not text.lstrip().startswith("{"):
        try:
            with open(text, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {text}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from None


class MetricClosure:
    """All-pairs shortest-path distances with path reconstruction.

    Bound to one revision of a prior graph; ``fresh()`` reports whether the
    graph has changed since this closure was computed.
    """

    def __init__(self, graph: PriorGraph):
        n = len(graph)
        rows, cols, data = [], [], []
        for u, v, length in graph.edges:
            i, j = graph.index[u], graph.index[v]
            rows += [i, j]
            cols += [j, i]
            data += [length, length]
        weights = csr_matrix((data, (rows, cols)), shape=(n, n))
        dist, pred = dijkstra(weights, directed=False, return_predecessors=True)
        if not np.all(np.isfinite(dist)):
            bad = int(np.argwhere(~np.isfinite(dist))[0, 1])
            raise DisconnectedError(f"vertex {graph.ids[bad]!r} unreachable")
        self.graph = graph
        self.dist_matrix = dist
        self._pred = pred
        self.revision = graph.revision

    def fresh(self) -> bool:
        return self.revision == self.graph.revision

    def dist(self, u, v) -> float:
        g = self.graph
        return float(self.dist_matrix[g.index[u], g.index[v]])

    def path(self, u, v) -> list:
        """Shortest path from u to v as a list of vertex ids (inclusive)."""
        g = self.graph
        i, j = g.index[u], g.index[v]
        if i == j:
            return [u]
        chain = [j]
        while chain[-1] != i:
            p = self._pred[i, chain[-1]]
            if p < 0:
                raise DisconnectedError(f"no path {u!r} -> {v!r}")
            chain.append(int(p))
        return [g.ids[k] for k in reversed(chain)]


def metric_closure(graph: PriorGraph) -> MetricClosure:
    return MetricClosure(graph)


def euclidean(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])
