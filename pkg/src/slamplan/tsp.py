"""Open-loop coverage tours over the metric closure of a prior graph.

A coverage route must start at a given vertex, visit every requested
vertex, and may stop anywhere.  Following the classic reduction, the
open-loop problem is a closed tour on the complete closure graph with
every cost into the start zeroed: the return leg is free, so the closed
cost equals the open cost and the vertex before the return is the true
endpoint.

The heuristic solver seeds with nearest-neighbor construction from several
distinct second vertices and polishes with 2-opt reversals and or-opt
segment relocations.  Reversal deltas are evaluated on the symmetric
closure block, which is exact here because only the start column is
zeroed and the start is pinned at the front, never inside a reversed
segment.  An exact Held-Karp dynamic program covers small instances and
serves as the reference oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, SizeLimitError

_EXACT_LIMIT = 14
_TOL = 1e-9


@dataclass
class Tour:
    """Vertex visiting order on the metric closure (ids, start first)."""

    order: list
    length: float


@dataclass
class Walk:
    """Edge-by-edge route on the prior graph (consecutive pairs are edges)."""

    vertices: list
    length: float


class TourCosts:
    """Complete-graph costs for the open-loop reduction.

    ``cost`` is the closure distance with the start column zeroed (index 0
    is the start), so any closed tour's cost equals the corresponding open
    tour's cost.  ``sym`` keeps the unzeroed symmetric block for local
    search and length accounting.
    """

    def __init__(self, closure, include=None, start=None):
        g = closure.graph
        self.start = g.start if start is None else start
        chosen = set(g.ids if include is None else include)
        chosen.add(self.start)
        self.ids = [self.start] + [v for v in g.ids if v in chosen and v != self.start]
        idx = [g.index[v] for v in self.ids]
        self.sym = np.ascontiguousarray(closure.dist_matrix[np.ix_(idx, idx)])
        self.cost = self.sym.copy()
        self.cost[:, 0] = 0.0

    def __len__(self):
        return len(self.ids)

    def to_ids(self, order) -> list:
        return [self.ids[k] for k in order]

    def closed_cost(self, order) -> float:
        """Cost of order as a cycle under the zeroed-column matrix."""
        arr = np.asarray(order)
        return float(self.cost[arr, np.roll(arr, -1)].sum())


def build_tour_costs(closure, start=None, include=None) -> TourCosts:
    return TourCosts(closure, include=include, start=start)


# -- heuristic local search (index space, symmetric matrix) --------------


def _nn_seed(dist: np.ndarray, second: int | None, skip) -> list:
    n = dist.shape[0]
    visited = np.zeros(n, dtype=bool)
    for k in skip:
        visited[k] = True
    order = [0]
    visited[0] = True
    if second is not None:
        order.append(second)
        visited[second] = True
    while not visited.all():
        row = np.where(visited, np.inf, dist[order[-1]])
        nxt = int(np.argmin(row))  # argmin takes the smallest index on ties
        order.append(nxt)
        visited[nxt] = True
    return order


def _two_opt_pass(dist: np.ndarray, order: np.ndarray) -> bool:
    """One best-improvement reversal of order[i..j]; endpoints pinned."""
    m = len(order)
    if m < 4:
        return False
    pre = order[:-2]
    cur = order[1:-1]
    nxt = order[2:]
    delta = (
        dist[np.ix_(pre, cur)]
        + dist[np.ix_(nxt, cur)].T
        - dist[pre, cur][:, None]
        - dist[cur, nxt][None, :]
    )
    k = len(cur)
    delta[np.tril_indices(k)] = np.inf
    flat = int(np.argmin(delta))
    a, b = divmod(flat, k)
    if delta[a, b] >= -_TOL:
        return False
    i, j = a + 1, b + 1
    order[i : j + 1] = order[i : j + 1][::-1]
    return True


def _or_opt_pass(dist: np.ndarray, order: np.ndarray) -> bool:
    """One best-improvement forward relocation of a 1-3 vertex segment."""
    m = len(order)
    best = (-_TOL, None)
    for seg in (1, 2, 3):
        if m - 2 < seg + 1:
            continue
        starts = np.arange(1, m - seg)  # segment occupies [i, i+seg-1]
        slots = np.arange(1, m - 1)  # insert between order[j] and order[j+1]
        before = order[starts - 1]
        first = order[starts]
        last = order[starts + seg - 1]
        after = order[starts + seg]
        tj = order[slots]
        tj1 = order[slots + 1]
        gain = dist[before, first] + dist[last, after] - dist[before, after]
        ins = (
            dist[np.ix_(tj, first)].T
            + dist[np.ix_(last, tj1)]
            - dist[tj, tj1][None, :]
        )
        delta = ins - gain[:, None]
        delta[slots[None, :] < (starts + seg)[:, None]] = np.inf
        flat = int(np.argmin(delta))
        a, b = divmod(flat, len(slots))
        if delta[a, b] < best[0]:
            best = (delta[a, b], (int(starts[a]), seg, int(slots[b])))
    if best[1] is None:
        return False
    i, seg, j = best[1]
    piece = order[i : i + seg].copy()
    rest = np.concatenate([order[:i], order[i + seg :]])
    at = j + 1 - seg  # insertion index after the segment was removed
    order[:] = np.concatenate([rest[:at], piece, rest[at:]])
    return True


def _improve(dist: np.ndarray, order: list) -> np.ndarray:
    arr = np.asarray(order, dtype=np.int64)
    while True:
        while _two_opt_pass(dist, arr):
            pass
        if not _or_opt_pass(dist, arr):
            return arr


def _route_length(dist: np.ndarray, order) -> float:
    order = np.asarray(order)
    return float(dist[order[:-1], order[1:]].sum())


def _solve_open_indices(sym: np.ndarray, restarts: int) -> tuple[list, float]:
    n = sym.shape[0]
    if n == 1:
        return [0], 0.0
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = sym  # index n: free terminal of the open tour
    seconds = [int(s) for s in np.argsort(sym[0, 1:], kind="stable")[:restarts] + 1]
    best_order, best_len = None, np.inf
    for second in seconds:
        seed = _nn_seed(sym, second, ()) + [n]
        arr = _improve(aug, seed)
        length = _route_length(sym, arr[:-1])
        if length < best_len - _TOL:
            best_order, best_len = [int(v) for v in arr[:-1]], length
    return best_order, best_len


def _solve_fixed_end_indices(sym: np.ndarray, end: int, restarts: int) -> tuple[list, float]:
    n = sym.shape[0]
    if not 0 < end < n:
        raise InputError(f"end index {end} out of range")
    if n == 2:
        return [0, 1], float(sym[0, 1])
    masked = np.full(n, np.inf)
    masked[1:] = sym[0, 1:]
    masked[end] = np.inf
    seconds = [int(s) for s in np.argsort(masked, kind="stable")[: min(restarts, n - 2)]]
    best_order, best_len = None, np.inf
    for second in seconds:
        seed = _nn_seed(sym, second, (end,)) + [end]
        arr = _improve(sym, seed)
        length = _route_length(sym, arr)
        if length < best_len - _TOL:
            best_order, best_len = [int(v) for v in arr], length
    return best_order, best_len


def _held_karp(dist: np.ndarray, end: int | None) -> tuple[list, float]:
    n = dist.shape[0]
    if n > _EXACT_LIMIT:
        raise SizeLimitError(f"exact solver capped at {_EXACT_LIMIT} vertices, got {n}")
    if n == 1:
        return [0], 0.0
    m = n - 1
    sub = np.asarray(dist[1:, 1:], dtype=float)
    full = (1 << m) - 1
    dp = np.full((1 << m, m), np.inf)
    parent = np.full((1 << m, m), -1, dtype=np.int64)
    dp[[1 << k for k in range(m)], range(m)] = dist[0, 1:]
    for mask in range(1, full + 1):
        row = dp[mask]
        if not np.any(np.isfinite(row)):
            continue
        cand = row[:, None] + sub  # cand[k, t]: extend best path ending at k to t
        src = np.argmin(cand, axis=0)
        val = cand[src, range(m)]
        for t in range(m):
            bit = 1 << t
            if mask & bit:
                continue
            nm = mask | bit
            if val[t] < dp[nm, t]:
                dp[nm, t] = val[t]
                parent[nm, t] = src[t]
    if end is None:
        last = int(np.argmin(dp[full]))
    else:
        if not 0 < end < n:
            raise InputError(f"end index {end} out of range")
        last = end - 1
    length = float(dp[full, last])
    chain = [last]
    mask = full
    while parent[mask, chain[-1]] >= 0:
        k = chain[-1]
        chain.append(int(parent[mask, k]))
        mask ^= 1 << k
    order = [0] + [k + 1 for k in reversed(chain)]
    return order, length


# -- public solvers ------------------------------------------------------


def solve_open_tsp(costs: TourCosts, restarts: int = 8) -> Tour:
    """Heuristic open tour from the start over all vertices of ``costs``."""
    order, length = _solve_open_indices(costs.sym, restarts)
    return Tour(costs.to_ids(order), length)


def solve_fixed_end_tsp(costs: TourCosts, end, restarts: int = 8) -> Tour:
    """Heuristic open tour forced to terminate at vertex ``end``."""
    order, length = _solve_fixed_end_indices(costs.sym, costs.ids.index(end), restarts)
    return Tour(costs.to_ids(order), length)


def solve_open_tsp_exact(costs: TourCosts, end=None) -> Tour:
    """Held-Karp reference solution; SizeLimitError above the hard cap."""
    end_idx = None if end is None else costs.ids.index(end)
    order, length = _held_karp(costs.sym, end_idx)
    return Tour(costs.to_ids(order), length)


def plan_coverage_tour(closure, restarts: int = 8) -> Tour:
    """Heuristic open tour over every vertex of the prior graph."""
    return solve_open_tsp(TourCosts(closure), restarts)


def expand_to_walk(closure, order) -> Walk:
    """Replace each tour leg with its shortest path in the prior graph."""
    vertices = [order[0]]
    total = 0.0
    for a, b in zip(order[:-1], order[1:]):
        vertices.extend(closure.path(a, b)[1:])
        total += closure.dist(a, b)
    return Walk(vertices, total)


def walk_length(graph, vertices) -> float:
    """Length of a walk measured edge by edge on the prior graph."""
    return sum(graph.edge_length(a, b) for a, b in zip(vertices[:-1], vertices[1:]))
