"""Loop-edge candidate selection over an abstracted pose graph.

A planned coverage walk induces a region-granularity approximation of the
robot's eventual pose graph: one pose per distinct visited vertex (ordered
by first visit, pose 0 anchored at the start) and one relative-pose factor
per distinct traversed edge.  A candidate loop edge joins two poses with
no direct factor; committing to it sends the robot from the later pose's
vertex to the earlier pose's vertex and back, adding twice the
shortest-path distance between them.

Selection maximizes the ratio of estimation quality to travel cost,

    score(S) = dopt(L + sum_{c in S} gamma_c b_c b_c^T) / (d_tsp + 2 sum omega_c),

greedily: each iteration adds the candidate whose multiplicative gain

    delta = (1 + gamma * b^T L^{-1} b)^(1/n) / (1 + 2 omega / d_current)

is largest, while delta > 1.  Two sound filters shrink the candidate set:
a distance cap omega_max (no candidate farther than it can ever gain) and
a per-candidate test comparing the numerator term against 1 + omega/d_tsp.
Both rely on d(plan) <= 2 d_tsp, which is audited on every plan.

All score bookkeeping is in the log domain; determinants come from the
Cholesky factor via the matrix determinant lemma, with from-scratch dense
recomputation reserved for oracles and audits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, MismatchError, SizeLimitError
from .laplacian import (
    LaplacianFactor,
    build_reduced_laplacian,
    information_weight,
)
from .tsp import Walk

_LOG_TOL = 0.0  # select only while log(delta) is strictly positive


class AbstractedPoseGraph:
    """Deduplicated pose/edge topology induced by a walk."""

    def __init__(self, graph, pose_to_vertex, vertex_to_pose, weighted_edges):
        self.graph = graph
        self.revision = graph.revision
        self.pose_to_vertex = pose_to_vertex
        self.vertex_to_pose = vertex_to_pose
        self.weighted_edges = weighted_edges  # [(i, j, gamma)], i > j
        self.edges = {(i, j) for i, j, _ in weighted_edges}
        self.n = len(pose_to_vertex) - 1
        self.factor = LaplacianFactor.from_factors(self.n, weighted_edges)

    @property
    def pose_count(self):
        return len(self.pose_to_vertex)


def abstract_pose_graph(walk: Walk, graph) -> AbstractedPoseGraph:
    """Collapse a walk to distinct poses and distinct traversed edges.

    Edge factors take their weight from the prior edge's covariance;
    repeated traversals contribute a single factor.
    """
    pose_to_vertex = []
    vertex_to_pose = {}
    for v in walk.vertices:
        if v not in vertex_to_pose:
            vertex_to_pose[v] = len(pose_to_vertex)
            pose_to_vertex.append(v)
    seen = set()
    weighted = []
    for u, v in zip(walk.vertices[:-1], walk.vertices[1:]):
        i, j = vertex_to_pose[u], vertex_to_pose[v]
        if i < j:
            i, j = j, i
        if (i, j) in seen:
            continue
        seen.add((i, j))
        weighted.append((i, j, information_weight(graph.edge_cov(u, v))))
    return AbstractedPoseGraph(graph, pose_to_vertex, vertex_to_pose, weighted)


@dataclass
class LoopEdgeCandidate:
    """Pose pair (i > j) with detour distance omega and factor weight gamma."""

    i: int
    j: int
    omega: float
    gamma: float


class CandidateSet:
    """Column-oriented candidate storage for batched evaluation."""

    def __init__(self, i, j, omega, gamma, n):
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.omega = np.asarray(omega, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.n = n

    def __len__(self):
        return len(self.i)

    def __iter__(self):
        for k in range(len(self.i)):
            yield self.candidate(k)

    def candidate(self, k: int) -> LoopEdgeCandidate:
        return LoopEdgeCandidate(
            int(self.i[k]), int(self.j[k]), float(self.omega[k]), float(self.gamma[k])
        )

    def subset(self, mask) -> "CandidateSet":
        return CandidateSet(
            self.i[mask], self.j[mask], self.omega[mask], self.gamma[mask], self.n
        )

    def incidence_matrix(self) -> np.ndarray:
        """Dense (n, m) matrix of signed incidence columns (anchor dropped)."""
        m = len(self.i)
        cols = np.zeros((self.n, m))
        rows = np.arange(m)
        cols[self.i - 1, rows] = 1.0
        pos = self.j > 0
        cols[self.j[pos] - 1, rows[pos]] = -1.0
        return cols

    def incidence_column(self, k: int) -> np.ndarray:
        b = np.zeros(self.n)
        b[self.i[k] - 1] = 1.0
        if self.j[k] > 0:
            b[self.j[k] - 1] = -1.0
        return b


def candidate_gamma(graph, u, v) -> float:
    """Weight of a prospective loop factor between two regions: scalar
    information of the mean of their degeneracy matrices."""
    return information_weight(0.5 * (graph.region_cov[u] + graph.region_cov[v]))


def enumerate_candidates(apg: AbstractedPoseGraph, closure) -> CandidateSet:
    """All pose pairs i > j without a direct factor, sorted by (i, j)."""
    if closure.graph is not apg.graph or not closure.fresh():
        raise MismatchError("metric closure is stale for this pose graph")
    p = apg.pose_count
    ju, iu = np.triu_indices(p, k=1)  # iu > ju
    if len(iu):
        order = np.lexsort((ju, iu))
        iu, ju = iu[order], ju[order]
    if apg.edges:
        ei = np.array([e[0] for e in apg.edges], dtype=np.int64)
        ej = np.array([e[1] for e in apg.edges], dtype=np.int64)
        keep = ~np.isin(iu * p + ju, ei * p + ej)
        iu, ju = iu[keep], ju[keep]
    g = apg.graph
    vidx = np.array([g.index[v] for v in apg.pose_to_vertex], dtype=np.int64)
    omega = closure.dist_matrix[vidx[iu], vidx[ju]]
    mats = np.stack([g.region_cov[v] for v in apg.pose_to_vertex])
    means = 0.5 * (mats[iu] + mats[ju])
    gamma = np.linalg.det(means) ** (-1.0 / 3.0)
    return CandidateSet(iu, ju, omega, gamma, apg.n)


# -- incremental gain and pruning ---------------------------------------


def log_gain_numerator(factor: LaplacianFactor, gamma, quad) -> np.ndarray:
    """log of (1 + gamma * b^T L^{-1} b)^(1/n), vectorized."""
    return np.log1p(np.asarray(gamma) * np.asarray(quad)) / factor.n


def selection_delta(cand: LoopEdgeCandidate, factor: LaplacianFactor,
                    current_distance: float) -> float:
    """Multiplicative score gain of adding one candidate to the plan."""
    q = factor.quad_form(_column(factor.n, cand))
    num = np.log1p(cand.gamma * q) / factor.n
    den = np.log1p(2.0 * cand.omega / current_distance)
    return float(np.exp(num - den))


def _column(n, cand):
    b = np.zeros(n)
    b[cand.i - 1] = 1.0
    if cand.j > 0:
        b[cand.j - 1] = -1.0
    return b


def omega_max(factor: LaplacianFactor, d_tsp: float, cands: CandidateSet,
              quad=None) -> float:
    """Detour cap: no candidate farther than this can ever raise the score."""
    if len(cands) == 0:
        raise InputError("omega_max needs at least one candidate")
    if quad is None:
        quad = factor.quad_form_batch(cands.incidence_matrix())
    lognum = log_gain_numerator(factor, cands.gamma, quad)
    return float(d_tsp * np.expm1(np.max(lognum)))


def prune_mask(factor: LaplacianFactor, d_tsp: float, cands: CandidateSet,
               quad=None) -> np.ndarray:
    """Boolean mask of candidates that can still improve the score.

    A candidate is dropped when its gain numerator cannot beat
    1 + omega/d_tsp, which upper-bounds the distance penalty for any plan
    within twice the base tour length.  The distance reference stays at
    d_tsp even as the factor is updated mid-selection: the factor only
    gains information (numerator shrinks), so dropped candidates stay
    dropped, while the 2x-assumption keeps the denominator bound valid.
    """
    if len(cands) == 0:
        return np.zeros(0, dtype=bool)
    if quad is None:
        quad = factor.quad_form_batch(cands.incidence_matrix())
    lognum = log_gain_numerator(factor, cands.gamma, quad)
    cap = d_tsp * np.expm1(np.max(lognum))
    return (cands.omega <= cap) & (lognum > np.log1p(cands.omega / d_tsp))


def prune_candidates(factor: LaplacianFactor, d_tsp: float,
                     cands: CandidateSet) -> CandidateSet:
    return cands.subset(prune_mask(factor, d_tsp, cands))


# -- plans ---------------------------------------------------------------


@dataclass
class LoopAction:
    """Detour committed at the anchor vertex: go to target and return."""

    anchor: object
    target: object
    omega: float
    gamma: float
    pose_i: int
    pose_j: int
    position: int  # index of the anchor's first occurrence in the base walk

    def to_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "target": self.target,
            "omega": self.omega,
            "gamma": self.gamma,
        }


@dataclass
class Plan:
    """Executable exploration plan: base coverage walk plus loop actions."""

    walk: Walk
    tsp_walk: Walk
    actions: list
    objective: float
    log_objective: float
    base_distance: float
    d_tsp: float
    assumption_ok: bool

    def to_dict(self) -> dict:
        return {
            "walk": list(self.walk.vertices),
            "actions": [a.to_dict() for a in self.actions],
            "objective": self.objective,
            "base_distance": self.base_distance,
            "d_tsp": self.d_tsp,
            "assumption_ok": self.assumption_ok,
        }


def insert_loop_edges(apg: AbstractedPoseGraph, walk: Walk, selected,
                      closure, log_objective=None) -> Plan:
    """Realize selected loop edges by splicing detours into the walk.

    Each action expands the first occurrence of its anchor vertex (the
    later pose) into anchor -> target -> anchor along shortest paths;
    actions sharing an anchor run in increasing-omega order.  Total length
    grows by exactly twice the summed detour distances.
    """
    first_occ = {}
    for idx, v in enumerate(walk.vertices):
        if v not in first_occ:
            first_occ[v] = idx
    actions = []
    for cand in selected:
        anchor = apg.pose_to_vertex[cand.i]
        target = apg.pose_to_vertex[cand.j]
        if anchor not in first_occ:
            raise InputError(f"anchor vertex {anchor!r} not on the walk")
        actions.append(
            LoopAction(anchor, target, cand.omega, cand.gamma, cand.i, cand.j,
                       first_occ[anchor])
        )
    actions.sort(key=lambda a: (a.position, a.omega, a.pose_i, a.pose_j))
    by_pos = {}
    for a in actions:
        by_pos.setdefault(a.position, []).append(a)
    vertices = []
    for idx, v in enumerate(walk.vertices):
        vertices.append(v)
        for a in by_pos.get(idx, ()):
            vertices.extend(closure.path(a.anchor, a.target)[1:])
            vertices.extend(closure.path(a.target, a.anchor)[1:])
    total = walk.length + 2.0 * sum(a.omega for a in actions)
    if log_objective is None:
        log_objective = score_from_scratch(apg, selected, walk.length)
    d_tsp = walk.length
    return Plan(
        walk=Walk(vertices, total),
        tsp_walk=walk,
        actions=actions,
        objective=float(np.exp(log_objective)),
        log_objective=float(log_objective),
        base_distance=total,
        d_tsp=d_tsp,
        assumption_ok=bool(total <= 2.0 * d_tsp + 1e-9),
    )


def score_from_scratch(apg: AbstractedPoseGraph, selected, d_tsp: float) -> float:
    """log score via dense reassembly; the oracle path, no factor reuse."""
    extra = [(c.i, c.j, c.gamma) for c in selected]
    lap = build_reduced_laplacian(apg.n, apg.weighted_edges + extra)
    sign, logdet = np.linalg.slogdet(lap)
    if sign <= 0:
        raise InputError("score undefined: reduced Laplacian not positive-definite")
    dist = d_tsp + 2.0 * sum(c.omega for c in selected)
    return logdet / apg.n - float(np.log(dist))


# -- selection -----------------------------------------------------------


@dataclass
class GreedyTrace:
    """Counts and per-iteration telemetry from one greedy run."""

    initial_candidates: int
    after_omega_max: int
    after_prop1: int
    per_iteration: list = field(default_factory=list)
    selections: list = field(default_factory=list)  # (i, j, log_delta)


@dataclass
class GreedyResult:
    selected: list
    plan: Plan
    trace: GreedyTrace
    log_objective: float


def greedy_select(apg: AbstractedPoseGraph, cands: CandidateSet, walk: Walk,
                  closure, pruning: bool = True) -> GreedyResult:
    """Iterative best-gain selection with optional candidate pruning.

    With pruning on, each iteration refreshes the distance cap and the
    per-candidate test using the current factor before picking the best
    survivor; the selected sequence is identical either way because
    filtered candidates provably have delta <= 1.  Ties in the gain break
    toward the smallest (i, j).
    """
    factor = apg.factor.copy()
    d_tsp = walk.length
    d_cur = d_tsp
    m = len(cands)
    trace = GreedyTrace(m, m, m)
    selected = []
    if apg.n == 0 or d_tsp <= 0.0:
        plan = insert_loop_edges(apg, walk, selected, closure, 0.0)
        return GreedyResult(selected, plan, trace, 0.0)
    log_j = factor.log_dopt() - float(np.log(d_tsp))
    if m == 0:
        plan = insert_loop_edges(apg, walk, selected, closure, log_j)
        return GreedyResult(selected, plan, trace, log_j)
    cols = cands.incidence_matrix()
    alive = np.ones(m, dtype=bool)
    first = True
    while alive.any():
        idx = np.flatnonzero(alive)
        quad = factor.quad_form_batch(cols[:, idx])
        lognum = np.log1p(cands.gamma[idx] * quad) / apg.n
        if pruning:
            cap = d_tsp * np.expm1(np.max(lognum))
            keep_omega = cands.omega[idx] <= cap
            keep = keep_omega & (lognum > np.log1p(cands.omega[idx] / d_tsp))
            if first:
                trace.after_omega_max = int(keep_omega.sum())
                trace.after_prop1 = int(keep.sum())
            alive[idx[~keep]] = False
            idx = idx[keep]
            lognum = lognum[keep]
            if len(idx) == 0:
                break
        first = False
        trace.per_iteration.append(len(idx))
        log_delta = lognum - np.log1p(2.0 * cands.omega[idx] / d_cur)
        best = int(np.argmax(log_delta))  # first max: smallest (i, j) on ties
        if log_delta[best] <= _LOG_TOL:
            break
        k = int(idx[best])
        cand = cands.candidate(k)
        factor.rank_one_update(cand.gamma, cols[:, k])
        d_cur += 2.0 * cand.omega
        log_j += float(log_delta[best])
        selected.append(cand)
        trace.selections.append((cand.i, cand.j, float(log_delta[best])))
        alive[k] = False
    plan = insert_loop_edges(apg, walk, selected, closure, log_j)
    return GreedyResult(selected, plan, trace, log_j)


def brute_force_select(apg: AbstractedPoseGraph, cands: CandidateSet,
                       walk: Walk, max_subset: int | None = None,
                       chunk: int = 16384):
    """Exhaustive subset search; every score rebuilt densely.

    Only viable for small candidate sets; used as the optimality oracle.
    Returns (best candidate list, best score, best log score).
    """
    m = len(cands)
    if m > 20:
        raise SizeLimitError(f"exhaustive search capped at 20 candidates, got {m}")
    n = apg.n
    d_tsp = walk.length
    base = build_reduced_laplacian(n, apg.weighted_edges)
    rank1 = np.empty((m, n * n))
    for k in range(m):
        b = cands.incidence_column(k)
        rank1[k] = (cands.gamma[k] * np.outer(b, b)).ravel()
    total = 1 << m
    codes = np.arange(total, dtype=np.int64)
    if max_subset is not None:
        bits = np.zeros(total, dtype=np.int64)
        tmp = codes.copy()
        for _ in range(m):
            bits += tmp & 1
            tmp >>= 1
        codes = codes[bits <= max_subset]
    best_log, best_code = -np.inf, 0
    for lo in range(0, len(codes), chunk):
        part = codes[lo : lo + chunk]
        members = ((part[:, None] >> np.arange(m)) & 1).astype(float)
        laps = base.ravel()[None, :] + members @ rank1
        sign, logdet = np.linalg.slogdet(laps.reshape(-1, n, n))
        dist = d_tsp + 2.0 * (members @ cands.omega)
        score = np.where(sign > 0, logdet / n - np.log(dist), -np.inf)
        k = int(np.argmax(score))
        if score[k] > best_log:
            best_log, best_code = float(score[k]), int(part[k])
    chosen = [cands.candidate(k) for k in range(m) if best_code >> k & 1]
    return chosen, float(np.exp(best_log)), best_log
