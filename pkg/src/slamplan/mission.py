"""Hierarchical mission execution over a live prior graph.

The executor follows a plan step by step: visit steps send the robot to
the next unvisited goal along the current shortest path (already-visited
goals are skipped), loop-close steps detour to the target vertex and
back.  As regions are covered the prior graph is updated online: region
degeneracy matrices are re-estimated from nearby pose-graph edge
covariances, hidden world connectivity is revealed once both endpoints
have been seen, and edge covariances track their endpoint regions.

After every loop-closing action the planner is re-run over the remaining
vertices and the better of {existing remainder, fresh plan} is kept,
scored by remaining quality per meter.  Between loop closures, a cheaper
fix-up re-solves the segment up to the next loop anchor as a small TSP
whenever the graph has changed.

Updates become visible at step boundaries: one goto follows one frozen
shortest path even if coverage during it reveals new edges.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, MismatchError
from .graph import PriorGraph, metric_closure
from .laplacian import build_reduced_laplacian, information_weight
from .planner import STRATEGIES, compute_plan
from .se2 import between, wrap_angle
from .sim import (
    MissionMetrics,
    SimPoseGraph,
    WorldModel,
    ape_rmse,
    dead_reckon,
    log_dopt_fim,
    optimize_pose_graph,
)
from .tsp import TourCosts, solve_fixed_end_tsp, solve_open_tsp

_SCORE_TIE = 1e-9


@dataclass
class MissionConfig:
    strategy: str = "slam_aware"
    degeneracy_window: int = 5  # pose-graph edges averaged per region
    replanning: bool = True
    subpath_optimization: bool = True
    pruning: bool = True
    restarts: int = 8
    vicinity_radius: float = 0.5  # arrival slack for off-graph execution; exact here
    covariance_entries: str = "variance"
    optimizer_max_iters: int = 100
    optimizer_tol: float = 1e-10
    fim_half: bool = True


@dataclass
class MissionLog:
    seed: int
    strategy: str
    events: list = field(default_factory=list)
    plans: list = field(default_factory=list)
    pose_graph: SimPoseGraph = None
    prior: PriorGraph = None
    optimizer_info: dict = field(default_factory=dict)


class _RouteRunner:
    """Edge-by-edge execution in the world with incremental measurements."""

    def __init__(self, world: WorldModel, start, seed):
        self.world = world
        self.rng = np.random.default_rng(seed)
        g = world.true_graph
        if start not in g.index:
            raise MismatchError(f"start vertex {start!r} absent from world")
        p = g.position(start)
        self.route = [start]
        self.poses = [np.array([p[0], p[1], 0.0])]
        self.odometry = []
        self.loops = []
        self.first_at = {start: 0}
        self.distance = 0.0

    def _sample(self, cov):
        from .sim import NOISE_FLOOR_TRACE

        if np.trace(cov) <= NOISE_FLOOR_TRACE:
            return np.zeros(3)
        return np.linalg.cholesky(cov) @ self.rng.standard_normal(3)

    def move(self, v):
        u = self.route[-1]
        g = self.world.true_graph
        if not g.has_edge(u, v):
            raise MismatchError(f"no world edge ({u!r}, {v!r}) to traverse")
        pu, pv = g.position(u), g.position(v)
        heading = float(np.arctan2(pv[1] - pu[1], pv[0] - pu[0]))
        if len(self.poses) == 1:
            self.poses[0][2] = heading  # anchor turns toward its first motion
        pose = np.array([pv[0], pv[1], heading])
        k = len(self.poses)
        cov = 0.5 * (self.world.degeneracy(u) + self.world.degeneracy(v))
        z = between(self.poses[-1], pose) + self._sample(cov)
        z[2] = wrap_angle(z[2])
        self.odometry.append((k - 1, k, z, cov))
        self.poses.append(pose)
        if v in self.first_at:
            lcov = self.world.loop_closure_covariance
            i = self.first_at[v]
            zl = between(self.poses[i], pose) + self._sample(lcov)
            zl[2] = wrap_angle(zl[2])
            self.loops.append((i, k, zl, lcov))
        else:
            self.first_at[v] = k
        self.route.append(v)
        self.distance += g.edge_length(u, v)

    def pose_graph(self) -> SimPoseGraph:
        pg = SimPoseGraph(
            np.array(self.poses), list(self.route), list(self.odometry),
            list(self.loops)
        )
        pg.estimates = dead_reckon(pg)
        return pg


class Mission:
    """Mutable mission state; ``run()`` drives it to completion."""

    def __init__(self, prior: PriorGraph, world: WorldModel,
                 config: MissionConfig | None = None, seed: int = 0):
        self.config = config or MissionConfig()
        if self.config.strategy not in STRATEGIES:
            raise InputError(f"unknown strategy {self.config.strategy!r}")
        world.check_prior(prior)
        self.world = world
        self.prior = prior.copy()
        self.seed = seed
        self.runner = _RouteRunner(world, self.prior.start, seed)
        self.current = self.prior.start
        self.visited = {self.current}
        self.performed = []  # (anchor, target, gamma) of executed loop actions
        self.steps = deque()
        self.log = MissionLog(seed=seed, strategy=self.config.strategy)
        self._closure = None
        self._subpath_revision = self.prior.revision

    # -- bookkeeping ----------------------------------------------------

    def closure(self):
        if self._closure is None or not self._closure.fresh():
            self._closure = metric_closure(self.prior)
        return self._closure

    def _emit(self, event, **fields):
        rec = {"event": event}
        rec.update(fields)
        self.log.events.append(rec)

    def _load_program(self, plan):
        self.steps = deque()
        by_pos = {}
        for a in plan.actions:
            by_pos.setdefault(a.position, []).append(a)
        for idx, v in enumerate(plan.tsp_walk.vertices):
            if idx > 0:
                self.steps.append(("visit", v))
            for a in by_pos.get(idx, ()):
                self.steps.append(("loop", a))

    # -- online prior updates -------------------------------------------

    def degeneracy_update(self, vertex):
        """Refresh region matrices from nearby pose-graph edge covariances.

        The covered vertex averages its nearest edges; vertices not yet
        visited fall back to the average over all edges.  Edge covariances
        then track their endpoint regions.  No-ops (value already current)
        emit no event and leave the revision untouched.
        """
        edges = self.runner.odometry + self.runner.loops
        if not edges:
            return
        route = self.runner.route
        mids = np.array([
            0.5 * (self.prior.position(route[i]) + self.prior.position(route[j]))
            for i, j, _, _ in edges
        ])
        covs = np.stack([c for _, _, _, c in edges])
        target = self.prior.position(vertex)
        d2 = np.sum((mids - target) ** 2, axis=1)
        take = np.argsort(d2, kind="stable")[: self.config.degeneracy_window]
        changed = self._set_region(vertex, covs[take].mean(axis=0))
        overall = covs.mean(axis=0)
        for v in self.prior.ids:
            if v not in self.visited:
                changed |= self._set_region(v, overall)
        for u, v, _ in self.prior.edges:
            mean = 0.5 * (self.prior.region_cov[u] + self.prior.region_cov[v])
            if not np.allclose(self.prior.edge_cov(u, v), mean, atol=1e-15):
                self.prior.set_edge_cov(u, v, mean)
                changed = True
        if changed:
            self._emit("degeneracy_update", vertex=vertex)

    def _set_region(self, vertex, mat) -> bool:
        if np.allclose(self.prior.region_cov[vertex], mat, atol=1e-15):
            return False
        self.prior.set_region_cov(vertex, mat)
        return True

    def connectivity_update(self):
        """Reveal hidden world edges whose endpoints are both visited."""
        added = []
        for u, v, length in self.world.hidden_edges(self.prior):
            if u in self.visited and v in self.visited:
                cov = 0.5 * (self.prior.region_cov[u] + self.prior.region_cov[v])
                self.prior.add_edge(u, v, length=length, cov=cov)
                added.append([u, v])
        if added:
            self._emit("connectivity_update", edges=added)
        return added

    # -- movement -------------------------------------------------------

    def _arrive(self, v):
        if v not in self.visited:
            self.visited.add(v)
            self._emit("visit", vertex=v)
            self.degeneracy_update(v)
            self.connectivity_update()

    def _goto(self, v):
        """Move along the current shortest path; covers en-route vertices."""
        if v == self.current:
            return
        path = self.closure().path(self.current, v)
        for nxt in path[1:]:
            self.runner.move(nxt)
            self.current = nxt
            self._arrive(nxt)

    # -- replanning and sub-path fix-up ---------------------------------

    def _project_remaining(self, steps, closure):
        """Geometric projection of a step list from the current vertex.

        Returns (vertex sequence, length, loop factors).  Visited goals
        are dropped, matching the skip rule; loop steps expand to
        anchor -> target -> anchor under the current closure.
        """
        seq = [self.current]
        length = 0.0
        factors = []
        cur = self.current
        for kind, arg in steps:
            if kind == "visit":
                if arg in self.visited or arg == cur:
                    continue
                seq.extend(closure.path(cur, arg)[1:])
                length += closure.dist(cur, arg)
                cur = arg
            else:
                if cur != arg.anchor:
                    seq.extend(closure.path(cur, arg.anchor)[1:])
                    length += closure.dist(cur, arg.anchor)
                    cur = arg.anchor
                seq.extend(closure.path(cur, arg.target)[1:])
                seq.extend(closure.path(arg.target, cur)[1:])
                length += 2.0 * closure.dist(cur, arg.target)
                factors.append((arg.anchor, arg.target, arg.gamma))
        return seq, length, factors

    def _combined_log_dopt(self, extra_seq, extra_factors):
        """log D-opt of the abstracted Laplacian over executed + projected
        coverage, including performed and pending loop factors."""
        seq = self.runner.route + list(extra_seq[1:])
        pose_of = {}
        for v in seq:
            if v not in pose_of:
                pose_of[v] = len(pose_of)
        n = len(pose_of) - 1
        if n == 0:
            return 0.0
        seen = set()
        factors = []
        for u, v in zip(seq[:-1], seq[1:]):
            i, j = pose_of[u], pose_of[v]
            if i < j:
                i, j = j, i
            if (i, j) in seen:
                continue
            seen.add((i, j))
            factors.append((i, j, information_weight(self.prior.edge_cov(u, v))))
        for anchor, target, gamma in list(self.performed) + list(extra_factors):
            i, j = pose_of[anchor], pose_of[target]
            if i < j:
                i, j = j, i
            factors.append((i, j, gamma))
        lap = build_reduced_laplacian(n, factors)
        sign, logdet = np.linalg.slogdet(lap)
        if sign <= 0:
            return -np.inf
        return float(logdet / n)

    def _remaining_score(self, steps, closure, plan=None):
        """Remaining-quality-per-meter score used to pick between plans."""
        if plan is None:
            seq, length, factors = self._project_remaining(steps, closure)
        else:
            seq = plan.walk.vertices
            length = plan.walk.length
            factors = [(a.anchor, a.target, a.gamma) for a in plan.actions]
        log_dopt = self._combined_log_dopt(seq, factors)
        total = self.runner.distance + length
        if total <= 0.0:
            return log_dopt
        return log_dopt - float(np.log(total))

    def replan(self):
        """Re-run the planner over unvisited vertices; keep the better of
        the fresh plan and the existing remainder (ties keep existing)."""
        closure = self.closure()
        unvisited = [v for v in self.prior.ids if v not in self.visited]
        if not unvisited:
            self._emit("replan_rejected", reason="complete")
            return None
        outcome = compute_plan(
            self.prior,
            strategy=self.config.strategy,
            pruning=self.config.pruning,
            restarts=self.config.restarts,
            closure=closure,
            include=set(unvisited),
            start=self.current,
        )
        existing = self._remaining_score(list(self.steps), closure)
        fresh = self._remaining_score(None, closure, plan=outcome.plan)
        if fresh > existing + _SCORE_TIE:
            self._load_program(outcome.plan)
            self.log.plans.append(outcome.plan)
            self._subpath_revision = self.prior.revision
            self._emit("replan_accepted", score=fresh, previous=existing)
            return outcome.plan
        self._emit("replan_rejected", score=fresh, previous=existing)
        return None

    def optimize_subpath(self):
        """Re-solve the segment up to the next loop anchor as a small TSP;
        adopt the new order only if strictly shorter."""
        closure = self.closure()
        prefix = []
        loop_step = None
        for kind, arg in self.steps:
            if kind == "loop":
                loop_step = arg
                break
            prefix.append(arg)
        goals = []
        for v in prefix:
            if v not in self.visited and v not in goals and v != self.current:
                goals.append(v)
        end = loop_step.anchor if loop_step is not None else None
        pool = set(goals) | {self.current}
        if end is not None:
            pool.add(end)
        if len(pool) < 3 or (end is not None and len(pool - {self.current, end}) == 0):
            return False
        costs = TourCosts(closure, include=pool, start=self.current)
        old_order = [self.current] + [v for v in goals if v != end]
        if end is not None:
            old_order.append(end)
        old_len = sum(
            closure.dist(a, b) for a, b in zip(old_order[:-1], old_order[1:])
        )
        if end is None:
            tour = solve_open_tsp(costs, self.config.restarts)
        else:
            tour = solve_fixed_end_tsp(costs, end, self.config.restarts)
        if tour.length < old_len - _SCORE_TIE:
            rebuilt = deque(("visit", v) for v in tour.order[1:])
            drop = len(prefix) + (0 if loop_step is None else 1)
            rest = list(self.steps)[drop:]
            if loop_step is not None:
                rebuilt.append(("loop", loop_step))
            rebuilt.extend(rest)
            self.steps = rebuilt
            self._emit("subpath_optimized", saved=old_len - tour.length)
            return True
        return False

    # -- main loop ------------------------------------------------------

    def run(self):
        closure = self.closure()
        outcome = compute_plan(
            self.prior,
            strategy=self.config.strategy,
            pruning=self.config.pruning,
            restarts=self.config.restarts,
            closure=closure,
        )
        self.log.plans.append(outcome.plan)
        self._load_program(outcome.plan)
        self._emit("visit", vertex=self.current)
        self._subpath_revision = self.prior.revision
        while self.steps:
            if (
                self.config.subpath_optimization
                and self.prior.revision != self._subpath_revision
            ):
                self._subpath_revision = self.prior.revision
                self.optimize_subpath()
            kind, arg = self.steps.popleft()
            if kind == "visit":
                if arg in self.visited:
                    if arg != self.current:
                        self._emit("skip", vertex=arg)
                    continue
                self._goto(arg)
            else:
                self._goto(arg.anchor)
                one_way = self.closure().dist(self.current, arg.target)
                self._goto(arg.target)
                self._goto(arg.anchor)
                self.performed.append((arg.anchor, arg.target, arg.gamma))
                self._emit(
                    "loop_close",
                    anchor=arg.anchor,
                    target=arg.target,
                    distance=one_way,
                    omega_planned=arg.omega,
                )
                if self.config.replanning:
                    self.replan()
        return self.finish()

    def finish(self):
        pg = self.runner.pose_graph()
        info = optimize_pose_graph(
            pg, self.config.optimizer_max_iters, self.config.optimizer_tol
        )
        self.log.pose_graph = pg
        self.log.prior = self.prior
        self.log.optimizer_info = info
        metrics = MissionMetrics(
            ape_rmse=ape_rmse(pg.estimates, pg.poses_true),
            total_distance=self.runner.distance,
            pose_count=pg.pose_count,
            mean_degree=pg.mean_degree(),
            dopt_predicted=float(np.exp(self._combined_log_dopt([self.current], []))),
            dopt_fim=float(np.exp(log_dopt_fim(pg, self.config.fim_half))),
            assumption_ok=all(p.assumption_ok for p in self.log.plans),
        )
        return self.log, metrics


def run_mission(prior: PriorGraph, world: WorldModel,
                config: MissionConfig | None = None, seed: int = 0):
    """Plan, execute, update online, and score one exploration mission."""
    return Mission(prior, world, config, seed).run()
