"""Instance generation and benchmark harnesses.

Random grid-like graphs: a rectangular lattice loses a fraction of its
vertices and edges (resampled until connected), then vertex positions get
Gaussian jitter.  The pruning benchmark runs the greedy loop selection
twice, with and without candidate filtering, checks the selections agree,
and reports survivor counts and wall-clock times.  The strategy benchmark
runs paired missions per seed and summarizes the error/distance tradeoff.
"""

from __future__ import annotations

import io
import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, MismatchError
from .graph import PriorGraph, metric_closure
from .loops import abstract_pose_graph, enumerate_candidates, greedy_select
from .mission import MissionConfig, run_mission
from .planner import STRATEGIES
from .sim import WorldModel
from .tsp import TourCosts, expand_to_walk, solve_open_tsp

_MAX_ATTEMPTS = 100


@dataclass
class GridGraphSpec:
    """Parameters of the random grid-like generator."""

    width: float = 10.0
    height: float = 10.0
    cell: float = 1.0
    vertex_removal: float = 0.05
    edge_removal: float = 0.05
    position_noise_sigma: float = 0.2
    seed: int = 0

    @classmethod
    def from_dict(cls, doc: dict) -> "GridGraphSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise InputError(f"unknown grid spec keys: {sorted(extra)}")
        return cls(**doc)


def gen_grid_graph(spec: GridGraphSpec) -> PriorGraph:
    """Connected jittered lattice; one vertex per cell of the footprint.

    Removal happens on the exact lattice first; positions are perturbed
    only after a connected topology is found, so the jitter never affects
    which removal sets are viable.
    """
    nx = int(round(spec.width / spec.cell))
    ny = int(round(spec.height / spec.cell))
    if nx < 2 or ny < 2:
        raise InputError(f"grid needs at least 2x2 cells, got {nx}x{ny}")
    n = nx * ny
    base_edges = []
    for j in range(ny):
        for i in range(nx):
            vid = j * nx + i
            if i + 1 < nx:
                base_edges.append((vid, vid + 1))
            if j + 1 < ny:
                base_edges.append((vid, vid + nx))
    rng = np.random.default_rng(spec.seed)
    n_vrem = int(round(spec.vertex_removal * n))
    for _ in range(_MAX_ATTEMPTS):
        removed = (
            set(rng.choice(n, size=n_vrem, replace=False).tolist())
            if n_vrem else set()
        )
        edges = [e for e in base_edges if e[0] not in removed and e[1] not in removed]
        n_erem = int(round(spec.edge_removal * len(edges)))
        if n_erem:
            drop = set(rng.choice(len(edges), size=n_erem, replace=False).tolist())
            edges = [e for k, e in enumerate(edges) if k not in drop]
        kept = [v for v in range(n) if v not in removed]
        if kept and _connected(kept, edges):
            break
    else:
        raise InputError(
            f"no connected graph after {_MAX_ATTEMPTS} removal attempts "
            f"(seed {spec.seed})"
        )
    jitter = (
        rng.normal(0.0, spec.position_noise_sigma, size=(len(kept), 2))
        if spec.position_noise_sigma > 0 else np.zeros((len(kept), 2))
    )
    vertices = []
    for k, vid in enumerate(kept):
        i, j = vid % nx, vid // nx
        vertices.append((vid, i * spec.cell + jitter[k, 0], j * spec.cell + jitter[k, 1]))
    return PriorGraph(
        vertices, [(u, v, None, None) for u, v in edges], start=kept[0]
    )


def _connected(kept, edges) -> bool:
    adj = {v: [] for v in kept}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {kept[0]}
    stack = [kept[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(kept)


# -- pruning benchmark ---------------------------------------------------


@dataclass
class PruneReport:
    """Survivor counts and runtimes of one pruned-vs-unpruned selection."""

    num_vertices: int
    num_candidates: int
    after_omega_max: int
    after_prop1: int
    ratio: float
    selected: int
    t_prune: float
    t_no_prune: float
    per_iteration: list = field(default_factory=list)

    @property
    def speedup(self) -> float:
        return self.t_no_prune / self.t_prune if self.t_prune > 0 else np.inf

    def check_monotone(self) -> bool:
        return self.after_prop1 <= self.after_omega_max <= self.num_candidates


def bench_prune(graph: PriorGraph, restarts: int = 8) -> PruneReport:
    """Run greedy selection twice and verify pruning changes nothing.

    A selection mismatch is raised as an error: the filters are meant to
    be lossless, so disagreement is a soundness bug, not a data point.
    """
    closure = metric_closure(graph)
    tour = solve_open_tsp(TourCosts(closure), restarts)
    walk = expand_to_walk(closure, tour.order)
    apg = abstract_pose_graph(walk, graph)
    cands = enumerate_candidates(apg, closure)
    t0 = time.perf_counter()
    pruned = greedy_select(apg, cands, walk, closure, pruning=True)
    t1 = time.perf_counter()
    plain = greedy_select(apg, cands, walk, closure, pruning=False)
    t2 = time.perf_counter()
    seq_pruned = [(c.i, c.j) for c in pruned.selected]
    seq_plain = [(c.i, c.j) for c in plain.selected]
    if seq_pruned != seq_plain:
        raise MismatchError(
            f"pruned selection {seq_pruned} differs from unpruned {seq_plain}"
        )
    total = len(cands)
    return PruneReport(
        num_vertices=len(graph),
        num_candidates=total,
        after_omega_max=pruned.trace.after_omega_max,
        after_prop1=pruned.trace.after_prop1,
        ratio=pruned.trace.after_prop1 / total if total else 0.0,
        selected=len(pruned.selected),
        t_prune=t1 - t0,
        t_no_prune=t2 - t1,
        per_iteration=list(pruned.trace.per_iteration),
    )


_PRUNE_COLUMNS = [
    "vertices", "candidates", "after_omega_max", "after_prop1", "ratio",
    "selected", "per_iteration", "t_prune_s", "t_no_prune_s", "speedup",
]

# Columns whose values vary run to run; determinism checks ignore them.
TIMING_COLUMNS = ("t_prune_s", "t_no_prune_s", "speedup")


def prune_report_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_PRUNE_COLUMNS)
    for r in reports:
        writer.writerow([
            r.num_vertices,
            r.num_candidates,
            r.after_omega_max,
            r.after_prop1,
            f"{r.ratio:.6f}",
            r.selected,
            "|".join(str(c) for c in r.per_iteration),
            f"{r.t_prune:.4f}",
            f"{r.t_no_prune:.4f}",
            f"{r.speedup:.2f}",
        ])
    return buf.getvalue()


# -- strategy comparison -------------------------------------------------

_COMPARE_COLUMNS = [
    "seed", "strategy", "n_pose", "k", "ape_rmse", "d_total",
    "dopt_predicted", "dopt_fim", "assumption_ok",
]


@dataclass
class ComparisonResult:
    rows: list
    summary: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_COMPARE_COLUMNS)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in _COMPARE_COLUMNS])
        writer.writerow([])
        for key in sorted(self.summary):
            writer.writerow([key, _fmt(self.summary[key])])
        return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.9g}"
    return x


def _compare_worker(args):
    prior, world, cfg, seed = args
    _, metrics = run_mission(prior, world, cfg, seed)
    return seed, cfg.strategy, metrics


def compare_strategies(prior: PriorGraph, world: WorldModel, seeds,
                       config: MissionConfig | None = None,
                       workers: int | None = None) -> ComparisonResult:
    """Paired mission runs per seed for each strategy, with summary stats.

    Instances are independent and run across a process pool by default;
    results merge by (seed, strategy) so the report never depends on
    completion order.  ``workers=1`` forces in-process execution.
    """
    seeds = sorted(seeds)
    if len(seeds) < 2:
        raise InputError("comparison needs at least 2 seeds")
    base = config or MissionConfig()
    jobs = [
        (prior, world, replace(base, strategy=strategy), seed)
        for seed in seeds
        for strategy in STRATEGIES
    ]
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_compare_worker, jobs, chunksize=1))
    else:
        results = [_compare_worker(job) for job in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    rows = []
    by_strategy = {s: {} for s in STRATEGIES}
    for seed, strategy, metrics in results:
        rows.append({
            "seed": seed,
            "strategy": strategy,
            "n_pose": metrics.pose_count,
            "k": metrics.mean_degree,
            "ape_rmse": metrics.ape_rmse,
            "d_total": metrics.total_distance,
            "dopt_predicted": metrics.dopt_predicted,
            "dopt_fim": metrics.dopt_fim,
            "assumption_ok": metrics.assumption_ok,
        })
        by_strategy[strategy][seed] = metrics
    summary = {}
    for strategy in STRATEGIES:
        apes = np.array([by_strategy[strategy][s].ape_rmse for s in seeds])
        dists = np.array([by_strategy[strategy][s].total_distance for s in seeds])
        summary[f"mean_ape_{strategy}"] = float(apes.mean())
        summary[f"std_ape_{strategy}"] = float(apes.std())
        summary[f"mean_distance_{strategy}"] = float(dists.mean())
    improved = sum(
        1 for s in seeds
        if by_strategy["slam_aware"][s].ape_rmse < by_strategy["tsp_only"][s].ape_rmse
    )
    summary["improved_seeds"] = improved
    summary["total_seeds"] = len(seeds)
    base_d = summary["mean_distance_tsp_only"]
    summary["distance_overhead"] = (
        summary["mean_distance_slam_aware"] / base_d - 1.0 if base_d > 0 else 0.0
    )
    summary["assumption_ok_all"] = all(r["assumption_ok"] for r in rows)
    return ComparisonResult(rows, summary)
