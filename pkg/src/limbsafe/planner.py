"""Anytime batch-sampling planner over the human joint space.

The planner grows a roadmap in batches of uniform samples (with a small goal
bias).  Each batch is connected to its k nearest neighbours and searched with
lazy A*: an edge is first weighted by the grasp-pose distance between its end
points, which never exceeds its true cost, and is only checked and priced
densely once it lies on a candidate shortest path.  Samples that cannot beat
the incumbent (informed pruning) are dropped.  The result is deterministic
for a given seed and batch count.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .collision import interpolate, state_free_batch
from .errors import InvalidEndpoint, NoPathFound
from .geometry import relative_angle
from .model import HumanArmModel, human_chain
from .statics import safety_margins, solve_batch

log = logging.getLogger(__name__)


@dataclass
class HumanPath:
    waypoints: np.ndarray                       # (T, 5)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.waypoints)


def valid_mask(scenario, thetas) -> np.ndarray:
    """(N,) validity of arm configurations: limits, collision and statics safety."""
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    ok = scenario.human.within_limits(th) & np.isfinite(th).all(axis=1)
    if ok.any():
        idx = np.flatnonzero(ok)
        free = state_free_batch(scenario, th[idx])
        idx = idx[free]
        ok[:] = False
        if idx.size:
            x, _ = solve_batch(scenario.human, th[idx], scenario.gravity, scenario.closure)
            safe = np.isfinite(x).all(axis=1)
            safe[safe] = (safety_margins(x[safe], scenario.safety) > 0).all(axis=1)
            ok[idx[safe]] = True
    return ok


def is_valid(scenario, theta) -> bool:
    return bool(valid_mask(scenario, theta)[0])


def invalid_reason(scenario, theta) -> str | None:
    """Why ``theta`` fails validity, or None when it is valid."""
    th = np.atleast_2d(np.asarray(theta, dtype=float))
    if not scenario.human.within_limits(th)[0]:
        return "outside joint limits"
    if not state_free_batch(scenario, th)[0]:
        return "in collision"
    x, cond = solve_batch(scenario.human, th, scenario.gravity, scenario.closure)
    if not np.isfinite(x).all():
        return f"statics singular (condition number {cond[0]:.3g})"
    if not (safety_margins(x, scenario.safety) > 0).all():
        return "reaction forces exceed the safety limits"
    return None


def edge_valid(scenario, a, b) -> bool:
    """Validity of the interior states of the straight joint-space edge a -> b."""
    states = interpolate(a, b, scenario.edge_resolution)[1:-1]
    return len(states) == 0 or bool(valid_mask(scenario, states).all())


def densify(waypoints, max_step: float) -> np.ndarray:
    """Insert interpolated states so no joint moves more than ``max_step`` between rows."""
    waypoints = np.asarray(waypoints, dtype=float)
    rows = [waypoints[:1]]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        rows.append(interpolate(a, b, max_step)[1:])
    return np.vstack(rows)


def pose_path_cost(positions, rotations, c_p: float = 1.0, c_o: float = 1.0) -> float:
    """Cost of a sequence of grasp frames: (T, 3) positions and (T, 3, 3) rotations."""
    positions, rotations = np.asarray(positions, dtype=float), np.asarray(rotations, dtype=float)
    dp = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    da = relative_angle(rotations[1:], rotations[:-1])
    return float(c_p * dp.sum() + c_o * da.sum())


def segment_lengths(model: HumanArmModel, waypoints) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment grasp translation (m) and rotation angle (rad)."""
    ch = human_chain(model, waypoints)
    dp = np.linalg.norm(np.diff(ch.grasp, axis=0), axis=1)
    da = relative_angle(ch.R_grasp[1:], ch.R_grasp[:-1])
    return dp, da


def path_lengths(model: HumanArmModel, waypoints) -> tuple[float, float]:
    """Total grasp position length (m) and orientation length (rad) of a path."""
    dp, da = segment_lengths(model, waypoints)
    return float(dp.sum()), float(da.sum())


def path_cost(model: HumanArmModel, path, c_p: float = 1.0, c_o: float = 1.0) -> float:
    """Weighted sum of grasp translation and rotation along consecutive waypoints."""
    path = np.asarray(getattr(path, "waypoints", path), dtype=float)
    if len(path) < 2:
        raise ValueError("path_cost needs at least two waypoints")
    p, o = path_lengths(model, path)
    return c_p * p + c_o * o


class _Roadmap:
    """Nodes with cached grasp poses plus lazily evaluated edges."""

    def __init__(self, scenario, start, goal):
        self.sc = scenario
        self.thetas = np.array([start, goal])
        ch = human_chain(scenario.human, self.thetas)
        self.pos, self.rot = ch.grasp, ch.R_grasp
        self.graph = nx.Graph()
        self.graph.add_nodes_from([0, 1])
        self.cost = {}       # evaluated dense edge costs
        self.checks = 0

    def add(self, thetas):
        ch = human_chain(self.sc.human, thetas)
        first = len(self.thetas)
        self.thetas = np.vstack([self.thetas, thetas])
        self.pos = np.vstack([self.pos, ch.grasp])
        self.rot = np.concatenate([self.rot, ch.R_grasp])
        self.graph.add_nodes_from(range(first, len(self.thetas)))

    def bound(self, u, v) -> float:
        """Grasp-pose distance; a lower bound on the dense cost of any u -> v path."""
        dp = np.linalg.norm(self.pos[u] - self.pos[v])
        da = relative_angle(self.rot[u], self.rot[v])
        return float(self.sc.c_p * dp + self.sc.c_o * da)

    def bounds_to(self, v, nodes) -> np.ndarray:
        dp = np.linalg.norm(self.pos[nodes] - self.pos[v], axis=1)
        da = relative_angle(self.rot[nodes], self.rot[v])
        return self.sc.c_p * dp + self.sc.c_o * da

    def connect(self, k: int):
        nodes = np.array(sorted(self.graph.nodes))
        tree = cKDTree(self.thetas[nodes])
        k = min(k + 1, len(nodes))
        _, nn = tree.query(self.thetas[nodes], k=k)
        for i, row in zip(nodes, nn.reshape(len(nodes), -1)):
            for j in nodes[row[1:]]:
                e = (min(i, j), max(i, j))
                if e not in self.cost:
                    self.graph.add_edge(*e)
        if (0, 1) not in self.cost:
            self.graph.add_edge(0, 1)

    def weight(self, u, v, _data):
        e = (min(u, v), max(u, v))
        return self.cost[e] if e in self.cost else self.bound(u, v)

    def evaluate(self, u, v) -> bool:
        """Check and price an edge; invalid edges are removed from the graph."""
        e = (min(u, v), max(u, v))
        if e in self.cost:
            return True
        self.checks += 1
        a, b = self.thetas[u], self.thetas[v]
        if not edge_valid(self.sc, a, b):
            self.graph.remove_edge(u, v)
            self.cost[e] = math.inf
            return False
        dense = interpolate(a, b, self.sc.edge_resolution)
        self.cost[e] = path_cost(self.sc.human, dense, self.sc.c_p, self.sc.c_o)
        return True

    def search(self):
        """Lazy A*: shortest path whose edges have all been evaluated, or None."""
        h = lambda n, _goal: self.bound(n, 1)  # noqa: E731
        while True:
            try:
                nodes = nx.astar_path(self.graph, 0, 1, heuristic=h, weight=self.weight)
            except nx.NetworkXNoPath:
                return None, math.inf
            fresh = [(u, v) for u, v in zip(nodes[:-1], nodes[1:]) if (min(u, v), max(u, v)) not in self.cost]
            if not fresh:
                return nodes, sum(self.cost[(min(u, v), max(u, v))] for u, v in zip(nodes[:-1], nodes[1:]))
            for u, v in fresh:
                if not self.evaluate(u, v):
                    break

    def prune(self, best: float):
        """Drop nodes that cannot lie on a path cheaper than ``best``."""
        nodes = np.array([n for n in sorted(self.graph.nodes) if n > 1])
        if best == math.inf or not len(nodes):
            return
        f = self.bounds_to(0, nodes) + self.bounds_to(1, nodes)
        self.graph.remove_nodes_from(nodes[f >= best].tolist())


def _sample(scenario, rng, n) -> np.ndarray:
    lo, hi = scenario.human.joint_limits.T
    out = rng.uniform(lo, hi, size=(n, 5))
    biased = rng.random(n) < scenario.planner.goal_bias
    goal = scenario.theta_goal + scenario.planner.goal_sigma * rng.standard_normal((n, 5))
    out[biased] = np.clip(goal[biased], lo, hi)
    return out


def _informed(rm: _Roadmap, thetas) -> np.ndarray:
    """Lower bound on the cost of a start-goal path through each of ``thetas``."""
    ch = human_chain(rm.sc.human, thetas)
    out = np.zeros(len(thetas))
    for n in (0, 1):
        dp = np.linalg.norm(ch.grasp - rm.pos[n], axis=1)
        da = relative_angle(ch.R_grasp, rm.rot[n])
        out += rm.sc.c_p * dp + rm.sc.c_o * da
    return out


def _neighbour_count(n: int, dim: int = 5) -> int:
    return max(1, int(math.ceil(math.e * (1.0 + 1.0 / dim) * math.log(max(n, 2)))))


def plan(scenario, *, batches: int | None = None, rng=None) -> HumanPath:
    """Plan a valid joint-space path from ``theta_start`` to ``theta_goal``.

    Stops after ``batches`` sample batches (default ``scenario.planner.batches``),
    at the time budget, or once the incumbent matches the start-goal lower bound.
    ``waypoints`` of the result are densified to the edge resolution.
    """
    t0 = time.perf_counter()
    start, goal = scenario.theta_start, scenario.theta_goal
    for which, th in (("theta_start", start), ("theta_goal", goal)):
        reason = invalid_reason(scenario, th)
        if reason:
            raise InvalidEndpoint(which, reason)
    if np.array_equal(start, goal):
        return HumanPath(np.array([start, goal]), dict(run_time=time.perf_counter() - t0, iterations=0,
                                                       cost=0.0, batch_costs=[0.0], nodes=2))
    cfg = scenario.planner
    batches = cfg.batches if batches is None else int(batches)
    rng = np.random.default_rng(scenario.rng_seed) if rng is None else rng
    rm = _Roadmap(scenario, start, goal)
    floor = rm.bound(0, 1)
    best_nodes, best = None, math.inf
    batch_costs = []
    it = 0
    for it in range(batches + 1):
        if it > 0:
            cand = _sample(scenario, rng, cfg.batch_size)
            cand = cand[valid_mask(scenario, cand)]
            if best < math.inf and len(cand):
                cand = cand[_informed(rm, cand) < best]
            if len(cand):
                rm.add(cand)
        rm.connect(_neighbour_count(rm.graph.number_of_nodes()))
        nodes, cost = rm.search()
        if cost < best:
            best_nodes, best = nodes, cost
            rm.prune(best)
        batch_costs.append(best)
        log.debug("batch %d: %d nodes, best cost %.6g", it, rm.graph.number_of_nodes(), best)
        if best <= floor + 1e-12 or time.perf_counter() - t0 > scenario.time_budget_s:
            break
    if best_nodes is None:
        raise NoPathFound(f"no path found after {it} batches ({rm.graph.number_of_nodes()} nodes, "
                          f"{rm.checks} edge checks)")
    waypoints = densify(rm.thetas[best_nodes], scenario.edge_resolution)
    waypoints[0], waypoints[-1] = start, goal
    meta = dict(run_time=time.perf_counter() - t0, iterations=it, cost=path_cost(
        scenario.human, waypoints, scenario.c_p, scenario.c_o), batch_costs=batch_costs,
        nodes=rm.graph.number_of_nodes(), edge_checks=rm.checks, corners=rm.thetas[best_nodes])
    return HumanPath(waypoints, meta)
