"""Local refinement of a planned arm path by feasible descent on the path cost.

The coarse path is resampled to a fixed number of waypoints.  Interior
waypoints then follow a normalised central-difference gradient, smoothed
along the path, with backtracking.  A step is kept only if every waypoint and every interpolated
edge state stays valid and neither the position length nor the orientation
length grows, so the result is never worse than its input on either metric.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .geometry import relative_angle
from .model import HumanArmModel, human_chain
from .planner import densify, path_lengths, valid_mask
from .statics import solve_reactions

log = logging.getLogger(__name__)

_MIN_STEP = 1e-7


@dataclass
class RefinedTrajectory:
    waypoints: np.ndarray                   # (n_waypoints, 5)
    cost: float
    reactions: list
    position_length: float
    orientation_length: float
    coarse_position_length: float
    coarse_orientation_length: float
    metadata: dict = field(default_factory=dict)

    @property
    def coarse_cost(self) -> float:
        return self.metadata["coarse_cost"]


def resample(waypoints, n: int) -> np.ndarray:
    """``n`` states on the polyline through ``waypoints`` (joint-space arc length).

    Corners of the polyline are kept whenever ``n`` allows it, so the resampled
    path traces the same joint-space curve.
    """
    w = np.asarray(waypoints, dtype=float)
    seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 0])
    w, seg = w[keep], seg[seg > 0]
    if len(w) == 1:
        return np.repeat(w, n, axis=0)
    # merge collinear segments so only true corners are pinned
    corners = [0]
    for i in range(1, len(w) - 1):
        u, v = w[i] - w[i - 1], w[i + 1] - w[i]
        if u @ v < (1.0 - 1e-10) * np.linalg.norm(u) * np.linalg.norm(v):
            corners.append(i)
    corners.append(len(w) - 1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    knots = s[corners]
    if len(corners) <= n:
        pieces = np.diff(knots)
        counts = np.ones(len(pieces), dtype=int)
        spare = n - 1 - counts.sum()
        for _ in range(spare):
            counts[np.argmax(pieces / counts)] += 1
        targets = np.concatenate([np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(knots[:-1], knots[1:], counts)]
                                 + [[s[-1]]])
    else:
        targets = np.linspace(0.0, s[-1], n)
    out = np.column_stack([np.interp(targets, s, w[:, j]) for j in range(w.shape[1])])
    out[0], out[-1] = w[0], w[-1]
    return out


def path_valid(scenario, waypoints) -> bool:
    """All waypoints and interpolated edge states are valid."""
    return bool(valid_mask(scenario, densify(waypoints, scenario.edge_resolution)).all())


def _local_lengths(model, prev, mid, nxt):
    """Position and orientation lengths of the two segments around ``mid``."""
    ca, cb, cc = human_chain(model, prev), human_chain(model, mid), human_chain(model, nxt)
    dp = np.linalg.norm(cb.grasp - ca.grasp, axis=1) + np.linalg.norm(cc.grasp - cb.grasp, axis=1)
    da = relative_angle(cb.R_grasp, ca.R_grasp) + relative_angle(cc.R_grasp, cb.R_grasp)
    return dp, da


def finite_diff_gradients(model: HumanArmModel, waypoints, h: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradients of the position and orientation lengths.

    Returns two (T, 5) arrays; rows for the endpoints are zero.  Only the two
    segments adjacent to a waypoint depend on it, so each perturbation is
    priced locally.
    """
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    w = np.asarray(waypoints, dtype=float)
    T, d = w.shape
    gp, go = np.zeros((T, d)), np.zeros((T, d))
    if T < 3:
        return gp, go
    inner = np.arange(1, T - 1)
    step = np.repeat(np.eye(d)[None], len(inner), axis=0) * h     # (m, d, d)
    mid = w[inner][:, None, :] + np.concatenate([step, -step], axis=1)   # (m, 2d, d)
    prev = np.repeat(w[inner - 1][:, None, :], 2 * d, axis=1)
    nxt = np.repeat(w[inner + 1][:, None, :], 2 * d, axis=1)
    dp, da = _local_lengths(model, prev.reshape(-1, d), mid.reshape(-1, d), nxt.reshape(-1, d))
    dp, da = dp.reshape(len(inner), 2 * d), da.reshape(len(inner), 2 * d)
    gp[inner] = (dp[:, :d] - dp[:, d:]) / (2 * h)
    go[inner] = (da[:, :d] - da[:, d:]) / (2 * h)
    return gp, go


def finite_diff_gradient(model: HumanArmModel, waypoints, c_p: float = 1.0, c_o: float = 1.0,
                         h: float = 1e-6) -> np.ndarray:
    """(T, 5) central-difference gradient of the path cost; endpoint rows are zero."""
    gp, go = finite_diff_gradients(model, waypoints, h)
    return c_p * gp + c_o * go


def smooth_direction(g) -> np.ndarray:
    """Gradient preconditioned by the inverse second-difference matrix over interior waypoints.

    Neighbouring waypoints move together, which removes the slow zig-zag
    convergence of plain gradient steps on long paths.
    """
    g = np.asarray(g, dtype=float)
    out = np.zeros_like(g)
    m = len(g) - 2
    if m < 1:
        return out
    ab = np.zeros((3, m))
    ab[0, 1:], ab[1], ab[2, :-1] = -1.0, 2.0, -1.0
    out[1:-1] = solve_banded((1, 1), ab, g[1:-1])
    return out


def _clip(scenario, w):
    lo, hi = scenario.human.joint_limits.T
    return np.clip(w, lo, hi)


def refine(scenario, path, *, max_iterations: int | None = None, time_budget_s: float | None = None
           ) -> RefinedTrajectory:
    """Shorten a valid path while keeping it valid.

    ``path`` is a HumanPath or a (T, 5) array.  The run stops after
    ``max_iterations`` (default ``scenario.refine.max_iterations``), when the
    time budget is spent, or when the relative cost improvement over the last
    ``stall_iterations`` iterations falls below ``stall_tolerance``.
    """
    t0 = time.perf_counter()
    cfg = scenario.refine
    max_iterations = cfg.max_iterations if max_iterations is None else int(max_iterations)
    budget = scenario.time_budget_s if time_budget_s is None else time_budget_s
    model, c_p, c_o = scenario.human, scenario.c_p, scenario.c_o
    coarse = np.asarray(getattr(path, "waypoints", path), dtype=float)
    w = resample(coarse, scenario.n_waypoints)
    resampled_valid = path_valid(scenario, w)
    if not resampled_valid:
        log.warning("resampled path fails validity; refinement keeps it unchanged")
    P, O = path_lengths(model, w)
    coarse_p, coarse_o = P, O
    cost = c_p * P + c_o * O
    history = [cost]
    step = 4 * scenario.edge_resolution
    it = accepted = 0
    stop = "max_iterations"
    while resampled_valid and it < max_iterations:
        if time.perf_counter() - t0 > budget:
            stop = "time_budget"
            break
        it += 1
        gp, go = finite_diff_gradients(model, w, cfg.fd_step)
        moved = False
        total = c_p * gp + c_o * go
        for g in (smooth_direction(total), total, gp, go):
            peak = np.max(np.abs(g))
            if not peak > 0:
                continue
            direction = -g / peak
            a = step
            while a >= _MIN_STEP:
                cand = _clip(scenario, w + a * direction)
                cand[0], cand[-1] = w[0], w[-1]
                p, o = path_lengths(model, cand)
                c = c_p * p + c_o * o
                if p <= P and o <= O and c < cost and path_valid(scenario, cand):
                    w, P, O, cost = cand, p, o, c
                    moved = True
                    break
                a *= 0.5
            if moved:
                step = min(2 * a, 4 * scenario.edge_resolution)
                break
        history.append(cost)
        if not moved:
            stop = "no_descent"
            break
        accepted += 1
        if len(history) > cfg.stall_iterations:
            old = history[-1 - cfg.stall_iterations]
            if old - cost <= cfg.stall_tolerance * max(abs(old), 1e-12):
                stop = "stalled"
                break
    reactions = [solve_reactions(model, th, scenario.gravity, scenario.closure) for th in w]
    meta = dict(run_time=time.perf_counter() - t0, iterations=it, accepted=accepted, stop=stop,
                coarse_cost=c_p * coarse_p + c_o * coarse_o, cost_history=history,
                resampled_valid=resampled_valid)
    return RefinedTrajectory(w, cost, reactions, P, O, coarse_p, coarse_o, meta)
