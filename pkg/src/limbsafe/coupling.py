"""Robot side of the plan: base placement, per-step IK and wrench bookkeeping."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .collision import ground, robot_clearance
from .errors import IkDiverged, IllConditioned, NoFeasibleBase, SingularConfiguration
from .geometry import Pose, orientation_error, relative_angle
from .model import RobotArmModel, base_matrix, human_chain, robot_frames, robot_reach
from .statics import ClosureModel, ReactionSolution, solve_reactions

log = logging.getLogger(__name__)

POSITION_TOL = 1e-3
ANGLE_TOL = 1e-2


@dataclass(frozen=True)
class CoupledStep:
    theta: np.ndarray
    q: np.ndarray
    grasp: Pose
    wrench: np.ndarray
    reactions: ReactionSolution


@dataclass
class CoupledTrajectory:
    steps: list
    base: np.ndarray
    samples_tried: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.steps])

    @property
    def qs(self) -> np.ndarray:
        return np.array([s.q for s in self.steps])


def _fk_and_jacobian(robot: RobotArmModel, q, base):
    frames = robot_frames(robot, q, base)
    T = frames[-1]
    p = T[:3, 3]
    J = np.empty((6, robot.n_joints))
    for i, F in enumerate(frames[1:-1]):
        z = F[:3, 2]
        J[:3, i] = np.cross(z, p - F[:3, 3])
        J[3:, i] = z
    return T, J


def pose_error(T_target, T) -> tuple[np.ndarray, np.ndarray]:
    return T_target[:3, 3] - T[:3, 3], orientation_error(T_target[:3, :3], T[:3, :3])


def _dls_step(J, e, lam, free):
    Jf = J * free
    return Jf.T @ np.linalg.solve(Jf @ Jf.T + lam ** 2 * np.eye(6), e)


def ik_solve(robot: RobotArmModel, base, target: Pose, q_init, *, max_iterations: int = 200,
             damping: float = 0.02, pos_tol: float = 1e-7, ori_tol: float = 1e-6,
             max_step: float = 0.25, centering: float = 0.05) -> np.ndarray:
    """Damped least-squares IK for the tool frame within the joint limits.

    The damping starts at ``damping`` and adapts (halved after an improving
    step, quadrupled after a failed one).  Joints pinned at a limit and pushed
    outwards are frozen for that step, and redundant joints drift towards the
    middle of their range in the Jacobian null space until the
    error is small.
    Raises IkDiverged when the tolerance is not met within ``max_iterations``.
    """
    T_target = target.matrix() if isinstance(target, Pose) else np.asarray(target, dtype=float)
    lo, hi = robot.joint_limits.T
    mid, span = 0.5 * (lo + hi), hi - lo
    q = np.clip(np.asarray(q_init, dtype=float), lo, hi)
    T, J = _fk_and_jacobian(robot, q, base)
    e_p, e_o = pose_error(T_target, T)
    err = np.linalg.norm(np.concatenate([e_p, e_o]))
    lam = damping
    for _ in range(max_iterations):
        if np.linalg.norm(e_p) < pos_tol and np.linalg.norm(e_o) < ori_tol:
            return q
        e = np.concatenate([e_p, e_o])
        free = np.ones(robot.n_joints)
        for _ in range(2):
            dq = _dls_step(J, e, lam, free)
            pinned = ((q <= lo) & (dq < 0)) | ((q >= hi) & (dq > 0))
            if not pinned.any():
                break
            free[pinned] = 0.0
        if centering > 0 and err > 1e-3:
            Jf = J * free
            null = (np.eye(robot.n_joints) - np.linalg.pinv(Jf, rcond=1e-6) @ Jf) * free
            dq += null @ (centering * (mid - q) / span ** 2 * span.mean())
        peak = np.max(np.abs(dq))
        if peak > max_step:
            dq *= max_step / peak
        q_new = np.clip(q + dq, lo, hi)
        T_new, J_new = _fk_and_jacobian(robot, q_new, base)
        ep_new, eo_new = pose_error(T_target, T_new)
        err_new = np.linalg.norm(np.concatenate([ep_new, eo_new]))
        if err_new < err:
            q, J, e_p, e_o, err = q_new, J_new, ep_new, eo_new, err_new
            lam = max(0.5 * lam, 1e-6)
        else:
            lam = min(4.0 * lam, 10.0)
    if np.linalg.norm(e_p) < pos_tol and np.linalg.norm(e_o) < ori_tol:
        return q
    raise IkDiverged(f"IK did not converge in {max_iterations} iterations "
                     f"(position error {np.linalg.norm(e_p):.3g} m, angle error {np.linalg.norm(e_o):.3g} rad)")


def grasp_targets(scenario, thetas) -> np.ndarray:
    """(T, 4, 4) human grasp frames."""
    ch = human_chain(scenario.human, thetas)
    T = np.zeros((len(ch.grasp), 4, 4))
    T[:, :3, :3] = ch.R_grasp
    T[:, :3, 3] = ch.grasp
    T[:, 3, 3] = 1.0
    return T


def track_trajectory(scenario, base, thetas, targets=None, rng=None) -> np.ndarray | None:
    """Robot joint trajectory following ``targets`` from ``base``, or None if infeasible.

    The first step is solved from ``q_home`` and from random restarts; each
    converged, collision-free solution is then tracked step by step, warm
    starting from the previous step and rejecting joint jumps of
    ``max_joint_step`` or more.
    """
    robot, cfg = scenario.robot, scenario.coupling
    targets = grasp_targets(scenario, thetas) if targets is None else targets
    origin = base_matrix(base)[:3, 3]
    if np.max(np.linalg.norm(targets[:, :3, 3] - origin, axis=1)) > robot_reach(robot):
        return None
    seeds = [robot.q_home]
    if rng is not None:
        lo, hi = robot.joint_limits.T
        seeds += [rng.uniform(lo, hi) for _ in range(cfg.first_step_restarts)]
    env, floor = scenario.obstacles, ground(scenario.ground_height)

    def collision_free(q, theta):
        if not cfg.check_robot_collision:
            return True
        return robot_clearance(robot, q, base, scenario.human, theta, env, floor) > scenario.collision_margin

    def follow(q_prev):
        qs = [q_prev]
        for i in range(1, len(targets)):
            try:
                q = ik_solve(robot, base, targets[i], q_prev, max_iterations=cfg.ik_max_iterations)
            except IkDiverged:
                return None
            if np.max(np.abs(q - q_prev)) >= cfg.max_joint_step or not collision_free(q, thetas[i]):
                return None
            qs.append(q)
            q_prev = q
        return np.array(qs)

    for seed in seeds:
        try:
            q0 = ik_solve(robot, base, targets[0], seed, max_iterations=cfg.ik_max_iterations)
        except IkDiverged:
            continue
        if collision_free(q0, thetas[0]):
            qs = follow(q0)
            if qs is not None:
                return qs
    return None


def sample_base_pose(scenario, human_traj, rng=None) -> tuple[np.ndarray, CoupledTrajectory]:
    """Rejection-sample a robot base pose from N(mean, diag(cov)) that admits IK at every step.

    ``human_traj`` is a (T, 5) array of arm configurations or an object with a
    ``waypoints`` attribute.  The first accepted sample is returned.
    """
    thetas = np.asarray(getattr(human_traj, "waypoints", human_traj), dtype=float)
    rng = np.random.default_rng(scenario.rng_seed) if rng is None else rng
    targets = grasp_targets(scenario, thetas)
    std = np.sqrt(scenario.base_pose_cov_diag)
    for k in range(1, scenario.coupling.max_samples + 1):
        base = rng.normal(scenario.base_pose_mean, std)
        qs = track_trajectory(scenario, base, thetas, targets, rng)
        if qs is None:
            continue
        log.debug("base pose accepted after %d samples", k)
        coupled = build_coupled(scenario, thetas, qs, base, targets)
        coupled.samples_tried = k
        return base, coupled
    raise NoFeasibleBase(f"no feasible robot base pose in {scenario.coupling.max_samples} samples",
                         scenario.coupling.max_samples)


def build_coupled(scenario, thetas, qs, base, targets=None) -> CoupledTrajectory:
    targets = grasp_targets(scenario, thetas) if targets is None else targets
    steps = []
    for i, (theta, q) in enumerate(zip(thetas, qs)):
        try:
            sol = solve_reactions(scenario.human, theta, scenario.gravity, scenario.closure)
        except SingularConfiguration as exc:
            exc.step = i
            raise
        steps.append(CoupledStep(np.array(theta), np.array(q), Pose.from_matrix(targets[i]),
                                 sol.wrench.copy(), sol))
    return CoupledTrajectory(steps, np.asarray(base, dtype=float))


def grasp_residuals(scenario, coupled: CoupledTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-step position (m) and angle (rad) gaps between human and robot grasp frames."""
    targets = grasp_targets(scenario, coupled.thetas)
    pos, ang = [], []
    for T_h, q in zip(targets, coupled.qs):
        T_r = robot_frames(scenario.robot, q, coupled.base)[-1]
        pos.append(np.linalg.norm(T_h[:3, 3] - T_r[:3, 3]))
        ang.append(relative_angle(T_h[:3, :3], T_r[:3, :3]))
    return np.array(pos), np.array(ang)


def robot_wrench_from_torques(robot: RobotArmModel, base, q, tau, max_condition: float = 1e10) -> np.ndarray:
    """End-effector wrench consistent with joint torques ``tau = J^T w``.

    Uses the pseudoinverse of ``J^T``; raises IllConditioned for near-singular J.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (robot.n_joints,):
        raise ValueError(f"expected {robot.n_joints} joint torques, got shape {tau.shape}")
    _, J = _fk_and_jacobian(robot, q, base)
    cond = np.linalg.cond(J)
    if not cond <= max_condition:
        raise IllConditioned(f"robot Jacobian condition number {cond:.3g} exceeds {max_condition:.0e}")
    return np.linalg.pinv(J.T) @ tau


def replay_forces(scenario, coupled, closure=None) -> list[ReactionSolution]:
    """Re-solve the arm statics at every step of a trajectory under ``closure``."""
    closure = scenario.closure if closure is None else ClosureModel.parse(closure)
    thetas = coupled.thetas if isinstance(coupled, CoupledTrajectory) else np.asarray(coupled, dtype=float)
    out = []
    for i, theta in enumerate(thetas):
        try:
            out.append(solve_reactions(scenario.human, theta, scenario.gravity, closure))
        except SingularConfiguration as exc:
            exc.step = i
            raise SingularConfiguration(f"step {i}: {exc}", exc.condition, i) from None
    return out
