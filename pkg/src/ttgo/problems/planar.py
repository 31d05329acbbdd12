"""Planar serial manipulator, analytic 2-D signed distances, IK and reaching costs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidValueError
from ..grid import Domain
from .primitives import MotionPrimitive, rbf_trajectory, shape_trajectory

BETA_P = 0.05
BETA_OBST_IK = 0.01
BETA_OBST_MOTION = 0.1
BETA_ORIENT = 0.2
BETA_CONTROL = 2.0


@dataclass
class PlanarRobot:
    link_lengths: np.ndarray
    joint_limits: np.ndarray  # (m, 2) rows of (min, max)
    collision_points_per_link: int = 4

    def __post_init__(self):
        self.link_lengths = np.atleast_1d(np.asarray(self.link_lengths, dtype=float))
        m = self.link_lengths.size
        if m < 1 or np.any(self.link_lengths <= 0):
            raise InvalidValueError("need at least one link with positive length")
        lim = np.asarray(self.joint_limits, dtype=float)
        if lim.shape == (2,):
            lim = np.tile(lim, (m, 1))
        if lim.shape != (m, 2) or np.any(lim[:, 0] >= lim[:, 1]):
            raise InvalidValueError("joint_limits must be (m, 2) with min < max")
        self.joint_limits = lim
        if self.collision_points_per_link < 1:
            raise InvalidValueError("collision_points_per_link must be >= 1")

    @property
    def dof(self) -> int:
        return self.link_lengths.size

    @property
    def reach(self) -> float:
        return float(self.link_lengths.sum())

    def joint_domain(self) -> Domain:
        return Domain(self.joint_limits[:, 0], self.joint_limits[:, 1])


@dataclass
class Scene:
    circles: list = field(default_factory=list)  # [(center (2,), radius)]
    boxes: list = field(default_factory=list)  # [(min (2,), max (2,))]
    margin: float = 0.05

    def __post_init__(self):
        self.circles = [(np.asarray(c, dtype=float), float(r)) for c, r in self.circles]
        self.boxes = [(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)) for lo, hi in self.boxes]
        if any(r <= 0 for _, r in self.circles):
            raise InvalidValueError("circle radii must be positive")
        if any(np.any(lo >= hi) for lo, hi in self.boxes):
            raise InvalidValueError("boxes need min < max")
        if self.margin < 0:
            raise InvalidValueError("margin must be >= 0")

    def __len__(self):
        return len(self.circles) + len(self.boxes)


def fk_planar(robot: PlanarRobot, theta) -> np.ndarray:
    """Base, joint and end-effector positions, shape ``(..., m + 1, 2)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.cumsum(theta, axis=-1)
    steps = np.stack([np.cos(phi), np.sin(phi)], axis=-1) * robot.link_lengths[:, None]
    pos = np.cumsum(steps, axis=-2)
    base = np.zeros(pos.shape[:-2] + (1, 2))
    return np.concatenate([base, pos], axis=-2)


def body_points(robot: PlanarRobot, joints: np.ndarray) -> np.ndarray:
    """Collision proxy points along every link, shape ``(..., m * c, 2)``."""
    c = robot.collision_points_per_link
    t = (np.arange(c) + 1.0) / c
    a = joints[..., :-1, None, :]
    b = joints[..., 1:, None, :]
    pts = a + (b - a) * t[:, None]
    return pts.reshape(joints.shape[:-2] + (-1, 2))


def sdf(scene: Scene, p) -> np.ndarray:
    """Signed distance to the nearest obstacle (negative inside); ``+inf`` for an empty scene."""
    p = np.asarray(p, dtype=float)
    out = np.full(p.shape[:-1], np.inf)
    for c, r in scene.circles:
        out = np.minimum(out, np.linalg.norm(p - c, axis=-1) - r)
    for lo, hi in scene.boxes:
        q = np.abs(p - 0.5 * (lo + hi)) - 0.5 * (hi - lo)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        out = np.minimum(out, outside + inside)
    return out


def obstacle_cost(scene: Scene, points: np.ndarray) -> np.ndarray:
    """Squared hinge ``max(0, margin - sdf)^2`` summed over the last point axis."""
    if len(scene) == 0:
        return np.zeros(points.shape[:-2])
    pen = np.maximum(0.0, scene.margin - sdf(scene, points))
    return (pen ** 2).sum(axis=-1)


def orientation_cost(theta) -> np.ndarray:
    # planar targets are position-only
    return np.zeros(np.shape(theta)[:-1])


def ik_cost(robot: PlanarRobot, scene: Scene, target, theta,
            beta_p: float = BETA_P, beta_obst: float = BETA_OBST_IK) -> np.ndarray:
    """Position error plus obstacle penalty, each scaled by its acceptable value."""
    theta = np.asarray(theta, dtype=float)
    joints = fk_planar(robot, theta)
    c_p = np.linalg.norm(np.asarray(target, dtype=float) - joints[..., -1, :], axis=-1)
    c_obst = obstacle_cost(scene, body_points(robot, joints))
    return 0.5 * (c_p / beta_p + c_obst / beta_obst)


def _path_length(curve: np.ndarray) -> np.ndarray:
    """Polyline length along axis -2 of ``(..., T, k)``."""
    return np.linalg.norm(np.diff(curve, axis=-2), axis=-1).sum(axis=-1)


def motion_trajectory(robot: PlanarRobot, mp: MotionPrimitive, theta_init, theta_final, weights) -> np.ndarray:
    """Joint trajectory ``(..., N + 1, m)`` from the primitive weights ``(..., m, J)``."""
    lim = robot.joint_limits
    tau_hat = rbf_trajectory(mp, weights)  # (..., m, N+1)
    theta_init = np.broadcast_to(np.asarray(theta_init, dtype=float), tau_hat.shape[:-1])
    theta_final = np.asarray(theta_final, dtype=float)
    tau = shape_trajectory(tau_hat, theta_init, theta_final, (lim[:, 0], lim[:, 1]), mp.window)
    return np.swapaxes(tau, -1, -2)


def motion_cost(robot: PlanarRobot, scene: Scene, target, decision, theta_init, mp: MotionPrimitive,
                beta_p: float = BETA_P, beta_obst: float = BETA_OBST_MOTION,
                beta_control: float = BETA_CONTROL, return_terms: bool = False):
    """Reaching cost for decision vectors ``(theta_final, weights)`` of length ``m + m * J``.

    The average runs over position, obstacle and control terms; the
    orientation slot is kept but contributes zero for a planar arm.
    """
    decision = np.atleast_2d(np.asarray(decision, dtype=float))
    m, j = robot.dof, mp.J
    if decision.shape[-1] != m + m * j:
        raise InvalidValueError(f"decision needs {m + m * j} entries, got {decision.shape[-1]}")
    theta_final = decision[..., :m]
    weights = decision[..., m:].reshape(decision.shape[:-1] + (m, j))
    traj = motion_trajectory(robot, mp, theta_init, theta_final, weights)
    joints = fk_planar(robot, traj)  # (..., T, m+1, 2)
    ee = joints[..., -1, :]
    c_p = np.linalg.norm(np.asarray(target, dtype=float) - ee[..., -1, :], axis=-1)
    pts = body_points(robot, joints)
    c_obst = obstacle_cost(scene, pts.reshape(pts.shape[:-3] + (-1, 2)))
    c_control = _path_length(traj) + _path_length(ee)
    c_orient = orientation_cost(theta_final)
    total = (c_p / beta_p + c_obst / beta_obst + c_control / beta_control + c_orient / BETA_ORIENT) / 3.0
    if return_terms:
        return total, {"position": c_p, "obstacle": c_obst, "control": c_control}
    return total


def random_feasible_configs(robot: PlanarRobot, scene: Scene, n: int, rng: np.random.Generator,
                            clearance: float = 0.0) -> np.ndarray:
    """Joint vectors drawn uniformly within limits whose body points clear every obstacle."""
    lim = robot.joint_limits
    out = []
    while sum(len(o) for o in out) < n:
        th = rng.uniform(lim[:, 0], lim[:, 1], size=(4 * n, robot.dof))
        pts = body_points(robot, fk_planar(robot, th))
        ok = sdf(scene, pts).min(axis=-1) > scene.margin + clearance
        out.append(th[ok])
    return np.concatenate(out)[:n]
