"""Problem definitions and their JSON-compatible configuration.

A configuration is a plain dict (usually loaded from JSON)::

    {"name": "ik3", "kind": "ik",
     "robot": {"links": [0.4, 0.3, 0.3], "joint_limits": [[-2.6, 2.6], ...]},
     "scene": {"circles": [{"center": [0.5, 0.4], "radius": 0.12}], "margin": 0.05},
     "workspace": [[-1, -1], [1, 1]],
     "grid_counts": [60, 60, 50, 50, 50], "beta": 1.0}

``kind`` is one of the benchmark kinds (``sinusoid``, ``rosenbrock``,
``himmelblau``, ``gmm``) or ``ik`` / ``motion`` for the planar robot.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import InvalidValueError
from ..grid import Domain, TaskSplit
from ..pipeline import Problem
from .benchmarks import KINDS, BenchmarkSpec, benchmark_cost, benchmark_pdf, himmelblau_roots
from .planar import PlanarRobot, Scene, fk_planar, ik_cost, motion_cost, sdf
from .primitives import MotionPrimitive, rbf_trajectory, shape_trajectory

__all__ = [
    "BenchmarkSpec", "PlanarRobot", "Scene", "MotionPrimitive",
    "benchmark_cost", "benchmark_pdf", "himmelblau_roots", "fk_planar", "sdf", "ik_cost",
    "motion_cost", "rbf_trajectory", "shape_trajectory",
    "benchmark_problem", "ik_problem", "motion_problem", "problem_from_config", "load_problem",
]


def benchmark_problem(spec: BenchmarkSpec, beta: float = 1.0, name: str | None = None,
                      config: dict | None = None) -> Problem:
    pdf = (lambda x: benchmark_pdf(spec, x)) if spec.kind == "gmm" else None
    return Problem(cost=lambda x: benchmark_cost(spec, x), domain=spec.domain(),
                   split=TaskSplit(spec.d1, spec.d2), beta=beta, name=name or spec.kind,
                   pdf=pdf, config=config)


def ik_problem(robot: PlanarRobot, scene: Scene, workspace: Domain | None = None, beta: float = 1.0,
               name: str = "ik", config: dict | None = None) -> Problem:
    """Task = end-effector target (x, y); decision = joint angles."""
    if workspace is None:
        workspace = Domain.box(-robot.reach, robot.reach, 2)
    m = robot.dof

    def cost(x):
        x = np.atleast_2d(x)
        return ik_cost(robot, scene, x[:, :2], x[:, 2:2 + m])

    return Problem(cost=cost, domain=Domain.concat(workspace, robot.joint_domain()),
                   split=TaskSplit(2, m), beta=beta, name=name, config=config)


def motion_problem(robot: PlanarRobot, scene: Scene, theta_init, mp: MotionPrimitive,
                   workspace: Domain | None = None, beta: float = 1.0, name: str = "motion",
                   config: dict | None = None) -> Problem:
    """Reaching: task = target (x, y); decision = final joints then per-joint basis weights."""
    if workspace is None:
        workspace = Domain.box(-robot.reach, robot.reach, 2)
    m = robot.dof
    theta_init = np.asarray(theta_init, dtype=float)
    jd = robot.joint_domain()
    weights_dom = Domain(np.repeat(jd.lower, mp.J), np.repeat(jd.upper, mp.J))

    def cost(x):
        x = np.atleast_2d(x)
        return motion_cost(robot, scene, x[:, :2], x[:, 2:], theta_init, mp)

    return Problem(cost=cost, domain=Domain.concat(workspace, jd, weights_dom),
                   split=TaskSplit(2, m + m * mp.J), beta=beta, name=name, config=config)


def _robot(cfg: dict) -> PlanarRobot:
    links = cfg.get("links", [1.0, 1.0, 1.0])
    return PlanarRobot(links, cfg.get("joint_limits", [-np.pi, np.pi]),
                       int(cfg.get("collision_points_per_link", 4)))


def _scene(cfg: dict) -> Scene:
    circles = [(c["center"], c["radius"]) for c in cfg.get("circles", [])]
    boxes = [(b["min"], b["max"]) for b in cfg.get("boxes", [])]
    return Scene(circles, boxes, float(cfg.get("margin", 0.05)))


def problem_from_config(cfg: dict) -> Problem:
    kind = cfg.get("kind")
    beta = float(cfg.get("beta", 1.0))
    name = cfg.get("name", kind)
    if kind in KINDS:
        g = cfg.get("gmm", {})
        spec = BenchmarkSpec(kind, d1=int(cfg.get("d1", 0)), d2=int(cfg.get("d2", 2)),
                             params=dict(cfg.get("params", {})), centers=g.get("centers"),
                             betas=g.get("betas"), weights=g.get("weights"))
        prob = benchmark_problem(spec, beta, name, cfg)
    elif kind in ("ik", "motion"):
        robot = _robot(cfg.get("robot", {}))
        scene = _scene(cfg.get("scene", {}))
        ws = cfg.get("workspace")
        workspace = Domain(ws[0], ws[1]) if ws else None
        if kind == "ik":
            prob = ik_problem(robot, scene, workspace, beta, name, cfg)
        else:
            pcfg = cfg.get("primitive", {})
            mp = MotionPrimitive(J=int(pcfg.get("J", 2)), gamma=pcfg.get("gamma"), N=int(pcfg.get("N", 100)),
                                 window=pcfg.get("window"))
            theta_init = cfg.get("theta_init", np.zeros(robot.dof))
            prob = motion_problem(robot, scene, theta_init, mp, workspace, beta, name, cfg)
    else:
        raise InvalidValueError(f"unknown problem kind {kind!r}")
    if "success_threshold" in cfg:
        prob.success_threshold = float(cfg["success_threshold"])
    return prob


def load_problem(path) -> Problem:
    with open(Path(path)) as fh:
        return problem_from_config(json.load(fh))
