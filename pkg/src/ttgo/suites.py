"""Standard problem setups shared by ``ttgo benchmark`` and the test suite.

Each suite bundles a problem configuration (the JSON shape accepted by
:func:`ttgo.problems.problem_from_config`), a training grid, cross options,
a task generator and the sweep used for the c_i / c_f / success table.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .cross import CrossOptions
from .pipeline import TTGOModel, evaluate_run, train, write_metrics_csv
from .problems import problem_from_config
from .problems.planar import PlanarRobot, Scene, fk_planar, random_feasible_configs


@dataclass
class Suite:
    name: str
    config: dict
    grid_counts: list
    cross: CrossOptions
    tasks: Callable[[np.random.Generator, int], np.ndarray]
    n_tasks: int = 100
    alphas: tuple = (0.0, 0.5, 0.9)
    sample_counts: tuple = (1, 10, 100)
    extra: dict = field(default_factory=dict)

    def problem(self):
        return problem_from_config(self.config)


def _no_tasks(rng, n):
    return np.zeros((n, 0))


def sinusoid_suite() -> Suite:
    cfg = {"kind": "sinusoid", "name": "sinusoid", "d1": 0, "d2": 2, "beta": 200.0,
           "success_threshold": 0.1}
    return Suite("sinusoid", cfg, [200, 200],
                 CrossOptions(max_rank=80, n_sweeps=15, tol=1e-4, kick=10), _no_tasks, n_tasks=20)


def rosenbrock_suite() -> Suite:
    # decision box widened so every task's minimizer (a, a^2) is inside it
    cfg = {"kind": "rosenbrock", "name": "rosenbrock", "d1": 2, "d2": 2, "beta": 1.0,
           "params": {"decision_bounds": [-2.5, 2.5]}, "success_threshold": 0.25}

    def tasks(rng, n):
        return np.column_stack([rng.uniform(-1.5, 1.5, n), rng.uniform(50.0, 150.0, n)])

    return Suite("rosenbrock", cfg, [100, 100, 300, 300],
                 CrossOptions(max_rank=80, n_sweeps=15, tol=1e-3, kick=10), tasks)


def himmelblau_suite() -> Suite:
    cfg = {"kind": "himmelblau", "name": "himmelblau", "d1": 2, "d2": 2, "beta": 0.01,
           "success_threshold": 0.25}

    def tasks(rng, n):
        return rng.uniform(5.0, 15.0, size=(n, 2))

    return Suite("himmelblau", cfg, [151, 151, 200, 200],
                 CrossOptions(max_rank=60, n_sweeps=15, tol=1e-3, kick=10), tasks,
                 extra={"task": [11.0, 7.0]})


def gmm_config(seed: int = 0, d: int = 10, n_components: int = 5, beta: float = 30.0,
               min_separation: float = 1.0) -> dict:
    """Random well-separated mixture; component 0 carries the largest weight."""
    rng = np.random.default_rng(seed)
    while True:
        centers = rng.uniform(-1.5, 1.5, size=(n_components, d))
        gaps = np.linalg.norm(centers[:, None] - centers[None], axis=2) + np.eye(n_components) * 1e9
        if gaps.min() > min_separation:
            break
    weights = np.concatenate([[1.0], rng.uniform(0.5, 0.8, n_components - 1)])
    return {"kind": "gmm", "name": f"gmm{d}", "d1": 0, "d2": d, "success_threshold": 0.01,
            "gmm": {"centers": centers.tolist(), "betas": beta, "weights": weights.tolist()}}


def gmm_suite(seed: int = 0) -> Suite:
    cfg = gmm_config(seed)
    return Suite("gmm", cfg, [100] * cfg["d2"],
                 CrossOptions(max_rank=10, n_sweeps=10, tol=1e-4, kick=4, seed=seed), _no_tasks,
                 n_tasks=20, extra={"k_best": 5})


def planar_ik_config() -> dict:
    return {
        "kind": "ik", "name": "planar_ik3", "beta": 1.0, "success_threshold": 0.25,
        "robot": {"links": [0.4, 0.3, 0.3], "joint_limits": [-2.6, 2.6]},
        "scene": {"circles": [{"center": [0.5, 0.45], "radius": 0.12},
                              {"center": [-0.45, 0.45], "radius": 0.12},
                              {"center": [0.1, -0.6], "radius": 0.12}],
                  "margin": 0.05},
        "workspace": [[-1.0, -1.0], [1.0, 1.0]],
    }


def _reachable_targets(cfg: dict) -> Callable:
    robot = PlanarRobot(cfg["robot"]["links"], cfg["robot"]["joint_limits"])
    scene = Scene([(c["center"], c["radius"]) for c in cfg["scene"]["circles"]],
                  margin=cfg["scene"]["margin"])
    lo, hi = (np.asarray(v) for v in cfg["workspace"])

    def tasks(rng, n):
        out = []
        while sum(len(o) for o in out) < n:
            th = random_feasible_configs(robot, scene, n, rng)
            ee = fk_planar(robot, th)[:, -1, :]
            out.append(ee[np.all((ee >= lo) & (ee <= hi), axis=1)])
        return np.concatenate(out)[:n]

    return tasks


def ik_suite() -> Suite:
    cfg = planar_ik_config()
    return Suite("ik", cfg, [50] * 5, CrossOptions(max_rank=40, n_sweeps=15, tol=1e-3, kick=10),
                 _reachable_targets(cfg), alphas=(0.0, 0.9))


def motion_suite() -> Suite:
    cfg = dict(planar_ik_config(), kind="motion", name="planar_reach3",
               primitive={"J": 2, "N": 50}, theta_init=[0.0, 0.0, 0.0])
    return Suite("motion", cfg, [20, 20] + [20] * 9,
                 CrossOptions(max_rank=20, n_sweeps=8, tol=1e-3, kick=4),
                 _reachable_targets(cfg), n_tasks=50, alphas=(0.0, 0.9))


SUITES = {
    "sinusoid": sinusoid_suite,
    "rosenbrock": rosenbrock_suite,
    "himmelblau": himmelblau_suite,
    "gmm": gmm_suite,
    "ik": ik_suite,
    "motion": motion_suite,
}


def get_suite(name: str, quick: bool = False) -> Suite:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    suite = SUITES[name]()
    if quick:
        suite.n_tasks = min(suite.n_tasks, 10)
        suite.cross = replace(suite.cross, n_sweeps=min(suite.cross.n_sweeps, 4))
    return suite


def train_suite(suite: Suite) -> TTGOModel:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return train(suite.problem(), suite.grid_counts, suite.cross)


def run_suite(name: str, out_dir, seed: int = 0, quick: bool = False, figures: bool = True) -> dict:
    """Train, evaluate and write ``<name>_metrics.csv`` (plus PNG figures) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    suite = get_suite(name, quick)
    problem = suite.problem()
    t0 = time.perf_counter()
    model = train_suite(suite)
    t_train = time.perf_counter() - t0
    tasks = suite.tasks(np.random.default_rng([seed, 11]), suite.n_tasks)
    rows = evaluate_run(model, problem, tasks, alphas=suite.alphas, sample_counts=suite.sample_counts,
                        seed=seed)
    csv_path = out / f"{name}_metrics.csv"
    write_metrics_csv(rows, csv_path)
    files = [str(csv_path)]
    if figures:
        from . import plotting

        files.append(str(plotting.plot_metrics(rows, out / f"{name}_metrics.png", title=name)))
        if problem.split.d2 == 2:
            task = suite.extra.get("task", tasks[0] if problem.split.d1 else None)
            files.append(str(plotting.plot_samples_2d(model, problem, task, (0.0, 0.5, 0.9),
                                                      out / f"{name}_samples.png", seed=seed)))
        if suite.config["kind"] == "ik":
            files.append(str(plotting.plot_ik_solutions(model, problem, tasks[0], out / f"{name}_ik.png",
                                                        seed=seed)))
    return {"suite": name, "train_seconds": t_train, "ranks": list(model.tt.ranks),
            "converged": bool(model.report.converged), "rows": rows, "files": files}
