"""Offline training and online solving.

``train`` fits a TT model to the density ``exp(-beta * C^2)`` over the
joint task/decision grid. ``solve`` conditions it on a task, samples
candidate decisions, keeps the cheapest and refines them locally.
``evaluate_run`` compares TTGO initialization with uniform initialization
over a task set, in the shape of the usual c_i / c_f / success tables.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cross import CrossOptions, CrossReport, tt_cross
from .errors import InvalidValueError, PoisonedEvaluationError
from .grid import Domain, Grid, TaskSplit, make_uniform_grid
from .optimize import RefineOptions, refine
from .sampler import build_sampler, sample, top_k_deterministic
from .tt import TTCores, tt_condition

TRANSFORM_EXP = 0


@dataclass
class Problem:
    """A cost over the joint vector ``(task, decision)``.

    ``cost`` maps an ``(N, d)`` array to ``N`` nonnegative values. When
    ``pdf`` is given it is modeled directly instead of ``exp(-beta C^2)``.
    """

    cost: Callable[[np.ndarray], np.ndarray]
    domain: Domain
    split: TaskSplit
    beta: float = 1.0
    name: str = "problem"
    pdf: Callable[[np.ndarray], np.ndarray] | None = None
    success_threshold: float = 0.25
    config: dict | None = None

    def __post_init__(self):
        if self.beta <= 0:
            raise InvalidValueError("beta must be positive")
        if self.split.d != self.domain.d:
            raise InvalidValueError(f"split {self.split} does not match domain dimension {self.domain.d}")

    @property
    def task_domain(self) -> Domain | None:
        return self.domain.sub(0, self.split.d1) if self.split.d1 else None

    @property
    def decision_domain(self) -> Domain:
        return self.domain.sub(self.split.d1)

    def decision_cost(self, task) -> Callable[[np.ndarray], np.ndarray]:
        task = np.asarray(task, dtype=float).reshape(-1)
        if task.size != self.split.d1:
            raise InvalidValueError(f"task needs {self.split.d1} values, got {task.size}")

        def f(x2):
            x2 = np.atleast_2d(x2)
            return self.cost(np.concatenate([np.broadcast_to(task, (len(x2), task.size)), x2], axis=1))

        return f


@dataclass
class TTGOModel:
    grid: Grid
    tt: TTCores
    split: TaskSplit
    beta: float
    report: CrossReport | None = None
    transform: int = TRANSFORM_EXP

    def __post_init__(self):
        if self.tt.counts != self.grid.counts:
            raise InvalidValueError("model cores do not match the grid")
        if self.split.d != self.grid.d:
            raise InvalidValueError("split does not match the grid dimension")

    @property
    def decision_grid(self) -> Grid:
        return self.grid.sub(self.split.d1)

    def conditioned(self, task=None) -> TTCores:
        if self.split.d1 == 0:
            return self.tt
        return tt_condition(self.tt, self.grid, self.split, task)


@dataclass
class SolveResult:
    candidates: list  # [(x2, c_i)] ascending in c_i
    refined: list  # [(x2*, c_f, iterations, c_i)] ascending in c_f
    success: list
    timing: dict = field(default_factory=dict)

    @property
    def best(self):
        return self.refined[0] if self.refined else self.candidates[0]


def cost_to_pdf(problem: Problem) -> Callable[[np.ndarray], np.ndarray]:
    """``exp(-beta C^2)`` (or the problem's own density) on a batch of points."""

    def pdf(x):
        x = np.atleast_2d(x)
        if problem.pdf is not None:
            p = np.asarray(problem.pdf(x), dtype=float)
        else:
            c = np.asarray(problem.cost(x), dtype=float)
            p = np.exp(-problem.beta * c ** 2)
            if not np.all(np.isfinite(c)):
                bad = int(np.argmax(~np.isfinite(c)))
                raise PoisonedEvaluationError(f"non-finite cost at {x[bad].tolist()}", index=x[bad])
        return p

    return pdf


def train(problem: Problem, grid_counts, cross_opts: CrossOptions | None = None) -> TTGOModel:
    grid = make_uniform_grid(problem.domain, grid_counts)
    pdf = cost_to_pdf(problem)
    tt, report = tt_cross(lambda idx: pdf(grid.points(idx)), grid, cross_opts or CrossOptions())
    return TTGOModel(grid=grid, tt=tt, split=problem.split, beta=problem.beta, report=report)


def _unique_rows(idx: np.ndarray) -> np.ndarray:
    _, first = np.unique(idx, axis=0, return_index=True)
    return idx[np.sort(first)]


def solve(model: TTGOModel, problem: Problem, task=None, alpha: float = 0.0, n_samples: int = 100,
          k_best: int = 1, refine_opts: RefineOptions | None = None, seed=0,
          do_refine: bool = True, deterministic: bool = False) -> SolveResult:
    """Condition, sample, rank by true cost, refine the best ``k_best``."""
    if not 1 <= k_best <= n_samples:
        raise InvalidValueError("need n_samples >= k_best >= 1")
    task = np.zeros(0) if task is None else np.asarray(task, dtype=float).reshape(-1)
    t0 = time.perf_counter()
    cond = model.conditioned(task)
    state = build_sampler(cond, alpha, seed)
    if deterministic:
        batch = top_k_deterministic(state, n_samples, beam=max(n_samples, 1))
    else:
        batch = sample(state, n_samples)
    idx = _unique_rows(batch.indices)
    x2 = model.decision_grid.points(idx)
    cost = problem.decision_cost(task)
    ci = cost(x2)
    order = np.argsort(ci, kind="stable")[:k_best]
    candidates = [(x2[i], float(ci[i])) for i in order]
    t1 = time.perf_counter()
    refined, success = [], []
    if do_refine:
        for x0, c0 in candidates:
            res = refine(cost, x0, problem.decision_domain, refine_opts)
            # refinement only ever accepts decreases; guard the invariant anyway
            x_f, c_f = (res.x, res.cost) if res.cost <= c0 else (x0, c0)
            refined.append((x_f, float(c_f), res.iterations, float(c0)))
        refined.sort(key=lambda r: r[1])
        success = [r[1] <= problem.success_threshold for r in refined]
    else:
        success = [c <= problem.success_threshold for _, c in candidates]
    t2 = time.perf_counter()
    return SolveResult(candidates, refined, success,
                       {"sample_ms": 1e3 * (t1 - t0), "refine_ms": 1e3 * (t2 - t1)})


def _best_refined(problem: Problem, task, x2: np.ndarray, refine_opts) -> tuple[float, float]:
    cost = problem.decision_cost(task)
    ci = cost(x2)
    i = int(np.argmin(ci))
    res = refine(cost, x2[i], problem.decision_domain, refine_opts)
    return float(ci[i]), float(min(res.cost, ci[i]))


def evaluate_run(model: TTGOModel, problem: Problem, tasks, alphas=(0.0,), sample_counts=(1, 10, 100),
                 baseline: bool = True, seed: int = 0, refine_opts: RefineOptions | None = None) -> list[dict]:
    """Mean c_i, mean c_f and success rate for best-of-N initialization.

    For every task the ``N`` candidates are ranked by true cost and only
    the best is refined. TTGO rows come per ``(alpha, N)``; uniform-baseline
    rows (``alpha`` left empty) per ``N``. The uniform draws for task ``t``
    use seed ``(seed, t)``, shared across ``N`` (common random numbers).
    """
    tasks = [np.asarray(t, dtype=float).reshape(-1) for t in tasks]
    if not tasks:
        raise InvalidValueError("need at least one task")
    rows = []
    counts = list(sample_counts)
    n_max = max(counts)
    dec = problem.decision_domain
    arms = [("ttgo", a) for a in alphas] + ([("uniform", None)] if baseline else [])
    for arm, alpha in arms:
        stats = {n: [] for n in counts}
        for t, task in enumerate(tasks):
            if arm == "ttgo":
                state = build_sampler(model.conditioned(task), alpha, seed=[seed, t])
                pts = model.decision_grid.points(sample(state, n_max).indices)
            else:
                rng = np.random.default_rng([seed, t, 7])
                pts = rng.uniform(dec.lower, dec.upper, size=(n_max, dec.d))
            for n in counts:
                stats[n].append(_best_refined(problem, task, pts[:n], refine_opts))
        for n in counts:
            ci, cf = np.array(stats[n]).T
            rows.append({
                "alpha": alpha,
                "n_samples": n,
                "mean_ci": float(ci.mean()),
                "mean_cf": float(cf.mean()),
                "success_pct": float(100.0 * np.mean(cf <= problem.success_threshold)),
                "arm": arm,
            })
    return rows


METRIC_COLUMNS = ("alpha", "n_samples", "mean_ci", "mean_cf", "success_pct", "arm")


def write_metrics_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in METRIC_COLUMNS])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)
