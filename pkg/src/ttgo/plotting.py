"""Figures written to files (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sampler import build_sampler, sample  # noqa: E402


def _arm_label(row) -> str:
    return "uniform" if row["arm"] == "uniform" else f"TTGO a={row['alpha']:g}"


def plot_metrics(rows, path, title: str = "") -> Path:
    """Success rate and mean final cost against the number of samples, one line per arm."""
    path = Path(path)
    fig, (ax_s, ax_c) = plt.subplots(1, 2, figsize=(9, 3.6))
    labels = []
    for r in rows:
        lab = _arm_label(r)
        if lab not in labels:
            labels.append(lab)
    for lab in labels:
        sel = [r for r in rows if _arm_label(r) == lab]
        n = [r["n_samples"] for r in sel]
        ax_s.plot(n, [r["success_pct"] for r in sel], marker="o", label=lab)
        ax_c.plot(n, [max(r["mean_cf"], 1e-16) for r in sel], marker="o", label=lab)
    for ax in (ax_s, ax_c):
        ax.set_xscale("log")
        ax.set_xlabel("samples N")
        ax.grid(alpha=0.3)
    ax_s.set_ylabel("success %")
    ax_s.set_ylim(-2, 102)
    ax_c.set_ylabel("mean c_f")
    ax_c.set_yscale("log")
    ax_s.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_samples_2d(model, problem, task, alphas, path, n: int = 1000, seed=0, resolution: int = 200) -> Path:
    """Cost contours of a 2-D decision space with TT samples for several priorities."""
    path = Path(path)
    task = np.zeros(0) if task is None else np.asarray(task, dtype=float).reshape(-1)
    dom = problem.decision_domain
    g1 = np.linspace(dom.lower[0], dom.upper[0], resolution)
    g2 = np.linspace(dom.lower[1], dom.upper[1], resolution)
    mesh = np.stack(np.meshgrid(g1, g2), axis=-1).reshape(-1, 2)
    cost = problem.decision_cost(task)(mesh).reshape(resolution, resolution)
    cond = model.conditioned(task)
    fig, axes = plt.subplots(1, len(alphas), figsize=(3.6 * len(alphas), 3.4), squeeze=False)
    for ax, alpha in zip(axes[0], alphas):
        ax.contourf(g1, g2, np.log1p(cost), levels=30, cmap="Greys_r")
        batch = sample(build_sampler(cond, alpha, seed), n)
        pts = model.decision_grid.points(batch.indices)
        ax.scatter(pts[:, 0], pts[:, 1], s=3, c="tab:blue", alpha=0.6)
        ax.set_title(f"alpha = {alpha:g}")
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_ik_solutions(model, problem, target, path, n: int = 100, k: int = 8, seed=0) -> Path:
    """Planar arm configurations for the ``k`` cheapest of ``n`` TT samples at one target."""
    from .problems import _robot, _scene
    from .problems.planar import fk_planar

    path = Path(path)
    cfg = problem.config or {}
    robot, scene = _robot(cfg.get("robot", {})), _scene(cfg.get("scene", {}))
    target = np.asarray(target, dtype=float)
    batch = sample(build_sampler(model.conditioned(target), 0.9, seed), n)
    th = model.decision_grid.points(batch.indices)
    c = problem.decision_cost(target)(th)
    best = th[np.argsort(c, kind="stable")[:k]]
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    for center, r in scene.circles:
        ax.add_patch(plt.Circle(center, r, color="tab:red", alpha=0.4))
    for lo, hi in scene.boxes:
        ax.add_patch(plt.Rectangle(lo, *(hi - lo), color="tab:red", alpha=0.4))
    for q in best:
        j = fk_planar(robot, q)
        ax.plot(j[:, 0], j[:, 1], "-o", ms=2, lw=1.2, alpha=0.7)
    ax.plot(*target, "k*", ms=10)
    reach = robot.reach
    ax.set_xlim(-reach, reach)
    ax.set_ylim(-reach, reach)
    ax.set_aspect("equal")
    ax.set_title(f"{k} best of {n} samples")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
