"""Bounded local refinement with finite-difference gradients.

The default direction is a projected BFGS step on the free variables;
``method="gd"`` gives plain projected steepest descent. Both use Armijo
backtracking along the projected path, so an accepted step never raises
the cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Domain


@dataclass
class RefineOptions:
    max_iter: int = 200
    gtol: float = 1e-9
    xtol: float = 1e-12
    fd_rel_step: float = 1e-6
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtrack: int = 60
    method: str = "bfgs"


@dataclass
class RefineResult:
    x: np.ndarray
    cost: float
    iterations: int
    status: str
    evaluations: int = 0


class _Counted:
    def __init__(self, cost):
        self.cost = cost
        self.calls = 0

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        self.calls += len(pts)
        return np.asarray(self.cost(pts), dtype=float).reshape(-1)


def fd_gradient(cost, x: np.ndarray, lower: np.ndarray, upper: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Central differences, one-sided where a bound cuts the stencil.

    All ``2 d`` stencil points go to ``cost`` as a single batch.
    """
    d = x.size
    plus = np.minimum(x + h, upper)
    minus = np.maximum(x - h, lower)
    pts = np.repeat(x[None, :], 2 * d, axis=0)
    pts[np.arange(d), np.arange(d)] = plus
    pts[d + np.arange(d), np.arange(d)] = minus
    f = cost(pts)
    return (f[:d] - f[d:]) / (plus - minus)


def refine(cost, x0, bounds: Domain, opts: RefineOptions | None = None) -> RefineResult:
    """Locally minimize a batched ``cost`` inside a box starting at ``x0``.

    ``cost`` maps an ``(M, d)`` array to ``M`` values. Stops on a small
    projected gradient, a tiny step, a failed line search, a non-finite
    cost (keeping the best point so far) or ``max_iter``.
    """
    opts = opts or RefineOptions()
    f_eval = _Counted(cost)
    lo, hi = bounds.lower, bounds.upper
    h = opts.fd_rel_step * (hi - lo)
    x = np.clip(np.asarray(x0, dtype=float).reshape(-1), lo, hi)
    f = float(f_eval(x)[0])
    if not np.isfinite(f):
        return RefineResult(x, f, 0, "nonfinite", f_eval.calls)
    g = fd_gradient(f_eval, x, lo, hi, h)
    d = x.size
    hess_inv = None
    status = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        if not np.all(np.isfinite(g)):
            status = "nonfinite"
            break
        proj = x - np.clip(x - g, lo, hi)
        if np.max(np.abs(proj)) < opts.gtol:
            status = "gtol"
            break
        active = ((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0))
        free = ~active
        direction = np.zeros(d)
        if opts.method == "bfgs" and hess_inv is not None:
            direction[free] = -hess_inv[np.ix_(free, free)] @ g[free]
        else:
            direction[free] = -g[free]
        slope = g @ direction
        if slope >= 0:
            hess_inv = None
            direction = np.where(free, -g, 0.0)
            slope = g @ direction
        t = 1.0
        if hess_inv is None:
            # first or reset step: move at most a tenth of the box
            t = min(1.0, 0.1 * np.min((hi - lo)[free]) / max(np.max(np.abs(direction)), 1e-300))
        accepted = False
        for _ in range(opts.max_backtrack):
            x_new = np.clip(x + t * direction, lo, hi)
            f_new = float(f_eval(x_new)[0])
            if np.isfinite(f_new) and f_new <= f + opts.armijo * (g @ (x_new - x)):
                accepted = True
                break
            if not np.isfinite(f_new):
                status = "nonfinite"
            t *= opts.shrink
        if not accepted:
            status = "nonfinite" if status == "nonfinite" else "linesearch"
            break
        step = x_new - x
        g_new = fd_gradient(f_eval, x_new, lo, hi, h)
        if opts.method == "bfgs":
            y = g_new - g
            sy = step @ y
            if sy > 1e-12 * np.linalg.norm(step) * np.linalg.norm(y):
                if hess_inv is None:
                    hess_inv = np.eye(d) * (sy / (y @ y))
                rho = 1.0 / sy
                v = np.eye(d) - rho * np.outer(step, y)
                hess_inv = v @ hess_inv @ v.T + rho * np.outer(step, step)
        x, f, g = x_new, f_new, g_new
        if np.max(np.abs(step)) < opts.xtol:
            status = "xtol"
            break
    return RefineResult(x, f, it, status, f_eval.calls)
