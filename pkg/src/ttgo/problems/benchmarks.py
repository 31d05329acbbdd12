"""Analytic benchmark costs over the joint (task, decision) vector.

Every function takes an ``(N, d1 + d2)`` array whose leading columns are
task parameters and returns ``N`` values. Parameters that are not task
dimensions for a given spec are taken from ``BenchmarkSpec.params``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidValueError
from ..grid import Domain

KINDS = ("sinusoid", "rosenbrock", "himmelblau", "gmm")


@dataclass
class BenchmarkSpec:
    kind: str
    d1: int = 0
    d2: int = 2
    params: dict = field(default_factory=dict)
    # mixture-of-Gaussians only: centers (J, d), sharpness (J,), weights (J,)
    centers: np.ndarray | None = None
    betas: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidValueError(f"unknown benchmark kind {self.kind!r}")
        if self.kind == "rosenbrock" and self.d2 % 2:
            raise InvalidValueError("rosenbrock needs an even number of decision variables")
        if self.kind == "himmelblau" and self.d2 != 2:
            raise InvalidValueError("himmelblau has exactly two decision variables")
        if self.kind in ("rosenbrock", "himmelblau") and self.d1 not in (0, 2):
            raise InvalidValueError(f"{self.kind} takes either 0 or 2 task parameters (a, b)")
        if self.kind == "sinusoid" and self.d1 != 0:
            raise InvalidValueError("sinusoid has no task parameters")
        if self.kind == "gmm":
            if self.centers is None:
                raise InvalidValueError("gmm needs centers")
            self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
            j, dim = self.centers.shape
            if dim != self.d:
                raise InvalidValueError(f"gmm centers have dimension {dim}, expected {self.d}")
            self.betas = np.broadcast_to(np.asarray(
                self.betas if self.betas is not None else 1.0, dtype=float), (j,)).copy()
            self.weights = np.broadcast_to(np.asarray(
                self.weights if self.weights is not None else 1.0, dtype=float), (j,)).copy()
            if np.any(self.weights <= 0) or np.any(self.betas <= 0):
                raise InvalidValueError("gmm weights and sharpness must be positive")

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    def domain(self) -> Domain:
        if self.kind == "rosenbrock":
            task = Domain([-1.5, 50.0], [1.5, 150.0])
            dec = Domain.box(-2.0, 2.0, self.d2)
        elif self.kind == "himmelblau":
            task = Domain([0.0, 0.0], [15.0, 15.0])
            dec = Domain.box(-5.0, 5.0, 2)
        else:
            return Domain.box(-2.0, 2.0, self.d)
        if "decision_bounds" in self.params:
            lo, hi = self.params["decision_bounds"]
            dec = Domain.box(lo, hi, self.d2)
        return Domain.concat(task, dec) if self.d1 else dec

    def optima(self, task=None) -> np.ndarray:
        """Known global minimizers (decision part) for the given task."""
        a, b = self._ab(None if task is None else np.atleast_2d(task))
        a, b = float(np.ravel(a)[0]), float(np.ravel(b)[0])
        if self.kind == "rosenbrock":
            return np.tile([a, a * a], self.d2 // 2)[None, :]
        if self.kind == "himmelblau":
            return himmelblau_roots(a, b)
        if self.kind == "gmm":
            return self.centers[[int(np.argmax(self.weights))]]
        raise InvalidValueError("sinusoid optima form a continuum")

    def _ab(self, task_cols):
        if self.d1:
            return task_cols[:, 0], task_cols[:, 1]
        default = (1.0, 100.0) if self.kind == "rosenbrock" else (11.0, 7.0)
        return (self.params.get("a", default[0]), self.params.get("b", default[1]))


def _split(spec: BenchmarkSpec, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.d:
        raise InvalidValueError(f"{spec.kind}: expected {spec.d} coordinates, got {x.shape[1]}")
    return x[:, :spec.d1], x[:, spec.d1:]


def sinusoid(y: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(y, axis=1) / np.sqrt(y.shape[1])
    return 1.0 - 0.5 * (1.0 + np.sin(4.0 * np.pi * r))


def rosenbrock(a, b, y: np.ndarray) -> np.ndarray:
    # pairs (odd, even) with the minimum at (a, a^2, a, a^2, ...)
    odd, even = y[:, 0::2], y[:, 1::2]
    a = np.reshape(a, (-1, 1))
    b = np.reshape(b, (-1, 1))
    return np.sum((odd - a) ** 2 + b * (even - odd ** 2) ** 2, axis=1)


def himmelblau(a, b, y: np.ndarray) -> np.ndarray:
    y1, y2 = y[:, 0], y[:, 1]
    return (y1 ** 2 + y2 - a) ** 2 + (y1 + y2 ** 2 - b) ** 2


def gmm_pdf(spec: BenchmarkSpec, x: np.ndarray) -> np.ndarray:
    sq = ((x[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-sq * spec.betas[None, :]) @ spec.weights


def benchmark_cost(spec: BenchmarkSpec, x) -> np.ndarray:
    """Cost at one point ``(d,)`` or a batch ``(N, d)``; the mixture uses ``max(weights) - P``."""
    scalar = np.ndim(x) == 1
    task, y = _split(spec, x)
    if spec.kind == "sinusoid":
        c = sinusoid(y)
    elif spec.kind == "gmm":
        c = spec.weights.max() - gmm_pdf(spec, np.concatenate([task, y], axis=1))
    else:
        a, b = spec._ab(task)
        c = rosenbrock(a, b, y) if spec.kind == "rosenbrock" else himmelblau(a, b, y)
    return float(c[0]) if scalar else c


def benchmark_pdf(spec: BenchmarkSpec, x) -> np.ndarray | None:
    """Density used directly instead of the cost transform (mixture only)."""
    if spec.kind != "gmm":
        return None
    return gmm_pdf(spec, np.atleast_2d(np.asarray(x, dtype=float)))


def himmelblau_roots(a: float, b: float, bound: float = 5.0, n: int = 100) -> np.ndarray:
    """Global minimizers of the (a, b) Himmelblau cost inside ``[-bound, bound]^2``.

    Found by multi-start Newton iterations on the gradient from a dense
    ``n x n`` grid of starts, keeping distinct solutions with zero cost.
    """
    g = np.linspace(-bound, bound, n)
    y = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    for _ in range(60):
        y1, y2 = y[:, 0], y[:, 1]
        u = y1 ** 2 + y2 - a
        v = y1 + y2 ** 2 - b
        # Newton on the residual map (u, v) = 0
        j11, j12, j21, j22 = 2 * y1, np.ones_like(y1), np.ones_like(y1), 2 * y2
        det = j11 * j22 - j12 * j21
        ok = np.abs(det) > 1e-12
        step = np.zeros_like(y)
        step[ok, 0] = (j22[ok] * u[ok] - j12[ok] * v[ok]) / det[ok]
        step[ok, 1] = (-j21[ok] * u[ok] + j11[ok] * v[ok]) / det[ok]
        y = y - step
    cost = himmelblau(a, b, y)
    good = y[(cost < 1e-18) & np.all(np.abs(y) <= bound, axis=1)]
    roots = []
    for p in good:
        if all(np.linalg.norm(p - q) > 1e-6 for q in roots):
            roots.append(p)
    roots.sort(key=lambda p: (p[0], p[1]))
    return np.array(roots)
