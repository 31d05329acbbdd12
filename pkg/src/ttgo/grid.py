"""Rectangular domains, tensor-product grids and the index <-> point map.

Indices are 0-based. A point is located on a grid dimension by its
bracketing interval and a barycentric weight, which is what the linear
core interpolation in :mod:`ttgo.tt` consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidGridError, InvalidValueError


@dataclass(frozen=True)
class Domain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise InvalidGridError("domain bounds must be 1-D arrays of equal length >= 1")
        if not np.all(lower < upper):
            raise InvalidGridError(f"domain requires lower < upper, got {lower} / {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)

    def sub(self, start: int, stop: int | None = None) -> "Domain":
        return Domain(self.lower[start:stop], self.upper[start:stop])

    @classmethod
    def box(cls, lo: float, hi: float, d: int) -> "Domain":
        return cls(np.full(d, lo, dtype=float), np.full(d, hi, dtype=float))

    @classmethod
    def concat(cls, *domains: "Domain") -> "Domain":
        return cls(np.concatenate([dm.lower for dm in domains]),
                   np.concatenate([dm.upper for dm in domains]))


@dataclass(frozen=True)
class TaskSplit:
    """Leading ``d1`` task-parameter dims followed by ``d2`` decision dims."""

    d1: int
    d2: int

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 1:
            raise InvalidValueError(f"invalid split d1={self.d1}, d2={self.d2}")

    @property
    def d(self) -> int:
        return self.d1 + self.d2


class Grid:
    """Tensor-product grid given by one strictly increasing node array per dimension."""

    def __init__(self, nodes: Sequence[Sequence[float]]):
        arrs = []
        for k, nd in enumerate(nodes):
            a = np.array(nd, dtype=float)
            if a.ndim != 1 or a.size < 2:
                raise InvalidGridError(f"dimension {k}: need at least 2 nodes")
            if not np.all(np.isfinite(a)) or not np.all(np.diff(a) > 0):
                raise InvalidGridError(f"dimension {k}: nodes must be finite and strictly increasing")
            a.setflags(write=False)
            arrs.append(a)
        if not arrs:
            raise InvalidGridError("grid needs at least one dimension")
        self.nodes: tuple[np.ndarray, ...] = tuple(arrs)

    @property
    def d(self) -> int:
        return len(self.nodes)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.nodes)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.nodes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[-1] for a in self.nodes])

    @property
    def domain(self) -> Domain:
        return Domain(self.lower, self.upper)

    def size(self) -> int:
        return int(np.prod(self.counts, dtype=object))

    def sub(self, start: int, stop: int | None = None) -> "Grid":
        return Grid(self.nodes[start:stop])

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.counts == other.counts
                and all(np.array_equal(a, b) for a, b in zip(self.nodes, other.nodes)))

    def __repr__(self):
        return f"Grid(counts={self.counts})"

    def points(self, indices) -> np.ndarray:
        """Vectorized :func:`grid_point` for an ``(N, d)`` index array."""
        idx = np.asarray(indices)
        if idx.ndim == 1:
            idx = idx[None, :]
        if idx.shape[1] != self.d:
            raise IndexError(f"expected {self.d} index components, got {idx.shape[1]}")
        out = np.empty(idx.shape, dtype=float)
        for k, a in enumerate(self.nodes):
            col = idx[:, k]
            if np.any(col < 0) or np.any(col >= a.size):
                raise IndexError(f"index component {k} out of range [0, {a.size - 1}]")
            out[:, k] = a[col]
        return out

    def nearest(self, points) -> np.ndarray:
        """Index of the nearest node per coordinate (clamped)."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(x.shape, dtype=np.int64)
        for k, a in enumerate(self.nodes):
            i, w = locate_many(a, x[:, k])
            out[:, k] = i + (w > 0.5)
        return out

    def random_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.stack([rng.integers(0, c, size=n) for c in self.counts], axis=1)


def make_uniform_grid(domain: Domain, counts) -> Grid:
    counts = np.broadcast_to(np.asarray(counts), (domain.d,))
    nodes = []
    for lo, hi, n in zip(domain.lower, domain.upper, counts):
        n = int(n)
        if n < 2:
            raise InvalidGridError(f"node count must be >= 2, got {n}")
        a = lo + np.arange(n) * ((hi - lo) / (n - 1))
        a[-1] = hi
        nodes.append(a)
    return Grid(nodes)


def grid_point(grid: Grid, index) -> np.ndarray:
    return grid.points(np.asarray(index)[None, :])[0]


def locate_many(nodes: np.ndarray, values) -> tuple[np.ndarray, np.ndarray]:
    """Bracketing interval and weight for each value on one node array.

    Values outside the node range are clamped. A value sitting on an
    interior node gets that node as left end with weight 0; the last
    node maps to the last interval with weight 1.
    """
    v = np.asarray(values, dtype=float)
    if np.any(np.isnan(v)):
        raise InvalidValueError("cannot locate NaN")
    v = np.clip(v, nodes[0], nodes[-1])
    i = np.searchsorted(nodes, v, side="right") - 1
    i = np.clip(i, 0, nodes.size - 2)
    left = nodes[i]
    w = (v - left) / (nodes[i + 1] - left)
    return i, np.clip(w, 0.0, 1.0)


def locate(grid: Grid, dim: int, value: float) -> tuple[int, float]:
    i, w = locate_many(grid.nodes[dim], np.array([value]))
    return int(i[0]), float(w[0])
