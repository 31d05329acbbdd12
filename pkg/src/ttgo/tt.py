"""Tensor-train cores: evaluation on indices and points, and conditioning.

Core ``k`` has shape ``(r[k], n[k], r[k+1])`` with ``r[0] = r[d] = 1``.
Evaluations run as batched row-vector x matrix chains so that the
intermediate state per query never exceeds the rank.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import EmptyConditionError, InvalidValueError, MalformedModelError
from .grid import Grid, TaskSplit, locate_many


class TTCores:
    """An immutable list of third-order TT cores."""

    def __init__(self, cores: Sequence[np.ndarray], check_finite: bool = True):
        cs = []
        for k, c in enumerate(cores):
            a = np.array(c, dtype=float)
            if a.ndim != 3:
                raise MalformedModelError(f"core {k} must be 3-D, got shape {a.shape}")
            a.setflags(write=False)
            cs.append(a)
        if not cs:
            raise MalformedModelError("a TT needs at least one core")
        if cs[0].shape[0] != 1 or cs[-1].shape[2] != 1:
            raise MalformedModelError("boundary ranks must be 1")
        for k in range(len(cs) - 1):
            if cs[k].shape[2] != cs[k + 1].shape[0]:
                raise MalformedModelError(
                    f"rank mismatch between core {k} ({cs[k].shape}) and core {k + 1} ({cs[k + 1].shape})")
        if check_finite and not all(np.all(np.isfinite(a)) for a in cs):
            raise MalformedModelError("core entries must be finite")
        self.cores: tuple[np.ndarray, ...] = tuple(cs)

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    def __repr__(self):
        return f"TTCores(counts={self.counts}, ranks={self.ranks})"

    def full(self) -> np.ndarray:
        """Materialize the dense tensor. Only for small models."""
        out = self.cores[0].reshape(self.counts[0], -1)
        for c in self.cores[1:]:
            out = out @ c.reshape(c.shape[0], -1)
            out = out.reshape(-1, c.shape[2])
        return out.reshape(self.counts)

    def eval_indices(self, indices) -> np.ndarray:
        """Values at an ``(N, d)`` array of multi-indices."""
        idx = _as_index_array(indices, self.d)
        for k, n in enumerate(self.counts):
            if np.any(idx[:, k] < 0) or np.any(idx[:, k] >= n):
                raise IndexError(f"index component {k} out of range [0, {n - 1}]")
        v = self.cores[0][0, idx[:, 0], :]
        for k in range(1, self.d):
            v = np.einsum("nr,rns->ns", v, self.cores[k][:, idx[:, k], :])
        return v[:, 0]

    def eval_points(self, grid: Grid, points) -> np.ndarray:
        """Values at an ``(N, d)`` array of points, linear in each core between nodes."""
        _check_grid(self, grid)
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if x.shape[1] != self.d:
            raise InvalidValueError(f"expected points of dimension {self.d}, got {x.shape[1]}")
        v = np.ones((x.shape[0], 1))
        for k in range(self.d):
            v = np.einsum("nr,rns->ns", v, _interp_slices(self.cores[k], grid.nodes[k], x[:, k]))
        return v[:, 0]


def _as_index_array(indices, d: int) -> np.ndarray:
    idx = np.asarray(indices)
    if idx.ndim == 1:
        idx = idx[None, :]
    if idx.ndim != 2 or idx.shape[1] != d:
        raise IndexError(f"expected multi-indices with {d} components")
    return idx.astype(np.int64, copy=False)


def _check_grid(tt: TTCores, grid: Grid):
    if tt.counts != grid.counts:
        raise MalformedModelError(f"model counts {tt.counts} do not match grid counts {grid.counts}")


def _interp_slices(core: np.ndarray, nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linearly interpolated slices, shape ``(r_left, N, r_right)``."""
    i, w = locate_many(nodes, values)
    return core[:, i, :] * (1.0 - w)[None, :, None] + core[:, i + 1, :] * w[None, :, None]


def tt_eval_index(tt: TTCores, index) -> float:
    return float(tt.eval_indices(np.asarray(index)[None, :])[0])


def tt_eval_continuous(tt: TTCores, grid: Grid, point) -> float:
    return float(tt.eval_points(grid, np.asarray(point, dtype=float)[None, :])[0])


def tt_condition(tt: TTCores, grid: Grid, split: TaskSplit, task_point) -> TTCores:
    """Fix the leading ``split.d1`` variables at ``task_point``.

    The task cores are collapsed to their interpolated slices and the
    resulting row vector is folded into the first decision core.
    """
    _check_grid(tt, grid)
    if split.d != tt.d:
        raise InvalidValueError(f"split {split} does not match model dimension {tt.d}")
    d1 = split.d1
    if d1 >= tt.d:
        raise EmptyConditionError("conditioning on every dimension leaves an empty model")
    if d1 == 0:
        return tt
    xt = np.asarray(task_point, dtype=float).reshape(-1)
    if xt.size != d1:
        raise InvalidValueError(f"task point must have {d1} components, got {xt.size}")
    v = np.ones((1, 1))
    for k in range(d1):
        v = np.einsum("nr,rns->ns", v, _interp_slices(tt.cores[k], grid.nodes[k], xt[k:k + 1]))
    first = np.einsum("r,rns->ns", v[0], tt.cores[d1])[None]
    return TTCores([first, *tt.cores[d1 + 1:]])


def tt_num_params(tt: TTCores) -> int:
    return int(sum(c.size for c in tt.cores))


def random_tt(counts, ranks, rng: np.random.Generator, nonneg: bool = False) -> TTCores:
    """Random cores with the given counts and internal ranks ``(r_1, ..., r_{d-1})``."""
    chain = (1, *ranks, 1)
    draw = rng.random if nonneg else rng.standard_normal
    return TTCores([draw((chain[k], n, chain[k + 1])) for k, n in enumerate(counts)])


def tt_from_dense(tensor: np.ndarray, eps: float = 0.0) -> TTCores:
    """Exact (or ``eps``-truncated) TT-SVD of a small dense tensor.

    Used to encode reference tensors in tests and demos.
    """
    a = np.asarray(tensor, dtype=float)
    shape = a.shape
    cores = []
    r = 1
    rest = a.reshape(1, -1)
    for n in shape[:-1]:
        mat = rest.reshape(r * n, -1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        keep = max(1, int(np.sum(s > eps * s[0])))
        cores.append(u[:, :keep].reshape(r, n, keep))
        rest = s[:keep, None] * vt[:keep]
        r = keep
    cores.append(rest.reshape(r, shape[-1], 1))
    return TTCores(cores)
