"""Conditional-distribution sampling from a TT density, with prioritization.

The density is ``|P(x)| / Z`` over grid indices; ``Z`` is never formed.
A backward pass stores the suffix sums ``suffix[k] = (sum_x core_k[:, x, :]) @ suffix[k+1]``;
sampling then walks the dimensions left to right, keeping for every sample
the running prefix product ``phi`` of the chosen slices.

Priority ``alpha`` sharpens each one-dimensional conditional by the power
``1 / (1 - alpha + eps)``: ``alpha = 0`` samples exactly, ``alpha = 1``
follows the greedy path of conditional maxima.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidValueError
from .grid import Grid
from .tt import TTCores


@dataclass(frozen=True)
class SamplerState:
    tt: TTCores
    suffix: tuple  # suffix[k] has shape (r_k,); suffix[d] = (1,)
    fibers: tuple  # fibers[k] = core_k contracted with suffix[k + 1], shape (r_{k-1}, n_k)
    fibers_t: tuple  # fibers[k].T, contiguous
    slices: tuple  # slices[k] = core_k as (n_k, r_{k-1}, r_k), contiguous for gathers
    alpha: float = 0.0
    epsilon: float = 1e-6
    seed: int = 0


@dataclass
class SampleBatch:
    indices: np.ndarray
    points: np.ndarray | None = None
    log_weights: np.ndarray | None = None
    degenerate: np.ndarray | None = None  # per-sample flag: a uniform fallback was used
    scores: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.indices)

    def with_points(self, grid: Grid) -> "SampleBatch":
        self.points = grid.points(self.indices)
        return self

    def to_csv(self, path_or_file):
        d = self.indices.shape[1]
        header = [f"i{k}" for k in range(d)]
        if self.points is not None:
            header += [f"x{k}" for k in range(d)]
        header.append("log_weight")
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(header)
            lw = self.log_weights if self.log_weights is not None else np.full(len(self), np.nan)
            for l in range(len(self)):
                row = [str(int(i)) for i in self.indices[l]]
                if self.points is not None:
                    row += [f"{v:.17g}" for v in self.points[l]]
                row.append(f"{lw[l]:.17g}")
                w.writerow(row)
        finally:
            if own:
                fh.close()

    def to_json(self) -> str:
        return json.dumps({
            "indices": self.indices.tolist(),
            "points": None if self.points is None else self.points.tolist(),
            "log_weights": None if self.log_weights is None else self.log_weights.tolist(),
        })


def build_sampler(tt: TTCores, alpha: float = 0.0, seed=0, epsilon: float = 1e-6) -> SamplerState:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidValueError(f"alpha must lie in [0, 1], got {alpha}")
    if epsilon <= 0:
        raise InvalidValueError("epsilon must be positive")
    suffix = [None] * (tt.d + 1)
    suffix[tt.d] = np.ones(1)
    for k in range(tt.d - 1, -1, -1):
        suffix[k] = tt.cores[k].sum(axis=1) @ suffix[k + 1]
    fibers = tuple(np.einsum("rns,s->rn", tt.cores[k], suffix[k + 1]) for k in range(tt.d))
    slices = tuple(np.ascontiguousarray(c.transpose(1, 0, 2)) for c in tt.cores)
    fibers_t = tuple(np.ascontiguousarray(f.T) for f in fibers)
    return SamplerState(tt=tt, suffix=tuple(suffix), fibers=fibers, fibers_t=fibers_t, slices=slices, alpha=float(alpha), epsilon=float(epsilon), seed=seed)


def marginal_weights(state: SamplerState, prefix) -> np.ndarray:
    """Unnormalized marginal ``|phi(prefix) @ core_k[:, x, :] @ suffix[k+1]|`` over the next variable."""
    prefix = list(prefix)
    phi = np.ones(1)
    for k, i in enumerate(prefix):
        phi = phi @ state.tt.cores[k][:, i, :]
    k = len(prefix)
    return np.abs(phi @ state.fibers[k])


def _prioritize(p: np.ndarray, alpha: float, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise ``(p / max p) ** (1 / (1 - alpha + eps))``, unnormalized, in place.

    ``p`` is ``(n_k, samples)``. The power is taken in log space; at
    ``alpha = 0`` the columns are used as they are (the exact
    conditionals). Returns the weights and a mask of all-zero columns,
    which fall back to uniform.
    """
    top = p.max(axis=0)
    dead = top <= 0
    top[dead] = 1.0
    if alpha == 0.0:
        q = np.divide(p, top, out=p)
    else:
        power = 1.0 / (1.0 - alpha + eps)
        with np.errstate(divide="ignore"):
            q = np.log(p, out=p)
        q -= np.log(top)
        q *= power
        np.exp(q, out=q)
    if dead.any():
        q[:, dead] = 1.0
    return q, dead


def _draw(weights: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-CDF draw per column of unnormalized ``(n_k, samples)`` weights.

    The draw returns the number of CDF values ``<= u * total``, so a
    uniform landing exactly on a step picks the lower index and
    zero-weight nodes are never chosen. The CDF is walked in two levels
    (blocks of about ``sqrt(n_k)`` nodes, then inside one block).
    Returns the indices and the chosen normalized probabilities.
    """
    m, n = weights.shape
    cols = np.arange(n)
    size = max(1, int(np.sqrt(m)))
    nb = -(-m // size)
    w = weights
    if nb * size != m:
        w = np.concatenate([weights, np.zeros((nb * size - m, n))])
    w3 = w.reshape(nb, size, n)
    bcdf = np.cumsum(w3.sum(axis=1), axis=0)
    total = bcdf[-1]
    target = u * total
    b = np.minimum(np.count_nonzero(bcdf <= target, axis=0), nb - 1)
    start = np.where(b > 0, bcdf[np.maximum(b - 1, 0), cols], 0.0)
    inner = np.cumsum(w3[b, :, cols], axis=1)
    inner += start[:, None]
    j = np.minimum(np.count_nonzero(inner <= target[:, None], axis=1), size - 1)
    idx = np.minimum(b * size + j, m - 1)
    return idx, weights[idx, cols] / total


def sample(state: SamplerState, n: int, grid: Grid | None = None) -> SampleBatch:
    """Draw ``n`` prioritized samples.

    Uniform variates come from one generator seeded with ``state.seed``
    and are consumed row-major as an ``(n, d)`` block, so sample ``l``
    depends only on the seed and ``l``; any split of the batch into
    row ranges reproduces the same draws.
    """
    if n < 1:
        raise InvalidValueError("n must be >= 1")
    tt = state.tt
    u = np.random.default_rng(state.seed).random((n, tt.d))
    return _sample_block(state, u, grid)


def _sample_block(state: SamplerState, u: np.ndarray, grid: Grid | None) -> SampleBatch:
    tt = state.tt
    n = u.shape[0]
    phi = np.ones((n, 1))
    out = np.empty((n, tt.d), dtype=np.int64)
    logw = np.zeros(n)
    dead_any = np.zeros(n, dtype=bool)
    for k in range(tt.d):
        p = state.fibers_t[k] @ phi.T
        np.abs(p, out=p)
        weights, dead = _prioritize(p, state.alpha, state.epsilon)
        x, px = _draw(weights, u[:, k])
        out[:, k] = x
        with np.errstate(divide="ignore"):
            logw += np.log(px)
        dead_any |= dead
        phi = np.matmul(phi[:, None, :], state.slices[k][x])[:, 0, :]
        # keep the prefix bounded; only its direction matters
        scale = np.abs(phi).max(axis=1, keepdims=True)
        scale[scale == 0] = 1.0
        phi /= scale
    batch = SampleBatch(indices=out, log_weights=logw, degenerate=dead_any)
    return batch.with_points(grid) if grid is not None else batch


def top_k_deterministic(state: SamplerState, k: int, beam: int, grid: Grid | None = None) -> SampleBatch:
    """Beam search for the ``k`` most probable multi-indices.

    Partial paths are scored by the product of their normalized
    conditionals (the ``alpha = 0`` ones); the ``beam`` best survive each
    dimension. With ``beam`` at least the grid size this is exhaustive.
    Ties keep the lexicographically smaller index.
    """
    if k < 1:
        raise InvalidValueError("k must be >= 1")
    if beam < k:
        raise InvalidValueError(f"beam ({beam}) must be >= k ({k})")
    tt = state.tt
    paths = np.zeros((1, 0), dtype=np.int64)
    scores = np.zeros(1)
    phi = np.ones((1, 1))
    for dim in range(tt.d):
        p = np.abs(phi @ state.fibers[dim])
        tot = p.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            logc = np.where(tot > 0, np.log(p) - np.log(tot), -np.log(p.shape[1]))
        cand = (scores[:, None] + logc).ravel()
        # stable sort on -score keeps lexicographic order among ties
        order = np.argsort(-cand, kind="stable")[:beam]
        parent, x = np.divmod(order, p.shape[1])
        paths = np.concatenate([paths[parent], x[:, None]], axis=1)
        scores = cand[order]
        phi = np.einsum("nr,rns->ns", phi[parent], tt.cores[dim][:, x, :])
        scale = np.abs(phi).max(axis=1, keepdims=True)
        scale[scale == 0] = 1.0
        phi /= scale
    batch = SampleBatch(indices=paths[:k], log_weights=scores[:k], scores=scores[:k],
                        degenerate=np.zeros(min(k, len(paths)), dtype=bool))
    return batch.with_points(grid) if grid is not None else batch
