"""maxvol, matrix skeleton decomposition and black-box TT-cross.

The TT-cross here is the one-site interpolative sweep: nested left index
sets grow from the left, nested right index sets from the right, and every
core is an interpolation matrix ``Q @ inv(Q[rows])`` built from the thin QR
of an oracle-evaluated unfolding.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import InvalidValueError, PivotError, PoisonedEvaluationError
from .grid import Grid
from .tt import TTCores

log = logging.getLogger(__name__)


@dataclass
class CrossOptions:
    max_rank: int = 20
    n_sweeps: int = 10
    tol: float = 1e-4
    kick: int = 2
    seed: int = 0
    maxvol_delta: float = 0.01
    n_validation: int = 1000
    init_rank: int = 2
    rank_tol: float = 1e-12

    def __post_init__(self):
        if self.max_rank < 1:
            raise InvalidValueError("max_rank must be >= 1")
        if self.tol <= 0:
            raise InvalidValueError("tol must be positive")
        if self.maxvol_delta < 0:
            raise InvalidValueError("maxvol_delta must be >= 0")
        if self.n_sweeps < 1 or self.kick < 0 or self.n_validation < 1:
            raise InvalidValueError("n_sweeps >= 1, kick >= 0 and n_validation >= 1 required")


@dataclass
class CrossReport:
    oracle_calls: int = 0
    validation_calls: int = 0
    sweeps: int = 0
    ranks: tuple = ()
    rel_rms: list = field(default_factory=list)
    max_rel: list = field(default_factory=list)
    probe_rel: list = field(default_factory=list)
    converged: bool = False
    budget_exhausted: bool = False
    zero_reference: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ranks"] = list(self.ranks)
        return out


# --------------------------------------------------------------------------
# maxvol and matrix cross


def maxvol(a, delta: float = 0.01, max_iters: int | None = None) -> np.ndarray:
    """Rows of a tall ``m x r`` matrix spanning a locally maximal-volume submatrix.

    On return every entry of ``a @ inv(a[rows])`` is bounded by ``1 + delta``
    in magnitude. Swaps pick the largest coefficient; ties go to the lowest
    row (row-major argmax).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InvalidValueError("maxvol expects a 2-D array")
    m, r = a.shape
    if m < r:
        raise InvalidValueError(f"maxvol needs m >= r, got {a.shape}")
    if r == 0:
        return np.zeros(0, dtype=np.int64)
    if m == r:
        if np.linalg.matrix_rank(a) < r:
            raise PivotError("square input is singular")
        return np.arange(m, dtype=np.int64)

    # start from the most independent rows (column-pivoted QR of a.T)
    _, _, piv = scipy.linalg.qr(a.T, mode="economic", pivoting=True)
    rows = np.asarray(piv[:r], dtype=np.int64)
    sub = a[rows]
    if not np.all(np.isfinite(sub)) or abs(np.linalg.slogdet(sub)[1]) == np.inf:
        raise PivotError("no non-singular starting submatrix")
    bound = 1.0 + delta
    max_iters = max_iters or 100 * r + 100
    it = 0
    while True:
        try:
            b = np.linalg.solve(sub.T, a.T).T
        except np.linalg.LinAlgError as exc:
            raise PivotError("singular submatrix during maxvol") from exc
        # rank-1 updates between fresh solves; a fresh solve certifies the exit
        fresh = True
        while it < max_iters:
            flat = int(np.argmax(np.abs(b)))
            i, j = divmod(flat, r)
            bij = b[i, j]
            if abs(bij) <= bound:
                break
            rows[j] = i
            col = b[:, j].copy()
            row = b[i, :].copy()
            row[j] -= 1.0
            b -= np.outer(col, row) / bij
            fresh = False
            it += 1
        sub = a[rows]
        if fresh or it >= max_iters:
            if it >= max_iters:
                log.warning("maxvol hit iteration limit %d", max_iters)
            return rows


@dataclass
class Skeleton:
    rows: np.ndarray
    cols: np.ndarray
    col_factor: np.ndarray  # P[:, cols]
    pivot_inv: np.ndarray  # inv(P[rows, cols])
    row_factor: np.ndarray  # P[rows, :]

    def full(self) -> np.ndarray:
        return self.col_factor @ self.pivot_inv @ self.row_factor


def _orth_basis(mat: np.ndarray, rank_tol: float, min_rank: int = 1) -> np.ndarray:
    """Orthonormal basis of the numerically significant column space."""
    q, r, _ = scipy.linalg.qr(mat, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        keep = min_rank
    else:
        keep = max(min_rank, int(np.sum(diag > rank_tol * diag[0])))
    return q[:, :min(keep, q.shape[1])]


def matrix_cross(oracle2d, shape, rank: int, opts: CrossOptions | None = None,
                 max_iters: int = 10) -> Skeleton:
    """Skeleton decomposition from alternating maxvol on columns and rows.

    ``oracle2d(i, j)`` evaluates entries for equal-length index arrays.
    """
    opts = opts or CrossOptions()
    n1, n2 = shape
    if rank < 1 or rank > min(n1, n2):
        raise InvalidValueError(f"rank must be in [1, {min(n1, n2)}]")
    rng = np.random.default_rng(opts.seed)
    all_i = np.arange(n1)
    all_j = np.arange(n2)

    def block(ii, jj):
        gi, gj = np.meshgrid(ii, jj, indexing="ij")
        vals = np.asarray(oracle2d(gi.ravel(), gj.ravel()), dtype=float).reshape(gi.shape)
        if not np.all(np.isfinite(vals)):
            raise PoisonedEvaluationError("non-finite matrix entry")
        return vals

    cols = np.sort(rng.choice(n2, size=rank, replace=False))
    rows = None
    for _ in range(max_iters):
        q, _ = np.linalg.qr(block(all_i, cols))
        new_rows = np.sort(maxvol(q, opts.maxvol_delta))
        q, _ = np.linalg.qr(block(new_rows, all_j).T)
        new_cols = np.sort(maxvol(q, opts.maxvol_delta))
        if rows is not None and np.array_equal(new_rows, rows) and np.array_equal(new_cols, cols):
            break
        rows, cols = new_rows, new_cols
    c = block(all_i, cols)
    r = block(rows, all_j)
    inter = r[:, cols]
    if np.linalg.cond(inter) < 1e12:
        pinv = np.linalg.inv(inter)
    else:
        # near-singular intersection: invert through the QR of the column factor
        q, rr = np.linalg.qr(c)
        pinv = np.linalg.pinv(rr, rcond=1e-13) @ np.linalg.pinv(q[rows], rcond=1e-13)
    return Skeleton(rows=rows, cols=cols, col_factor=c, pivot_inv=pinv, row_factor=r)


# --------------------------------------------------------------------------
# TT-cross


def parallel_oracle(oracle, workers: int = 1, chunk: int = 65536):
    """Wrap a batched oracle so large batches fan out over a thread pool.

    Chunks are concatenated in submission order, so results do not depend
    on the worker count.
    """
    if workers <= 1:
        return oracle

    def wrapped(indices):
        indices = np.asarray(indices)
        if len(indices) <= chunk:
            return np.asarray(oracle(indices), dtype=float)
        parts = [indices[s:s + chunk] for s in range(0, len(indices), chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.concatenate([np.asarray(v, dtype=float) for v in pool.map(oracle, parts)])

    return wrapped


class ValidationResult(NamedTuple):
    rel_rms: float
    max_rel: float
    zero_reference: bool = False


def _call(oracle, idx: np.ndarray) -> np.ndarray:
    vals = np.asarray(oracle(idx), dtype=float).reshape(-1)
    if vals.shape[0] != idx.shape[0]:
        raise InvalidValueError(f"oracle returned {vals.shape[0]} values for {idx.shape[0]} indices")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        first = idx[int(np.argmax(bad))]
        raise PoisonedEvaluationError(f"oracle returned a non-finite value at index {first.tolist()}",
                                      index=first)
    return vals


def _errors(ref: np.ndarray, approx: np.ndarray) -> ValidationResult:
    err = approx - ref
    scale = float(np.sqrt(np.mean(ref ** 2)))
    if scale == 0.0:
        return ValidationResult(float(np.sqrt(np.mean(err ** 2))), float(np.max(np.abs(err))), True)
    return ValidationResult(float(np.sqrt(np.mean(err ** 2)) / scale),
                            float(np.max(np.abs(err)) / scale))


def cross_validation_error(oracle, tt: TTCores, grid: Grid, n: int = 1000, seed=0) -> ValidationResult:
    """Relative RMS and max errors of ``tt`` against ``oracle`` at random grid indices.

    Both errors are normalized by the RMS of the sampled oracle values; if
    those are all zero the absolute errors are returned and flagged.
    """
    if n < 1:
        raise InvalidValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    idx = grid.random_indices(n, rng)
    return _errors(_call(oracle, idx), tt.eval_indices(idx))


def _superblock(left: np.ndarray, n: int, right: np.ndarray) -> np.ndarray:
    """All ``(prefix, i, suffix)`` multi-indices, ordered prefix-major."""
    rl, k = left.shape
    rr, m = right.shape
    idx = np.empty((rl, n, rr, k + 1 + m), dtype=np.int64)
    idx[..., :k] = left[:, None, None, :]
    idx[..., k] = np.arange(n)[None, :, None]
    idx[..., k + 1:] = right[None, None, :, :]
    return idx.reshape(-1, k + 1 + m)


def _capacity(counts, k: int) -> tuple[int, int]:
    """Largest possible sizes of the prefix / suffix sets at boundary k."""
    left = int(np.prod(counts[:k], dtype=float)) if k else 1
    right = int(np.prod(counts[k:], dtype=float)) if k < len(counts) else 1
    return min(left, 1 << 30), min(right, 1 << 30)


def _fiber_chains(score, counts, starts: np.ndarray, passes: int, rng: np.random.Generator) -> np.ndarray:
    """Coordinate-wise resampling of index chains along full fibers.

    For each dimension in turn, every chain evaluates ``score`` on the whole
    fiber through its current index and redraws that coordinate with
    probability proportional to the scores (uniformly if they all vanish).
    Returns every visited index, ``(passes * d * chains, d)``.
    """
    cur = starts.copy()
    visited = []
    c = cur.shape[0]
    for _ in range(passes):
        for k, n in enumerate(counts):
            idx = np.repeat(cur, n, axis=0)
            idx[:, k] = np.tile(np.arange(n), c)
            w = score(idx).reshape(c, n)
            tot = w.sum(axis=1, keepdims=True)
            w = np.where(tot > 0, w / np.where(tot > 0, tot, 1.0), 1.0 / n)
            cdf = np.cumsum(w, axis=1)
            u = rng.random(c) * cdf[:, -1]
            cur[:, k] = np.minimum((cdf <= u[:, None]).sum(axis=1), n - 1)
            visited.append(cur.copy())
    return np.concatenate(visited)


class _Sweeper:
    def __init__(self, oracle, counts, opts: CrossOptions, report: CrossReport):
        self.oracle = oracle
        self.counts = tuple(int(c) for c in counts)
        self.d = len(self.counts)
        self.opts = opts
        self.report = report
        self.rng = np.random.default_rng(opts.seed)
        d = self.d
        self.left = [np.zeros((1, 0), dtype=np.int64)] + [None] * (d - 1)
        self.right = [None] * d + [np.zeros((1, 0), dtype=np.int64)]
        self._last = None  # superblock of the final core in the last LR pass
        # chain end points and their values; they join the validation set
        self.probe_idx = np.zeros((0, d), dtype=np.int64)
        self.probe_ref = np.zeros(0)

    def _remember(self, idx, vals):
        self.probe_idx = np.concatenate([self.probe_idx, idx])
        self.probe_ref = np.concatenate([self.probe_ref, vals])

    def evaluate(self, k: int) -> np.ndarray:
        left, right = self.left[k], self.right[k + 1]
        idx = _superblock(left, self.counts[k], right)
        vals = _call(self.oracle, idx)
        self.report.oracle_calls += idx.shape[0]
        return vals.reshape(left.shape[0], self.counts[k], right.shape[0])

    def _abs_oracle(self, idx):
        self.report.oracle_calls += idx.shape[0]
        return np.abs(_call(self.oracle, idx))

    def init_right(self):
        """Nested suffix sets from random fibers, weighted by |oracle|."""
        r0 = min(self.opts.init_rank, self.opts.max_rank)
        chains = max(2 * r0, 4)
        starts = np.stack([self.rng.integers(0, n, size=chains) for n in self.counts], axis=1)
        pool = _fiber_chains(self._abs_oracle, self.counts, starts, 2, self.rng)
        pool = pool[-chains:]
        self.report.oracle_calls += chains
        signed = _call(self.oracle, pool)
        self._remember(pool, signed)
        vals = np.abs(signed)
        p = vals / vals.sum() if vals.sum() > 0 else None
        nonzero = chains if p is None else int(np.count_nonzero(p))
        pick = self.rng.choice(chains, size=min(r0, nonzero), replace=False, p=p)
        chosen = pool[np.sort(pick)]
        for k in range(1, self.d):
            self.right[k] = np.unique(chosen[:, k:], axis=0)

    def basis(self, mat: np.ndarray) -> np.ndarray:
        if min(mat.shape) <= self.opts.max_rank:
            return _orth_basis(mat, self.opts.rank_tol)
        # oversampled unfolding: keep the dominant max_rank directions
        u, s, _ = np.linalg.svd(mat, full_matrices=False)
        keep = max(1, int(np.sum(s > self.opts.rank_tol * s[0]))) if s[0] > 0 else 1
        return u[:, :min(keep, self.opts.max_rank)]

    def left_to_right(self) -> list:
        cores = []
        n = self.counts
        for k in range(self.d - 1):
            t = self.evaluate(k)
            rl = t.shape[0]
            q = self.basis(t.reshape(rl * n[k], -1))
            rows = maxvol(q, self.opts.maxvol_delta)
            cores.append((q @ np.linalg.inv(q[rows])).reshape(rl, n[k], -1))
            a, i = np.divmod(rows, n[k])
            self.left[k + 1] = np.concatenate([self.left[k][a], i[:, None]], axis=1)
        t = self.evaluate(self.d - 1)
        self._last = t
        cores.append(t)
        return cores

    def right_to_left(self) -> list:
        cores = [None] * self.d
        n = self.counts
        for k in range(self.d - 1, 0, -1):
            if k == self.d - 1 and self._last is not None:
                t = self._last
            else:
                t = self.evaluate(k)
            rl, _, rr = t.shape
            q = self.basis(t.reshape(rl, n[k] * rr).T)
            cols = maxvol(q, self.opts.maxvol_delta)
            cores[k] = (q @ np.linalg.inv(q[cols])).T.reshape(-1, n[k], rr)
            i, b = np.divmod(cols, rr)
            self.right[k] = np.concatenate([i[:, None], self.right[k + 1][b]], axis=1)
        self._last = None
        cores[0] = self.evaluate(0)
        return cores

    def kick(self, tt: TTCores):
        """Enrich the suffix sets where the current model is worst.

        A fresh pool of random multi-indices, plus the end points of up to
        ``min(4 kick, 16)`` fiber chains driven by the residual, is scored by the
        absolute residual; the suffixes of the worst points (then random ones, if
        the pool is exhausted) are appended at every boundary. Sets may
        exceed ``max_rank`` by ``kick``; the surplus is truncated away by
        the SVD in :meth:`basis`.

        Returns the largest residual at the chain end points relative to
        the largest magnitude seen there (0 when ``kick`` is 0).
        """
        if self.opts.kick == 0:
            return 0.0

        def residual(idx):
            self.report.oracle_calls += idx.shape[0]
            return np.abs(_call(self.oracle, idx) - tt.eval_indices(idx))

        size = max(self.opts.n_validation, 64 * self.opts.kick)
        pool = np.stack([self.rng.integers(0, n, size=size) for n in self.counts], axis=1)
        chains = min(4 * self.opts.kick, 16)
        starts = pool[:chains]
        ends = _fiber_chains(residual, self.counts, starts, 2, self.rng)[-chains:]
        pool = np.concatenate([ends, pool])
        self.report.oracle_calls += pool.shape[0]
        ref = _call(self.oracle, pool)
        resid = np.abs(ref - tt.eval_indices(pool))
        self._remember(ends, ref[:ends.shape[0]])
        scale = np.max(np.abs(ref))
        probe = float(resid.max() / scale) if scale > 0 else 0.0
        order = np.argsort(-resid, kind="stable")
        ranked = pool[order[resid[order] > 0]]
        spare = pool[order[resid[order] == 0]]
        for k in range(self.d - 1, 0, -1):
            cap = min(self.opts.max_rank + self.opts.kick, *_capacity(self.counts, k))
            cur = self.right[k]
            want = min(cap, cur.shape[0] + self.opts.kick)
            for cand in (ranked, spare):
                if cur.shape[0] >= want or cand.shape[0] == 0:
                    continue
                merged = np.concatenate([cur, cand[:, k:]], axis=0)
                _, first = np.unique(merged, axis=0, return_index=True)
                keep = np.sort(first)
                keep = np.concatenate([keep[keep < cur.shape[0]], keep[keep >= cur.shape[0]]])
                cur = merged[keep[:want]]
            self.right[k] = cur
        return probe


def tt_cross(oracle, grid, opts: CrossOptions | None = None) -> tuple[TTCores, CrossReport]:
    """Build a TT model of a black-box tensor from a batched element oracle.

    Parameters
    ----------
    oracle : callable
        Maps an ``(N, d)`` integer array of multi-indices to ``N`` finite reals.
    grid : Grid or sequence of int
        Supplies the node count per dimension.
    opts : CrossOptions

    Returns
    -------
    (TTCores, CrossReport)
        The model with the lowest validation error over all sweeps and a
        record of oracle calls, ranks and per-sweep validation errors.
    """
    opts = opts or CrossOptions()
    counts = grid.counts if isinstance(grid, Grid) else tuple(int(c) for c in grid)
    d = len(counts)
    report = CrossReport()
    rng = np.random.default_rng([opts.seed, 1])
    val_idx = np.stack([rng.integers(0, n, size=opts.n_validation) for n in counts], axis=1)
    val_ref = _call(oracle, val_idx)
    report.validation_calls = opts.n_validation

    if d == 1:
        vals = _call(oracle, np.arange(counts[0])[:, None])
        report.oracle_calls += counts[0]
        tt = TTCores([vals.reshape(1, -1, 1)])
        res = _errors(val_ref, tt.eval_indices(val_idx))
        report.rel_rms.append(res.rel_rms)
        report.max_rel.append(res.max_rel)
        report.sweeps, report.ranks, report.converged = 1, tt.ranks, True
        report.zero_reference = res.zero_reference
        return tt, report

    sw = _Sweeper(oracle, counts, opts, report)
    sw.init_right()
    models = []
    prev = None
    for sweep in range(opts.n_sweeps):
        sw.left_to_right()
        tt = TTCores(sw.right_to_left())
        check_idx = np.concatenate([val_idx, sw.probe_idx])
        check_ref = np.concatenate([val_ref, sw.probe_ref])
        res = _errors(check_ref, tt.eval_indices(check_idx))
        report.sweeps = sweep + 1
        report.rel_rms.append(res.rel_rms)
        report.max_rel.append(res.max_rel)
        report.zero_reference = res.zero_reference
        log.debug("sweep %d: ranks %s, rel rms %.3e", sweep + 1, tt.ranks, res.rel_rms)
        models.append(tt)
        # random validation points can miss sharp features; residual-driven
        # fiber chains must agree before the model counts as converged
        probe = sw.kick(tt)
        report.probe_rel.append(probe)
        if res.rel_rms < opts.tol and probe < max(opts.tol, 1e-8) ** 0.5:
            report.converged = True
            break
        # a stalled error only counts once the rank chain stopped changing
        if (prev is not None and prev[1] == tt.ranks and prev[0] > 0
                and abs(prev[0] - res.rel_rms) / prev[0] < opts.tol / 10):
            report.converged = True
            break
        prev = (res.rel_rms, tt.ranks)
    # rank the sweep models on everything known by now, latest first on ties
    check_idx = np.concatenate([val_idx, sw.probe_idx])
    check_ref = np.concatenate([val_ref, sw.probe_ref])
    errs = [_errors(check_ref, m.eval_indices(check_idx)).rel_rms for m in models]
    pick = len(models) - 1 - int(np.argmin(errs[::-1]))
    best, best_err = models[pick], errs[pick]
    if not report.converged:
        report.budget_exhausted = True
        warnings.warn(f"tt_cross stopped after {report.sweeps} sweeps at rel. RMS {best_err:.3e} "
                      f"(target {opts.tol:g})", RuntimeWarning, stacklevel=2)
    report.ranks = best.ranks
    return best, report
