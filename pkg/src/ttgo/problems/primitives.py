"""Radial-basis motion primitives and their boundary/limit-respecting reshaping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidValueError


def default_window(n_steps: int) -> int:
    return 2 * math.ceil(n_steps / 40) + 1


@dataclass
class MotionPrimitive:
    J: int = 2
    gamma: float | None = None
    centers: np.ndarray | None = None
    N: int = 100
    window: int | None = None

    def __post_init__(self):
        if self.J < 1:
            raise InvalidValueError("J must be >= 1")
        if self.centers is None:
            self.centers = np.array([0.5]) if self.J == 1 else np.linspace(0.0, 1.0, self.J)
        self.centers = np.asarray(self.centers, dtype=float)
        if self.centers.shape != (self.J,):
            raise InvalidValueError("need one center per basis function")
        if self.gamma is None:
            self.gamma = 4.0 * self.J ** 2
        if self.gamma <= 0:
            raise InvalidValueError("gamma must be positive")
        if self.N < 1:
            raise InvalidValueError("N must be >= 1")
        if self.window is None:
            self.window = default_window(self.N)
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidValueError("window must be a positive odd integer")

    @property
    def phase(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    def basis(self) -> np.ndarray:
        """Basis values, shape ``(J, N + 1)``."""
        t = self.phase
        return np.exp(-self.gamma * (t[None, :] - self.centers[:, None]) ** 2)


def rbf_trajectory(mp: MotionPrimitive, weights) -> np.ndarray:
    """Weighted basis sum on the phase grid; weights ``(..., J)`` give ``(..., N + 1)``."""
    w = np.asarray(weights, dtype=float)
    if w.shape[-1] != mp.J:
        raise InvalidValueError(f"expected {mp.J} weights, got {w.shape[-1]}")
    return w @ mp.basis()


def shape_trajectory(tau_hat, tau0, tau1, limits, window: int) -> np.ndarray:
    """Reshape sampled curves to hit ``tau0``/``tau1`` and stay within ``limits``.

    The curve is shifted and tilted to meet the boundary values, clipped,
    padded with ``window - 1`` copies of each boundary value and smoothed by
    a moving average of width ``window``; the ``N + window`` averaged
    samples are mapped back onto the ``N + 1`` phase points by linear
    interpolation. Every output sample is a convex combination of clipped
    values, and the first and last are exactly ``tau0`` and ``tau1``.

    ``tau_hat`` is ``(..., N + 1)``; ``tau0``, ``tau1`` and both limits
    broadcast against ``tau_hat[..., 0]``.
    """
    tau_hat = np.asarray(tau_hat, dtype=float)
    lead = tau_hat.shape[:-1]
    lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), lead) for v in limits)
    tau0 = np.broadcast_to(np.asarray(tau0, dtype=float), lead)
    tau1 = np.broadcast_to(np.asarray(tau1, dtype=float), lead)
    if np.any(lo > hi):
        raise InvalidValueError("lower limit above upper limit")
    if np.any(tau0 < lo) or np.any(tau0 > hi) or np.any(tau1 < lo) or np.any(tau1 > hi):
        raise InvalidValueError("boundary values must lie within the limits")
    if window < 1 or window % 2 == 0:
        raise InvalidValueError("window must be a positive odd integer")
    n = tau_hat.shape[-1]
    t = np.linspace(0.0, 1.0, n)
    start, end = tau_hat[..., :1], tau_hat[..., -1:]
    z_hat = tau_hat + (tau0 - start[..., 0])[..., None] + t * (tau1 - tau0 + start[..., 0] - end[..., 0])[..., None]
    z = np.clip(z_hat, lo[..., None], hi[..., None])
    z[..., 0] = tau0
    z[..., -1] = tau1
    if window == 1:
        return z
    pad = window - 1
    padded = np.concatenate([np.repeat(z[..., :1], pad, axis=-1), z,
                             np.repeat(z[..., -1:], pad, axis=-1)], axis=-1)
    csum = np.cumsum(padded, axis=-1)
    csum = np.concatenate([np.zeros(lead + (1,)), csum], axis=-1)
    smooth = (csum[..., window:] - csum[..., :-window]) / window  # length n + window - 1
    pos = t * (smooth.shape[-1] - 1)
    i = np.minimum(pos.astype(np.int64), smooth.shape[-1] - 2)
    w = pos - i
    out = smooth[..., i] * (1.0 - w) + smooth[..., i + 1] * w
    # exact in arithmetic; pin against cumulative-sum rounding
    out = np.clip(out, lo[..., None], hi[..., None])
    out[..., 0] = tau0
    out[..., -1] = tau1
    return out
