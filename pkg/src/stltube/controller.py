"""Closed-form tube-following control law.

The law reads only the state, the time and the tube; it never sees the
plant.  Each state coordinate is mapped into (-1, 1) across the tube, pushed
through a log-odds transform that blows up at the boundary, and fed back
with a diagonal gain that grows as the state nears the boundary.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

DEFAULT_DELTA = 1.0 - 1e-9


@dataclass(frozen=True)
class ControllerParams:
    k: float = 1.0
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not math.isfinite(self.k) or self.k == 0:
            raise ValueError(f"gain k must be a nonzero finite real, got {self.k}")
        if not 0 < self.delta < 1:
            raise ValueError(f"clamp threshold delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class ErrorState:
    e: np.ndarray
    eps: np.ndarray
    xi_diag: np.ndarray
    clamped: int


def _center_width(tube, t):
    lo = tube.lower(t)
    hi = tube.upper(t)
    return hi + lo, hi - lo


def normalized_error(tube, x, t):
    """``e_i = (2 x_i - (U_i + L_i)) / (U_i - L_i)``; inside the tube iff every ``|e_i| < 1``."""
    s, m = _center_width(tube, t)
    return (2.0 * np.asarray(x, dtype=float) - s) / m


def error_state(tube, x, t, delta=DEFAULT_DELTA):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("state contains NaN")
    s, m = _center_width(tube, t)
    e = (2.0 * x - s) / m
    ec = np.clip(e, -delta, delta)
    clamped = int(np.count_nonzero(ec != e))
    eps = np.log1p(ec) - np.log1p(-ec)
    xi = 4.0 / (m * (1.0 - ec * ec))
    return ErrorState(ec, eps, xi, clamped)


def control(tube, params, x, t):
    """``u = -k xi(x, t) eps(x, t)`` with ``e`` clamped to ``[-delta, delta]``."""
    return control_with_clamps(tube, params, x, t)[0]


def control_with_clamps(tube, params, x, t):
    """Like :func:`control` but also returns the number of clamped coordinates."""
    st = error_state(tube, x, t, params.delta)
    return -params.k * st.xi_diag * st.eps, st.clamped


class TubeController:
    """Per-step control with the tube's piece polynomials cached for speed.

    Produces the same values as :func:`control` to rounding.
    """

    def __init__(self, tube, params):
        self.tube = tube
        self.params = params
        self.t_f = tube.t_f
        self.clamp_count = 0
        # (d+1, 2, n, m): highest power first, for Horner
        P = np.stack([tube.piece_polys("lower"), tube.piece_polys("upper")])
        self._P = np.ascontiguousarray(np.moveaxis(P[..., ::-1], -1, 0))
        self._bp = list(tube.basis.breakpoints)

    def bounds(self, t):
        bp = self._bp
        k = min(max(bisect_right(bp, t) - 1, 0), len(bp) - 2)
        s = t - bp[k]
        P = self._P[:, :, :, k]
        acc = P[0].copy()
        for c in P[1:]:
            acc *= s
            acc += c
        return acc[0], acc[1]

    def __call__(self, x, t):
        if not 0.0 <= t <= self.t_f:
            raise ValueError(f"t={t} outside [0, {self.t_f}]")
        x = np.asarray(x, dtype=float)
        if np.isnan(x).any():
            raise ValueError("state contains NaN")
        lo, hi = self.bounds(t)
        m = hi - lo
        e = (2.0 * x - (hi + lo)) / m
        d = self.params.delta
        if np.abs(e).max() > d:
            ec = np.clip(e, -d, d)
            self.clamp_count += int(np.count_nonzero(ec != e))
            e = ec
        return (-4.0 * self.params.k) * (np.log1p(e) - np.log1p(-e)) / (m * (1.0 - e * e))


def control_effort_budget(inputs, dt=None):
    """max / mean / time-integral of ``||u||`` over a recorded input sequence ``(T, n)``."""
    U = np.asarray(inputs, dtype=float)
    if U.ndim != 2 or U.shape[0] == 0:
        raise ValueError("empty trajectory")
    norms = np.linalg.norm(U, axis=1)
    out = {"max": float(norms.max()), "mean": float(norms.mean())}
    out["integral"] = float(np.sum(norms) * dt) if dt is not None else float(np.sum(norms))
    return out
