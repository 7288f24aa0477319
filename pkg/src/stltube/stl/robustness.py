"""Quantitative STL semantics on sampled, linearly interpolated signals.

Temporal extrema are taken over the signal's own sample times inside the
window ``[t+a, t+b]`` together with the two window endpoints, which are
interpolated.  ``UniformGridEvaluator`` is the batched fast path used during
synthesis; it agrees with :func:`robustness` whenever every interval endpoint
is a multiple of the grid step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import formula as f
from . import kernels

_SPAN_TOL = 1e-9


class HorizonError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Signal:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.size == 0:
            raise ValueError("empty signal")
        if values.shape[0] != times.size:
            raise ValueError(f"signal has {times.size} times but {values.shape[0]} values")
        if times[0] != 0.0:
            raise ValueError(f"signal must start at t=0, starts at {times[0]}")
        if np.any(np.diff(times) <= 0):
            raise ValueError("signal times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def end(self):
        return float(self.times[-1])

    def at(self, t):
        """Linear interpolation at times ``t``; returns shape ``t.shape + (n,)``."""
        t = np.asarray(t, dtype=float)
        flat = t.reshape(-1)
        out = np.empty((flat.size, self.dim))
        for i in range(self.dim):
            out[:, i] = np.interp(flat, self.times, self.values[:, i])
        return out.reshape(t.shape + (self.dim,))


def _eval(phi, sig, Q):
    k = phi.kind
    if k == f.TRUE:
        return np.full(Q.shape, np.inf)
    if k == f.PREDICATE:
        return phi.predicate.h(sig.at(Q))
    if k == f.NOT:
        return -_eval(phi.children[0], sig, Q)
    if k == f.AND:
        return np.minimum(_eval(phi.children[0], sig, Q), _eval(phi.children[1], sig, Q))
    if k == f.OR:
        return np.maximum(_eval(phi.children[0], sig, Q), _eval(phi.children[1], sig, Q))

    a, b = phi.interval
    grid = sig.times
    qa = Q + a
    qb = Q + b
    lo = np.searchsorted(grid, qa, side="left")
    hi = np.searchsorted(grid, qb, side="right")
    g0 = int(lo.min()) if Q.size else 0
    g1 = int(hi.max()) if Q.size else 0
    g1 = max(g1, g0)
    times = np.concatenate([grid[g0:g1], qa, qb])
    ng, nq = g1 - g0, Q.size
    lo = lo - g0
    hi = hi - g0
    if k == f.UNTIL:
        v1 = _eval(phi.children[0], sig, times)
        v2 = _eval(phi.children[1], sig, times)
        return kernels.until_points(
            v1[:ng], v2[:ng], lo, hi,
            v1[ng : ng + nq], v2[ng : ng + nq], v1[ng + nq :], v2[ng + nq :],
        )
    vals = _eval(phi.children[0], sig, times)
    is_max = k == f.EVENTUALLY
    op = np.maximum if is_max else np.minimum
    inner = kernels.range_extremum(vals[:ng], lo, hi, is_max)
    return op(op(inner, vals[ng : ng + nq]), vals[ng + nq :])


def _check_span(phi, sig, t_max):
    need = t_max + f.formula_horizon(phi)
    if need > sig.end + _SPAN_TOL * max(1.0, abs(need)):
        raise HorizonError(f"formula needs the signal up to t={need:g} but it ends at t={sig.end:g}")


def robustness_at(phi, sig, times):
    """Robustness of ``phi`` at every time in ``times`` (vectorized)."""
    Q = np.atleast_1d(np.asarray(times, dtype=float))
    if Q.size == 0:
        return Q.copy()
    if Q.min() < 0:
        raise HorizonError("evaluation time must be nonnegative")
    _check_span(phi, sig, float(Q.max()))
    return _eval(phi, sig, Q)


def robustness(phi, sig, t=0.0):
    """Robustness ``rho^phi(sig, t)``."""
    return float(robustness_at(phi, sig, [t])[0])


def satisfies(phi, sig):
    """Strict satisfaction: robustness at t=0 is positive."""
    return robustness(phi, sig, 0.0) > 0


class NotAligned(ValueError):
    pass


def aligned_offsets(phi, dt, tol=1e-9):
    """Map every temporal interval ``(a, b)`` to integer window offsets on a grid of step ``dt``."""
    offsets = {}
    for node in phi.walk():
        if node.kind in f.TEMPORAL_KINDS:
            a, b = node.interval
            ia, ib = int(round(a / dt)), int(round(b / dt))
            if abs(ia * dt - a) > tol * max(1.0, a) or abs(ib * dt - b) > tol * max(1.0, b):
                raise NotAligned(f"interval [{a:g},{b:g}] is not a multiple of grid step {dt:g}")
            offsets[node.interval] = (ia, ib)
    return offsets


class UniformGridEvaluator:
    """Batched robustness at t=0 for many signals sampled on one uniform grid.

    ``evaluate(X)`` takes ``X`` of shape (S, T, n), with sample ``k`` at time
    ``k*dt``, and returns the S robustness values.
    """

    def __init__(self, phi, dt, n_samples):
        self.phi = phi
        self.dt = float(dt)
        self.n_samples = int(n_samples)
        self.offsets = aligned_offsets(phi, self.dt)
        span = (self.n_samples - 1) * self.dt
        need = f.formula_horizon(phi)
        if need > span + _SPAN_TOL * max(1.0, need):
            raise HorizonError(f"formula horizon {need:g} exceeds grid span {span:g}")

    def evaluate(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 3 or X.shape[1] != self.n_samples:
            raise ValueError(f"expected (S, {self.n_samples}, n) samples, got {X.shape}")
        cache = {}
        return self._trace(self.phi, X, cache)[:, 0]

    def traces(self, X):
        return self._trace(self.phi, np.asarray(X, dtype=float), {})

    def trace(self, node, X, cache):
        """Trace of subformula ``node`` (a node of ``phi``), sharing ``cache`` across calls."""
        return self._trace(node, X, cache)

    def _trace(self, phi, X, cache):
        k = phi.kind
        if k == f.TRUE:
            return np.full(X.shape[:2], np.inf)
        if k == f.PREDICATE:
            key = ("p", phi.predicate)
            if key not in cache:
                cache[key] = phi.predicate.h(X)
            return cache[key]
        if k == f.NOT:
            return -self._trace(phi.children[0], X, cache)
        if k == f.AND:
            return np.minimum(self._trace(phi.children[0], X, cache), self._trace(phi.children[1], X, cache))
        if k == f.OR:
            return np.maximum(self._trace(phi.children[0], X, cache), self._trace(phi.children[1], X, cache))
        ia, ib = self.offsets[phi.interval]
        if k == f.UNTIL:
            return kernels.until_rows(self._trace(phi.children[0], X, cache), self._trace(phi.children[1], X, cache), ia, ib)
        child = self._trace(phi.children[0], X, cache)
        return kernels.window_extremum(child, ia, ib, k == f.EVENTUALLY)
