"""Epsilon-nets over the augmented domain ``[0,1]^n x [0, t_f]``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_MAX_POINTS = 5_000_000


class SampleCapError(ValueError):
    pass


def _axis(extent, step):
    count = int(math.ceil(extent / step - 1e-12)) + 1
    return np.linspace(0.0, extent, max(count, 2))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Uniform product grid whose cells have half-diagonal at most ``epsilon``.

    The grid is kept factored as one lambda axis (shared by all n mixture
    coordinates) and one time axis; :attr:`points` materializes the full
    ``(N, n+1)`` array on demand.
    """

    epsilon: float
    n: int
    t_f: float
    lam_axis: np.ndarray
    tau_axis: np.ndarray

    @property
    def N(self):
        return self.lam_axis.size ** self.n * self.tau_axis.size

    @property
    def lam_step(self):
        return float(self.lam_axis[1] - self.lam_axis[0])

    @property
    def tau_step(self):
        return float(self.tau_axis[1] - self.tau_axis[0])

    @cached_property
    def lambdas(self):
        """All distinct mixture vectors, shape ``(m**n, n)``."""
        grids = np.meshgrid(*([self.lam_axis] * self.n), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    @cached_property
    def points(self):
        lam = np.repeat(self.lambdas, self.tau_axis.size, axis=0)
        tau = np.tile(self.tau_axis, self.lambdas.shape[0])
        return np.column_stack([lam, tau])

    def cell_half_diagonal(self):
        return 0.5 * math.sqrt(self.n * self.lam_step**2 + self.tau_step**2)

    def nearest_distance(self, pts):
        """Distance from each row of ``pts`` to the nearest grid point (exact for product grids)."""
        pts = np.asarray(pts, dtype=float)
        d2 = np.zeros(pts.shape[0])
        for j in range(self.n + 1):
            axis = self.tau_axis if j == self.n else self.lam_axis
            step = axis[1] - axis[0]
            k = np.clip(np.rint(pts[:, j] / step), 0, axis.size - 1).astype(int)
            d2 += (pts[:, j] - axis[k]) ** 2
        return np.sqrt(d2)


def build_sample_set(n, t_f, epsilon, max_points=DEFAULT_MAX_POINTS):
    """Grid over ``[0,1]^n x [0,t_f]`` with per-axis step ``<= 2*epsilon/sqrt(n+1)``.

    Every point of the domain is then within ``epsilon`` (Euclidean, time in
    raw units) of a grid point.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if not t_f > 0:
        raise ValueError("t_f must be positive")
    h = 2.0 * epsilon / math.sqrt(n + 1)
    lam = _axis(1.0, h)
    tau = _axis(float(t_f), h)
    N = lam.size**n * tau.size
    if N > max_points:
        raise SampleCapError(
            f"epsilon={epsilon:g} needs {N} samples (cap {max_points}); raise epsilon, reduce n, or raise the cap"
        )
    for a in (lam, tau):
        a.setflags(write=False)
    return SampleSet(float(epsilon), int(n), float(t_f), lam, tau)
