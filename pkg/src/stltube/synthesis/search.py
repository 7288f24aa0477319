"""Randomized pattern search on the exact (non-smooth) worst-case margin."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class SearchResult:
    x: np.ndarray
    fx: float
    evals: int
    polls: int
    reached: bool


def poll_directions(rng, dim, blocks, count):
    """Unit poll directions: coordinates, random block-sparse and dense Gaussian ones."""
    dirs = []
    for _ in range(count):
        u = rng.random()
        d = np.zeros(dim)
        if u < 0.3:
            d[rng.integers(dim)] = 1.0
        elif u < 0.7:
            blk = blocks[rng.integers(len(blocks))]
            d[blk] = rng.normal(size=len(blk))
        else:
            d = rng.normal(size=dim)
        dirs.append(d / np.linalg.norm(d))
    return dirs


def pattern_search(fun, x0, step, min_step, max_polls, target, rng, blocks=None, polls_per_iter=12, max_step=None,
                   stall_polls=None, stall_rtol=1e-3):
    """Minimize ``fun`` until it drops to ``target`` or the budget runs out.

    Each poll tries ``+/- step`` along a batch of random directions and moves
    to the first improvement (opportunistic polling).  Success doubles the
    step, failure halves it; when the step falls below ``min_step`` the
    search stops.  With ``stall_polls`` set, the search also stops once that
    many polls pass without a relative improvement of ``stall_rtol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = fun(x)
    evals = 1
    dim = x.size
    blocks = blocks or [np.arange(dim)]
    max_step = max_step or 64 * step
    polls = 0
    ref, ref_poll = fx, 0
    while polls < max_polls and fx > target and step >= min_step:
        if stall_polls is not None and polls - ref_poll >= stall_polls:
            break
        polls += 1
        moved = False
        for d in poll_directions(rng, dim, blocks, polls_per_iter):
            for sign in (1.0, -1.0):
                y = x + sign * step * d
                fy = fun(y)
                evals += 1
                if fy < fx:
                    x, fx = y, fy
                    moved = True
                    break
            if moved:
                break
        step = min(step * 2.0, max_step) if moved else step * 0.5
        if fx < ref - stall_rtol * abs(ref):
            ref, ref_poll = fx, polls
        if not math.isfinite(fx):
            break
    return SearchResult(x, fx, evals, polls, fx <= target)
