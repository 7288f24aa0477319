"""Heuristic initial tubes from the deadlines in a formula.

The seed is a piecewise-linear center path through region centers, visiting
them at the midpoints of their eventually/until windows, with a constant
half-width.  Segments crossing a box that the formula always avoids are
bent around one of its (inflated) corners.
"""

import itertools

import numpy as np

from ..stl import formula as f


def _positive_region(phi):
    """First predicate reachable through and/or/always without negation."""
    if phi.kind == f.PREDICATE:
        return phi.predicate
    if phi.kind in (f.AND, f.OR, f.ALWAYS, f.EVENTUALLY):
        for c in phi.children:
            p = _positive_region(c)
            if p is not None:
                return p
    if phi.kind == f.UNTIL:
        return _positive_region(phi.children[0])
    return None


def _implication(phi):
    """``(premise, conclusion)`` if ``phi`` is ``!p | psi`` with a predicate premise."""
    if phi.kind == f.OR and phi.children[0].kind == f.NOT and phi.children[0].children[0].kind == f.PREDICATE:
        return phi.children[0].children[0].predicate, phi.children[1]
    return None


def _conjuncts(phi):
    if phi.kind == f.AND:
        return _conjuncts(phi.children[0]) + _conjuncts(phi.children[1])
    return [phi]


def extract_waypoints(phi, start_region=None, offset=0.0):
    """List of ``(t_begin, t_end, region)`` visits implied by ``phi``."""
    out = []
    _collect(phi, offset, start_region, out)
    return sorted(out, key=lambda w: (w[0], w[1]))


def _collect(phi, t0, current, out):
    k = phi.kind
    if k == f.PREDICATE:
        out.append((t0, t0, phi.predicate))
        return
    if k == f.AND:
        for c in phi.children:
            _collect(c, t0, current, out)
        return
    imp = _implication(phi)
    if imp is not None:
        premise, conclusion = imp
        if current is None or current == premise:
            _collect(conclusion, t0, current, out)
        return
    if k == f.OR:
        _collect(phi.children[0], t0, current, out)
        return
    if k in (f.EVENTUALLY, f.UNTIL):
        a, b = phi.interval
        target = phi.children[0]
        if target.kind == f.ALWAYS:
            a2, b2 = target.interval
            region = _positive_region(target.children[0])
            if region is not None:
                start = t0 + (a + b) / 2 + a2
                out.append((start, start + (b2 - a2), region))
            return
        region = _positive_region(target)
        if region is not None:
            t = t0 + (a + b) / 2
            out.append((t, t, region))
        return
    if k == f.ALWAYS:
        a, b = phi.interval
        child = phi.children[0]
        if child.kind == f.PREDICATE:
            out.append((t0 + a, t0 + b, child.predicate))
            return
        rules = [r for r in (_implication(c) for c in _conjuncts(child)) if r is not None]
        if rules:
            _chain(rules, t0 + a, t0 + b, current, out)


def _chain(rules, t_begin, t_end, current, out):
    """Follow ``p -> F[c,d] q`` rules from the current region while inside the window."""
    t = t_begin
    visited = 0
    while t <= t_end and visited < 64:
        step = None
        for premise, conclusion in rules:
            if premise == current and conclusion.kind == f.EVENTUALLY:
                c, d = conclusion.interval
                nxt = _positive_region(conclusion.children[0])
                if nxt is not None:
                    step = ((c + d) / 2, nxt)
                    break
        if step is None:
            return
        t += step[0]
        current = step[1]
        out.append((t, t, current))
        visited += 1


def extract_obstacles(phi):
    """Box predicates under a top-level ``G[a,b] !(p | q | ...)`` conjunct."""
    out = []
    for c in _conjuncts(phi):
        if c.kind != f.ALWAYS or c.children[0].kind != f.NOT:
            continue
        stack = [c.children[0].children[0]]
        while stack:
            node = stack.pop()
            if node.kind == f.OR:
                stack.extend(node.children)
            elif node.kind == f.PREDICATE and isinstance(node.predicate, f.BoxPredicate):
                out.append(node.predicate)
    return out


def _hits(p, q, lo, hi):
    """Does the segment ``p -> q`` meet the open box ``(lo, hi)``? (slab test)"""
    d = q - p
    t0, t1 = 0.0, 1.0
    for i in range(p.size):
        if abs(d[i]) < 1e-15:
            if not lo[i] < p[i] < hi[i]:
                return False
            continue
        a, b = (lo[i] - p[i]) / d[i], (hi[i] - p[i]) / d[i]
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
        if t0 >= t1:
            return False
    return True


def avoid_boxes(times, centers, boxes, clearance, max_detours=32):
    """Insert corner waypoints so no path segment crosses a box grown by ``clearance``."""
    times = list(times)
    centers = [np.asarray(c, dtype=float) for c in centers]
    grown = [(np.asarray(b.lower) - clearance, np.asarray(b.upper) + clearance) for b in boxes]
    for _ in range(max_detours):
        hit = None
        for k in range(len(times) - 1):
            p, q = centers[k], centers[k + 1]
            for lo, hi in grown:
                if _hits(p, q, lo, hi):
                    hit = (k, lo, hi)
                    break
            if hit:
                break
        if hit is None:
            break
        k, lo, hi = hit
        p, q = centers[k], centers[k + 1]
        pad = 1e-3 * (1.0 + np.max(hi - lo))
        best = None
        for corner in itertools.product(*zip(lo - pad, hi + pad)):
            c = np.asarray(corner)
            if any(_hits(p, c, a, b) or _hits(c, q, a, b) for a, b in grown):
                continue
            cost = np.linalg.norm(c - p) + np.linalg.norm(q - c)
            if best is None or cost < best[0]:
                best = (cost, c)
        if best is None:
            break
        c = best[1]
        frac = np.linalg.norm(c - p) / best[0]
        times.insert(k + 1, times[k] + frac * (times[k + 1] - times[k]))
        centers.insert(k + 1, c)
    return np.asarray(times), np.vstack(centers)


def seed_path(phi, t_f, x0, start_region=None, clearance=None):
    """Knots ``(times, centers)`` of a piecewise-linear seed path starting at ``x0``.

    With ``clearance`` set, the path is routed around always-avoided boxes.
    """
    x0 = np.asarray(x0, dtype=float)
    times = [0.0]
    centers = [x0]
    for t_begin, t_end, region in extract_waypoints(phi, start_region):
        c = np.asarray(region.center, dtype=float)
        for t in (t_begin, t_end):
            t = min(max(t, 0.0), t_f)
            if t <= times[-1]:
                if t == times[-1] and t > 0:
                    centers[-1] = c
                continue
            times.append(t)
            centers.append(c)
    if times[-1] < t_f:
        times.append(t_f)
        centers.append(centers[-1])
    if clearance is not None:
        return avoid_boxes(times, centers, extract_obstacles(phi), clearance)
    return np.asarray(times), np.vstack(centers)


def path_at(times, centers, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.stack([np.interp(t, times, centers[:, i]) for i in range(centers.shape[1])], axis=1)
