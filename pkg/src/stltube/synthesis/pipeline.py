"""Feasibility search at fixed eta, bisection on eta, and certification."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..stl import formula as f
from ..tube import Tube, estimate_lipschitz, search_transform
from .certificate import Certificate, composite_lipschitz, lipschitz_mu
from .program import ConstraintProgram
from .samples import build_sample_set
from .search import pattern_search
from .seed import path_at, seed_path

log = logging.getLogger(__name__)


class SynthesisError(RuntimeError):
    pass


def worker_count():
    try:
        return max(1, int(os.environ.get("STLTUBE_WORKERS", "1")))
    except ValueError:
        return 1


class _Encoding:
    """Search vector <-> boundary coefficients.

    The search runs on (center, half-width) coefficients per dimension in the
    well-scaled coordinates of :func:`search_transform`.
    """

    def __init__(self, basis, n):
        self.basis = basis
        self.n = n
        self.z = basis.n_coeffs
        self.T = search_transform(basis)
        self.T_inv = np.linalg.inv(self.T)

    @property
    def dim(self):
        return 2 * self.n * self.z

    def blocks(self):
        z = self.z
        return [np.arange(k * z, (k + 1) * z) for k in range(2 * self.n)]

    def decode(self, theta):
        th = theta.reshape(2, self.n, self.z)
        center = th[0] @ self.T.T
        half = th[1] @ self.T.T
        return center - half, center + half

    def encode(self, cl, cu):
        center = (np.asarray(cl) + np.asarray(cu)) / 2
        half = (np.asarray(cu) - np.asarray(cl)) / 2
        return np.concatenate([(center @ self.T_inv.T).ravel(), (half @ self.T_inv.T).ravel()])


def _fit_coeffs(basis, times, values):
    """Least-squares boundary coefficients through samples ``values`` (T, n)."""
    from ..tube import basis_matrix

    Phi = basis_matrix(basis, times)
    coef, *_ = np.linalg.lstsq(Phi, values, rcond=None)
    return coef.T


def seed_tube_coeffs(phi, basis, config):
    n = config.n
    if config.initial_state is not None:
        x0 = config.initial_state
    elif config.start_region is not None:
        x0 = np.asarray(config.start_region.center)
    else:
        x0 = config.state_bounds.mean(axis=1)
    hw = config.init_half_width
    if hw is None:
        widths = [min(p.half_width) for p in phi.predicates() if isinstance(p, f.BoxPredicate)]
        hw = 0.4 * min(widths) if widths else 0.25 * float(np.min(config.state_bounds[:, 1] - config.state_bounds[:, 0]))
    hw = np.maximum(hw, config.gamma_d)
    knots, centers = seed_path(phi, basis.t_f, x0, config.start_region, clearance=2 * float(np.max(hw)))
    t = np.linspace(0, basis.t_f, max(8 * basis.n_coeffs, 200))
    t = np.union1d(t, knots)
    center = path_at(knots, centers, t)
    cc = _fit_coeffs(basis, t, center)
    ch = _fit_coeffs(basis, t, np.broadcast_to(hw, (t.size, n)))
    return cc - ch, cc + ch


@dataclass
class FeasibilityResult:
    feasible: bool
    tube: Tube | None
    margin: float
    evals: int
    restart: int | None


def _run_restart(args):
    prog, enc, theta0, scale, seed, restart, target, iterations, stall = args
    rng = np.random.default_rng([seed, restart])
    if restart > 0:
        theta0 = theta0 + rng.normal(size=theta0.size) * scale
    def fun(theta):
        cl, cu = enc.decode(theta)
        return prog.penalty(cl, cu, target)
    res = pattern_search(fun, theta0, step=scale, min_step=1e-6 * scale, max_polls=iterations, target=0.0, rng=rng, blocks=enc.blocks(),
                         stall_polls=stall)
    cl, cu = enc.decode(res.x)
    m = prog.evaluate(cl, cu)
    return res, m.margin if m.admissible else math.inf


class SynthesisProblem:
    def __init__(self, phi, basis, config, samples=None):
        self.phi = phi
        self.basis = basis
        self.config = config
        self.samples = samples or build_sample_set(config.n, basis.t_f, config.epsilon, config.max_points)
        self.program = ConstraintProgram(phi, basis, self.samples, config)
        self.encoding = _Encoding(basis, config.n)
        self.rho_lip = f.robustness_lipschitz_bound(phi)

    def make_tube(self, cl, cu):
        return Tube(self.basis, cl, cu, self.config.gamma_d, self.config.slope_cap)

    def margins(self, tube):
        return self.program.evaluate(tube.coeffs_lower, tube.coeffs_upper)

    def search_scale(self):
        widths = [min(p.half_width) for p in self.phi.predicates() if isinstance(p, f.BoxPredicate)]
        return 0.5 * min(widths) if widths else 0.1 * float(np.min(np.ptp(self.config.state_bounds, axis=1)))

    def feasible_for_eta(self, eta, start=None, budget=None):
        """Search for a tube with margin <= eta.

        ``start`` is an optional warm-start tube.  Restart 0 begins at the warm
        start (or the deadline seed), later restarts at seeded perturbations of
        it.  The lowest-index successful restart wins, so the result does not
        depend on the worker count.
        """
        cfg = self.config
        enc = self.encoding
        if start is None:
            theta0 = enc.encode(*seed_tube_coeffs(self.phi, self.basis, cfg))
        else:
            theta0 = enc.encode(start.coeffs_lower, start.coeffs_upper)
        iterations = budget or cfg.iterations
        scale = self.search_scale()
        jobs = [(self.program, enc, theta0, scale, cfg.rng_seed, r, eta, iterations, cfg.stall_polls) for r in range(cfg.restarts)]
        workers = min(worker_count(), len(jobs))
        results = []
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_run_restart, jobs))
        else:
            for job in jobs:
                out = _run_restart(job)
                results.append(out)
                if out[1] <= eta:
                    break
        evals = sum(r.evals for r, _ in results)
        for idx, (res, margin) in enumerate(results):
            if math.isnan(margin):
                raise SynthesisError("non-finite constraint margin during search")
            if margin <= eta:
                cl, cu = enc.decode(res.x)
                return FeasibilityResult(True, self.make_tube(cl, cu), margin, evals, idx)
        best = min(range(len(results)), key=lambda i: results[i][1])
        cl, cu = enc.decode(results[best][0].x)
        return FeasibilityResult(False, self.make_tube(cl, cu), results[best][1], evals, None)

    def certify(self, tube, eta_star):
        cfg = self.config
        lip = estimate_lipschitz(tube, cfg.lipschitz_step, cfg.safety)
        L_mu = lipschitz_mu(lip, self.rho_lip, cfg.n)
        L = composite_lipschitz(lip, L_mu, self.rho_lip)
        m = self.margins(tube)
        return Certificate.build(eta_star, L, self.samples.epsilon, lip, L_mu, self.rho_lip, m.to_dict())


@dataclass
class SynthesisResult:
    tube: Tube
    certificate: Certificate
    trace: list = field(default_factory=list)
    seconds: float = 0.0
    seed: int = 0


def synthesize(phi, basis, config, samples=None):
    """Bisect eta over ``config.eta_interval`` and certify the best witness tube.

    Raises :class:`SynthesisError` when no tube is found at the upper end of
    the interval.  An uncertifiable witness is returned with ``valid=False``.
    """
    t0 = time.perf_counter()
    prob = SynthesisProblem(phi, basis, config, samples)
    lo, hi = config.eta_interval
    trace = []
    res = prob.feasible_for_eta(hi)
    trace.append({"eta": hi, "feasible": res.feasible, "margin": res.margin, "evals": res.evals, "reused": False})
    if not res.feasible:
        raise SynthesisError(
            f"no feasible tube at eta={hi:g} (best margin {res.margin:.4g}); the task may be unsatisfiable "
            "for this basis and sampling"
        )
    best, best_margin = res.tube, res.margin
    while hi - lo > config.eta_tolerance:
        mid = (lo + hi) / 2
        if best_margin <= mid:
            trace.append({"eta": mid, "feasible": True, "margin": best_margin, "evals": 0, "reused": True})
            hi = mid
            continue
        res = prob.feasible_for_eta(mid, start=best)
        trace.append({"eta": mid, "feasible": res.feasible, "margin": res.margin, "evals": res.evals, "reused": False})
        if res.margin < best_margin:
            best, best_margin = res.tube, res.margin
        if res.feasible:
            hi = mid
        else:
            lo = mid
        log.info("bisection eta=%.5g feasible=%s best=%.5g", mid, res.feasible, best_margin)
    if not math.isfinite(best_margin):
        raise SynthesisError("non-finite margin for the witness tube")
    cert = prob.certify(best, best_margin)
    return SynthesisResult(best, cert, trace, time.perf_counter() - t0, config.rng_seed)
