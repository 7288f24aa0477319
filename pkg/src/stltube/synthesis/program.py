"""The sampled constraint program and its worst-case margin."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..stl import formula as f
from ..stl.robustness import NotAligned, Signal, UniformGridEvaluator, robustness
from ..tube import Tube, basis_matrix
from .samples import DEFAULT_MAX_POINTS


@dataclass
class SynthesisConfig:
    """Parameters of one synthesis run.

    ``gamma_d`` is the minimum boundary separation per dimension and
    ``slope_cap`` the cap on boundary slopes (``None`` drops the slope
    constraints).  ``start_region``/``initial_state`` add hard side
    conditions, outside the eta margin: the tube at t=0 lies inside the start
    region and contains the initial state with ``init_clearance`` to spare,
    so the closed loop can be started there.
    """

    epsilon: float
    gamma_d: np.ndarray
    state_bounds: np.ndarray
    slope_cap: float | None = None
    eta_interval: tuple | None = None
    eta_tolerance: float = 1e-3
    restarts: int = 4
    iterations: int = 3000
    stall_polls: int | None = 300
    rng_seed: int = 0
    robustness_step: float | None = None
    lipschitz_step: float | None = None
    safety: float = 1.1
    max_points: int = DEFAULT_MAX_POINTS
    start_region: f.BoxPredicate | None = None
    initial_state: np.ndarray | None = None
    init_half_width: float | None = None
    init_clearance: float | None = None

    def __post_init__(self):
        self.state_bounds = np.array(self.state_bounds, dtype=float, ndmin=2)
        n = self.state_bounds.shape[0]
        if self.state_bounds.shape != (n, 2) or np.any(self.state_bounds[:, 1] <= self.state_bounds[:, 0]):
            raise ValueError("state_bounds must be n rows of (low, high) with low < high")
        self.gamma_d = np.broadcast_to(np.asarray(self.gamma_d, dtype=float), (n,)).copy()
        if np.any(self.gamma_d <= 0):
            raise ValueError("gamma_d must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.slope_cap is not None and not self.slope_cap > 0:
            raise ValueError("slope_cap must be positive")
        if self.eta_interval is None:
            extent = float(np.max(self.state_bounds[:, 1] - self.state_bounds[:, 0]))
            self.eta_interval = (-extent, extent)
        lo, hi = (float(v) for v in self.eta_interval)
        if not lo < hi:
            raise ValueError("eta_interval needs lo < hi")
        self.eta_interval = (lo, hi)
        if not self.eta_tolerance > 0:
            raise ValueError("eta_tolerance must be positive")
        if self.restarts < 1 or self.iterations < 1:
            raise ValueError("search budget must be positive")
        if self.initial_state is not None:
            self.initial_state = np.asarray(self.initial_state, dtype=float)
        if self.init_clearance is None:
            self.init_clearance = float(np.min(self.gamma_d)) / 2
        if self.robustness_step is None:
            self.robustness_step = self.epsilon / 2
        if self.lipschitz_step is None:
            self.lipschitz_step = self.epsilon / 10

    @property
    def n(self):
        return self.state_bounds.shape[0]


def aligned_step(phi, t_f, target):
    """Largest step ``<= target`` dividing ``t_f`` and every interval endpoint, if one exists."""
    times = {t_f} | {v for node in phi.walk() if node.interval for v in node.interval}
    fracs = [Fraction(v).limit_denominator(10**6) for v in times]
    if any(abs(float(q) - v) > 1e-12 * max(1.0, abs(v)) for q, v in zip(fracs, times)):
        return None
    g = Fraction(0)
    for q in fracs:
        g = Fraction(math.gcd(g.numerator * q.denominator, q.numerator * g.denominator), g.denominator * q.denominator)
    if g == 0:
        return None
    k = math.ceil(float(g) / target - 1e-12)
    return float(g / k)


@dataclass
class Margins:
    """Worst value of each constraint family.

    ``margin`` is the max over separation, slope and robustness.  ``initial``
    is the side condition at t=0, met when ``<= 0``.
    """

    margin: float
    separation: float
    slope: float
    robustness: float
    initial: float
    worst_lambda: np.ndarray | None = field(default=None, repr=False)

    @property
    def admissible(self):
        return self.initial <= 0

    def to_dict(self):
        return {
            "margin": self.margin,
            "separation": self.separation,
            "slope": self.slope,
            "robustness": self.robustness,
            "initial": self.initial,
        }


class ConstraintProgram:
    """Precomputed sampled constraints for one (formula, basis, samples, config)."""

    def __init__(self, phi, basis, samples, config):
        if samples.n != config.n:
            raise ValueError(f"sample dimension {samples.n} != config dimension {config.n}")
        for p in phi.predicates():
            if getattr(p, "dim", config.n) != config.n:
                raise ValueError(f"predicate {p.label!r} has dimension {p.dim}, tube has {config.n}")
        if f.formula_horizon(phi) > basis.t_f + 1e-9:
            raise ValueError(f"formula horizon {f.formula_horizon(phi):g} exceeds t_f={basis.t_f:g}")
        self.phi = phi
        self.basis = basis
        self.samples = samples
        self.config = config
        t_f = basis.t_f
        step = aligned_step(phi, t_f, config.robustness_step)
        self.evaluator = None
        if step is not None:
            count = int(round(t_f / step)) + 1
            self.rob_times = np.arange(count) * step
            self.rob_times[-1] = t_f
            try:
                self.evaluator = UniformGridEvaluator(phi, step, count)
            except NotAligned:
                self.evaluator = None
        if self.evaluator is None:
            count = int(math.ceil(t_f / config.robustness_step - 1e-12)) + 1
            self.rob_times = np.linspace(0.0, t_f, count)
        self.lambdas = samples.lambdas
        self.Phi_rob = basis_matrix(basis, self.rob_times)
        self.Phi_tau = basis_matrix(basis, samples.tau_axis)
        self.dPhi_tau = basis_matrix(basis, samples.tau_axis, order=1)
        self.Phi_0 = basis_matrix(basis, [0.0])[0]

        self.atoms = self._decompose(phi) if self.evaluator is not None else None

    def _decompose(self, phi):
        """Split ``rho(phi) > eta`` into conjunct-level pieces.

        ``rho`` of a conjunction is the min over conjuncts and ``rho`` of
        ``G[a,b] psi`` at t=0 is the min of the ``psi`` trace over the window,
        so requiring every piece to exceed ``eta`` is the same constraint.
        """
        atoms = []
        stack = [phi]
        while stack:
            node = stack.pop()
            if node.kind == f.AND:
                stack.extend(node.children)
            elif node.kind == f.ALWAYS:
                ia, ib = self.evaluator.offsets[node.interval]
                atoms.append((node.children[0], ia, ib))
            else:
                atoms.append((node, 0, 0))
        return atoms

    def initial_values(self, cl, cu):
        """Side-condition values at t=0 (all must be <= 0), or None without a start."""
        cfg = self.config
        if cfg.start_region is None and cfg.initial_state is None:
            return None
        l0 = cl @ self.Phi_0
        u0 = cu @ self.Phi_0
        parts = []
        if cfg.start_region is not None:
            parts += [cfg.start_region.lower - l0, u0 - cfg.start_region.upper]
        if cfg.initial_state is not None:
            c = cfg.init_clearance
            parts += [l0 - cfg.initial_state + c, cfg.initial_state - u0 + c]
        return np.concatenate(parts)

    def mixture_signals(self, cl, cu):
        """Constant-lambda mixtures of the boundaries on the robustness grid: ``(S, T, n)``."""
        L = self.Phi_rob @ cl.T
        U = self.Phi_rob @ cu.T
        return L[None] + self.lambdas[:, None, :] * (U - L)[None]

    def violations(self, cl, cu):
        """Every sampled constraint value of the margin, grouped by family; all must be <= eta."""
        cl = np.asarray(cl, dtype=float)
        cu = np.asarray(cu, dtype=float)
        cfg = self.config
        L = self.Phi_tau @ cl.T
        U = self.Phi_tau @ cu.T
        out = {"separation": (L - U + cfg.gamma_d).ravel()}
        if cfg.slope_cap is not None:
            out["slope"] = np.concatenate([(self.dPhi_tau @ cl.T).ravel(), (self.dPhi_tau @ cu.T).ravel()]) - cfg.slope_cap
        X = self.mixture_signals(cl, cu)
        if self.atoms is None:
            out["robustness"] = -self.rho_values(X)
        else:
            cache = {}
            for j, (node, ia, ib) in enumerate(self.atoms):
                out[f"robustness[{j}]"] = -self.evaluator.trace(node, X, cache)[:, ia : ib + 1].ravel()
        return out

    def penalty(self, cl, cu, eta):
        """Per group, worst plus mean excess over ``eta``; zero exactly when the margin is <= eta.

        Weighting each group equally keeps a small group (the initial-state
        bounds) from being traded away against thousands of robustness samples.
        """
        total = 0.0
        for v in self.violations(cl, cu).values():
            ex = np.maximum(v - eta, 0.0)
            total += float(ex.max() + ex.mean())
        init = self.initial_values(cl, cu)
        if init is not None:
            ex = np.maximum(init, 0.0)
            total += float(ex.max() + ex.mean())
        return math.inf if math.isnan(total) else total

    def rho_values(self, X):
        if self.evaluator is not None:
            return self.evaluator.evaluate(X)
        return np.array([robustness(self.phi, Signal(self.rob_times, x)) for x in X])

    def evaluate(self, cl, cu):
        cl = np.asarray(cl, dtype=float)
        cu = np.asarray(cu, dtype=float)
        cfg = self.config
        L = self.Phi_tau @ cl.T
        U = self.Phi_tau @ cu.T
        sep = float(np.max(L - U + cfg.gamma_d))
        if cfg.slope_cap is not None:
            dL = self.dPhi_tau @ cl.T
            dU = self.dPhi_tau @ cu.T
            slope = float(max(dL.max(), dU.max()) - cfg.slope_cap)
        else:
            slope = -math.inf
        neg_rho = -self.rho_values(self.mixture_signals(cl, cu))
        worst = int(np.argmax(neg_rho))
        rob = float(neg_rho[worst])
        iv = self.initial_values(cl, cu)
        init = -math.inf if iv is None else float(np.max(iv))
        parts = (sep, slope, rob)
        margin = math.inf if any(math.isnan(v) for v in parts) else max(parts)
        if math.isnan(init):
            init = math.inf
        return Margins(margin, sep, slope, rob, init, self.lambdas[worst])


def evaluate_constraints(tube, phi, samples, config):
    """Smallest eta for which ``tube`` meets every sampled constraint."""
    prog = ConstraintProgram(phi, tube.basis, samples, config)
    return prog.evaluate(tube.coeffs_lower, tube.coeffs_upper)
