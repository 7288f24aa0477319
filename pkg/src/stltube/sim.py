"""Plants, disturbances, fixed-step closed-loop integration and run verification."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .controller import TubeController, control_effort_budget
from .stl import Signal, robustness

ZERO = "zero"
CONSTANT = "constant"
NOISE = "noise"
SINUSOID = "sinusoid"
POLICIES = (ZERO, CONSTANT, NOISE, SINUSOID)


class SimulationError(RuntimeError):
    def __init__(self, message, last_valid=None):
        super().__init__(message)
        self.last_valid = last_valid


class CoherenceError(AssertionError):
    """A contained run under a valid certificate with nonpositive robustness."""


@dataclass(frozen=True)
class Plant:
    """Control-affine plant ``xdot = f(x) + g(x) u + w`` with ``|w_i| <= w_bound_i``."""

    name: str
    n: int
    f: Callable
    g: Callable
    g_lower_bound: float
    w_bound: np.ndarray
    state_bounds: np.ndarray
    params: dict = field(default_factory=dict)

    def rhs(self, x, u, w):
        return self.f(x) + self.g(x) @ u + w

    def check_input_map(self, samples=1000, seed=0):
        """Smallest eigenvalue of the symmetric part of ``g`` over random states."""
        rng = np.random.default_rng(seed)
        lo, hi = self.state_bounds[:, 0], self.state_bounds[:, 1]
        worst = math.inf
        for _ in range(samples):
            g = self.g(lo + rng.random(self.n) * (hi - lo))
            worst = min(worst, float(np.linalg.eigvalsh((g + g.T) / 2)[0]))
        if worst < self.g_lower_bound:
            raise ValueError(f"{self.name}: symmetric input map eigenvalue {worst:.4g} below {self.g_lower_bound}")
        return worst


def single_integrator(n=1, w_bound=0.1, bounds=(-10.0, 10.0)):
    eye = np.eye(n)
    return Plant(
        "single_integrator", n, lambda x: np.zeros(n), lambda x: eye, 1.0,
        np.full(n, float(w_bound)), np.tile(np.asarray(bounds, dtype=float), (n, 1)),
    )


def omni_robot(w_bound=0.5, bounds=(0.0, 20.0)):
    """Planar velocity-controlled robot with a mildly state-dependent rotated input map.

    ``g(x) = R(theta(x)) diag(1, 1.5)`` with ``|theta| <= 0.3``: condition number 1.5,
    symmetric part bounded below by ``cos(0.3) - 0.25 sin(0.3) > 0.8``.
    """
    D = np.diag([1.0, 1.5])

    def g(x):
        th = 0.3 * math.sin(0.2 * x[0] + 0.1 * x[1])
        c, s = math.cos(th), math.sin(th)
        return np.array([[c, -s], [s, c]]) @ D

    return Plant(
        "omni_robot", 2, lambda x: np.zeros(2), g, 0.8,
        np.full(2, float(w_bound)), np.tile(np.asarray(bounds, dtype=float), (2, 1)),
    )


def spacecraft(inertia=(1.0, 0.9, 0.8), w_bound=0.1, bounds=(-5.0, 5.0)):
    """Rigid-body angular velocity (Euler equations) with torque input."""
    J1, J2, J3 = (float(v) for v in inertia)
    a = np.array([(J2 - J3) / J1, (J3 - J1) / J2, (J1 - J2) / J3])
    G = np.diag([1 / J1, 1 / J2, 1 / J3])

    def f(x):
        return a * np.array([x[1] * x[2], x[2] * x[0], x[0] * x[1]])

    return Plant(
        "spacecraft", 3, f, lambda x: G, 1.0 / max(J1, J2, J3),
        np.full(3, float(w_bound)), np.tile(np.asarray(bounds, dtype=float), (3, 1)),
        {"inertia": (J1, J2, J3)},
    )


_CATALOG = {"omni_robot": omni_robot, "spacecraft": spacecraft, "single_integrator": single_integrator}


def builtin_plants():
    return {name: make() for name, make in _CATALOG.items()}


def make_plant(name, **kwargs):
    try:
        return _CATALOG[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown plant {name!r}; choose from {sorted(_CATALOG)}") from None


@dataclass(frozen=True)
class DisturbancePolicy:
    """``noise`` draws ``U[-scale W, scale W]`` per step; ``sinusoid`` is ``scale W sin(2 pi freq t + phase_i)``."""

    kind: str = NOISE
    scale: float = 0.5
    freq: float = 0.5

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown disturbance policy {self.kind!r}; choose from {POLICIES}")
        if not 0 <= self.scale <= 1:
            raise ValueError("disturbance scale must lie in [0, 1] (a fraction of the bound)")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray
    clamp_count: int
    metadata: dict = field(default_factory=dict)

    @property
    def step(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def write_csv(self, path):
        n = self.states.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(n)] + [f"w{i + 1}" for i in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in np.column_stack([self.times, self.states, self.inputs, self.disturbances]):
                w.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path):
    """Load ``t, x1..xn[, u.., w..]`` columns; only time and states are required."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not xcols:
        raise ValueError(f"{path}: no state columns x1..xn")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed number ({exc})") from None
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged or empty data")
    n = len(xcols)
    ucols = [i for i, h in enumerate(header) if h.startswith("u")]
    wcols = [i for i, h in enumerate(header) if h.startswith("w")]
    zeros = np.zeros((data.shape[0], n))
    return Trajectory(
        data[:, 0], data[:, xcols],
        data[:, ucols] if len(ucols) == n else zeros,
        data[:, wcols] if len(wcols) == n else zeros, 0,
    )


def _disturbance(policy, plant, rng, phase):
    W = plant.w_bound * policy.scale
    if policy.kind == ZERO:
        return lambda t: np.zeros(plant.n), False
    if policy.kind == CONSTANT:
        return lambda t: W.copy(), False
    if policy.kind == SINUSOID:
        return lambda t: W * np.sin(2 * math.pi * policy.freq * t + phase), True
    return None, False


def simulate(plant, tube, params, x0, step=1e-3, policy=None, seed=0, t_end=None):
    """Closed loop under RK4 with the control held over each step.

    Noise is redrawn at the start of every step and held; the sinusoid is
    evaluated at each RK4 stage time.
    """
    policy = policy or DisturbancePolicy()
    if step <= 0:
        raise ValueError("step must be positive")
    if tube.n != plant.n:
        raise ValueError(f"tube dimension {tube.n} != plant dimension {plant.n}")
    t_end = tube.t_f if t_end is None else float(t_end)
    K = int(round(t_end / step))
    if K < 1 or abs(K * step - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"step {step:g} does not divide the horizon {t_end:g}")
    x = np.asarray(x0, dtype=float).copy()
    lo, hi = tube.lower(0.0), tube.upper(0.0)
    if x.shape != (plant.n,) or not np.all((lo < x) & (x < hi)):
        raise ValueError(f"initial state {x.tolist()} is not strictly inside the tube at t=0")
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * math.pi, plant.n)
    wfun, varying = _disturbance(policy, plant, rng, phase)
    W = plant.w_bound * policy.scale
    ctrl = TubeController(tube, params)
    times = np.arange(K + 1) * step
    times[-1] = t_end
    X = np.empty((K + 1, plant.n))
    U = np.empty_like(X)
    Wt = np.empty_like(X)
    X[0] = x
    for k in range(K):
        t = times[k]
        h = times[k + 1] - t
        u = ctrl(x, t)
        w = rng.uniform(-W, W) if wfun is None else wfun(t)
        U[k], Wt[k] = u, w
        if varying:
            wm, we = wfun(t + h / 2), wfun(t + h)
        else:
            wm = we = w
        k1 = plant.rhs(x, u, w)
        k2 = plant.rhs(x + h / 2 * k1, u, wm)
        k3 = plant.rhs(x + h / 2 * k2, u, wm)
        k4 = plant.rhs(x + h * k3, u, we)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at t={times[k + 1]:g}", last_valid=k)
        X[k + 1] = x
    U[K] = ctrl(x, times[K])
    Wt[K] = Wt[K - 1] if wfun is None else wfun(times[K])
    meta = {"seed": int(seed), "plant": plant.name, "policy": policy.kind, "scale": policy.scale, "step": step}
    return Trajectory(times, X, U, Wt, ctrl.clamp_count, meta)


def verify_run(traj, tube, phi, certificate_valid=False):
    """Strict containment at every recorded step plus robustness of the recorded states."""
    if abs(traj.times[0]) > 1e-12 or abs(traj.times[-1] - tube.t_f) > 1e-9 * max(1.0, tube.t_f):
        raise ValueError(f"trajectory spans [{traj.times[0]:g}, {traj.times[-1]:g}], tube needs [0, {tube.t_f:g}]")
    lo = tube.lower(traj.times)
    hi = tube.upper(traj.times)
    gap = np.minimum(traj.states - lo, hi - traj.states)
    contained = bool(np.all(gap > 0))
    rho = float(robustness(phi, Signal(traj.times, traj.states)))
    report = {
        "contained": contained,
        "min_margin": float(gap.min()),
        "robustness": rho,
        "clamp_count": int(traj.clamp_count),
        "steps": int(len(traj.times)),
        "effort": control_effort_budget(traj.inputs, traj.step),
    }
    if not contained:
        bad = np.argwhere(gap <= 0)[0]
        report["first_violation"] = {"t": float(traj.times[bad[0]]), "dim": int(bad[1])}
    if contained and certificate_valid and not rho > 0:
        raise CoherenceError(f"contained run under a valid certificate has robustness {rho}")
    return report


def perturbed(plant, **changes):
    """Rebuild a built-in plant with changed parameters (e.g. scaled inertia)."""
    kw = dict(plant.params)
    kw.update(changes)
    return replace(make_plant(plant.name, **kw), w_bound=plant.w_bound, state_bounds=plant.state_bounds)
