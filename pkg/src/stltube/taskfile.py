"""Line-oriented task files.

Grammar (one statement per line; ``#`` starts a comment; a trailing ``\\``
continues a line)::

    statement := key "=" value
               | "region" NAME "=" box
    box       := interval ("x" interval)*
    interval  := "[" number "," number "]"

Keys (defaults in parentheses):

    name, dim, horizon, formula                      required
    state_bounds                                     required, a box
    basis (polynomial), degree (5), breakpoints (formula interval endpoints),
    continuity (1)
    epsilon, gamma_d (0.1), slope_cap (none), eta_interval (+-max extent),
    eta_tolerance (1e-3), restarts (4), iterations (3000), stall_polls (300),
    seed (0),
    start_region (none), initial_state (center of start_region)
    plant, gain (1), sim_step (1e-3), disturbance (noise),
    disturbance_scale (0.5), disturbance_freq (0.5), sim_seeds (0,1,2,3,4)
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerParams
from .sim import DisturbancePolicy, make_plant
from .stl import BoxPredicate, STLSyntaxError, formula_horizon, interval_endpoints, parse_formula
from .synthesis import SynthesisConfig
from .tube import PIECEWISE, POLYNOMIAL, BasisSpec


class TaskError(ValueError):
    def __init__(self, message, line=None, path=None):
        where = f"{path or '<task>'}:{line}: " if line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.line = line
        self.path = path


_KEYS = {
    "name", "dim", "horizon", "formula", "state_bounds", "basis", "degree", "breakpoints", "continuity",
    "epsilon", "gamma_d", "slope_cap", "eta_interval", "eta_tolerance", "restarts", "iterations", "stall_polls",
    "seed", "start_region", "initial_state", "plant", "gain", "sim_step", "disturbance", "disturbance_scale",
    "disturbance_freq", "sim_seeds",
}
_REQUIRED = ("name", "dim", "horizon", "formula", "state_bounds", "epsilon")
_INTERVAL = re.compile(r"\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\]")


def _logical_lines(text):
    """(line number, content) with comments removed and continuations joined."""
    out = []
    buf, start = "", None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if start is None:
            start = no
        if line.endswith("\\"):
            buf += line[:-1] + " "
            continue
        buf += line
        if buf.strip():
            out.append((start, buf.strip()))
        buf, start = "", None
    if buf.strip():
        out.append((start, buf.strip()))
    return out


def _parse_box(value, line, path):
    parts = [p.strip() for p in re.split(r"\]\s*x\s*\[", value.strip())]
    if not value.strip().startswith("[") or not value.strip().endswith("]"):
        raise TaskError(f"expected a box like [a,b] x [c,d], got {value!r}", line, path)
    bounds = []
    for p in parts:
        m = _INTERVAL.fullmatch("[" + p.strip("[]") + "]")
        if not m:
            raise TaskError(f"malformed interval {p!r}", line, path)
        try:
            lo, hi = float(m.group(1)), float(m.group(2))
        except ValueError:
            raise TaskError(f"non-numeric interval {p!r}", line, path) from None
        if not lo < hi:
            raise TaskError(f"empty interval [{lo:g}, {hi:g}]", line, path)
        bounds.append((lo, hi))
    return np.array(bounds)


def _floats(value, line, path, key):
    try:
        return [float(v) for v in value.replace(",", " ").split()]
    except ValueError:
        raise TaskError(f"{key}: expected numbers, got {value!r}", line, path) from None


@dataclass
class TaskFile:
    name: str
    n: int
    t_f: float
    regions: dict
    formula_text: str
    phi: object
    basis: BasisSpec
    settings: dict
    state_bounds: np.ndarray
    digest: str
    path: str | None = None
    lines: dict = field(default_factory=dict)

    def synthesis_config(self, epsilon=None, no_slope_cap=False, seed=None):
        s = self.settings
        start = self.regions[s["start_region"]] if s.get("start_region") else None
        x0 = self.initial_state()
        return SynthesisConfig(
            epsilon=float(epsilon if epsilon is not None else s["epsilon"]),
            gamma_d=s.get("gamma_d", 0.1),
            state_bounds=self.state_bounds,
            slope_cap=None if no_slope_cap else s.get("slope_cap"),
            eta_interval=s.get("eta_interval"),
            eta_tolerance=s.get("eta_tolerance", 1e-3),
            restarts=s.get("restarts", 4),
            iterations=s.get("iterations", 3000),
            stall_polls=s.get("stall_polls", 300),
            rng_seed=s.get("seed", 0) if seed is None else seed,
            start_region=start,
            initial_state=x0,
        )

    def initial_state(self):
        s = self.settings
        if s.get("initial_state") is not None:
            return np.asarray(s["initial_state"], dtype=float)
        if s.get("start_region"):
            return np.asarray(self.regions[s["start_region"]].center, dtype=float)
        return None

    def plant(self, **kwargs):
        if not self.settings.get("plant"):
            raise TaskError("task names no plant", path=self.path)
        return make_plant(self.settings["plant"], **kwargs)

    def controller_params(self):
        return ControllerParams(k=self.settings.get("gain", 1.0))

    def disturbance(self, kind=None, scale=None):
        s = self.settings
        return DisturbancePolicy(
            kind or s.get("disturbance", "noise"),
            s.get("disturbance_scale", 0.5) if scale is None else scale,
            s.get("disturbance_freq", 0.5),
        )

    @property
    def sim_step(self):
        return self.settings.get("sim_step", 1e-3)

    @property
    def sim_seeds(self):
        return self.settings.get("sim_seeds", (0, 1, 2, 3, 4))


def task_digest(text):
    """Hash of the task's logical content: comments, blank lines and spacing do not count."""
    canon = "\n".join(" ".join(line.split()) for _, line in _logical_lines(text))
    return hashlib.sha256(canon.encode()).hexdigest()


def parse_task(text, path=None):
    raw = {}
    lines = {}
    regions = {}
    region_lines = {}
    for no, line in _logical_lines(text):
        m = re.fullmatch(r"region\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)", line)
        if m:
            name = m.group(1)
            if name in regions:
                raise TaskError(f"region {name!r} defined twice", no, path)
            box = _parse_box(m.group(2), no, path)
            regions[name] = BoxPredicate.from_bounds(box[:, 0], box[:, 1], name)
            region_lines[name] = no
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise TaskError(f"expected 'key = value', got {line!r}", no, path)
        if key not in _KEYS:
            raise TaskError(f"unknown key {key!r}", no, path)
        if key in raw:
            raise TaskError(f"key {key!r} given twice", no, path)
        raw[key] = value.strip()
        lines[key] = no
    for key in _REQUIRED:
        if key not in raw:
            raise TaskError(f"missing required key {key!r}", path=path)

    def num(key, cast=float, default=None):
        if key not in raw:
            return default
        try:
            return cast(raw[key])
        except ValueError:
            raise TaskError(f"{key}: expected {cast.__name__}, got {raw[key]!r}", lines[key], path) from None

    n = num("dim", int)
    t_f = num("horizon")
    if n < 1:
        raise TaskError("dim must be >= 1", lines["dim"], path)
    if not t_f > 0:
        raise TaskError("horizon must be positive", lines["horizon"], path)
    for name, reg in regions.items():
        if reg.dim != n:
            raise TaskError(f"region {name!r} has dimension {reg.dim}, task has {n}", region_lines[name], path)
    state_bounds = _parse_box(raw["state_bounds"], lines["state_bounds"], path)
    if state_bounds.shape[0] != n:
        raise TaskError(f"state_bounds has dimension {state_bounds.shape[0]}, task has {n}", lines["state_bounds"], path)
    try:
        phi = parse_formula(raw["formula"], regions)
    except STLSyntaxError as exc:
        raise TaskError(f"formula: {exc}", lines["formula"], path) from None
    if formula_horizon(phi) > t_f + 1e-9:
        raise TaskError(f"formula horizon {formula_horizon(phi):g} exceeds horizon {t_f:g}", lines["formula"], path)

    kind = raw.get("basis", POLYNOMIAL)
    if kind not in (POLYNOMIAL, PIECEWISE):
        raise TaskError(f"basis must be {POLYNOMIAL!r} or {PIECEWISE!r}", lines.get("basis"), path)
    degree = num("degree", int, 5)
    bps = ()
    if kind == PIECEWISE:
        if "breakpoints" in raw:
            bps = tuple(_floats(raw["breakpoints"], lines["breakpoints"], path, "breakpoints"))
        else:
            bps = tuple(sorted({0.0, t_f} | {t for t in interval_endpoints(phi) if 0 < t < t_f}))
    try:
        basis = BasisSpec(kind, degree, t_f, bps, num("continuity", int, 1))
    except ValueError as exc:
        raise TaskError(f"basis: {exc}", lines.get("basis") or lines.get("degree"), path) from None

    s = {"epsilon": num("epsilon")}
    if "gamma_d" in raw:
        gd = _floats(raw["gamma_d"], lines["gamma_d"], path, "gamma_d")
        if len(gd) not in (1, n):
            raise TaskError(f"gamma_d needs 1 or {n} values", lines["gamma_d"], path)
        s["gamma_d"] = gd[0] if len(gd) == 1 else gd
    if "slope_cap" in raw and raw["slope_cap"].lower() != "none":
        s["slope_cap"] = num("slope_cap")
    if "eta_interval" in raw:
        iv = _floats(raw["eta_interval"], lines["eta_interval"], path, "eta_interval")
        if len(iv) != 2 or not iv[0] < iv[1]:
            raise TaskError("eta_interval needs two numbers lo < hi", lines["eta_interval"], path)
        s["eta_interval"] = tuple(iv)
    for key, cast in (("eta_tolerance", float), ("restarts", int), ("iterations", int), ("stall_polls", int),
                      ("seed", int),
                      ("gain", float), ("sim_step", float), ("disturbance_scale", float), ("disturbance_freq", float)):
        if key in raw:
            s[key] = num(key, cast)
    for key in ("plant", "disturbance", "start_region"):
        if key in raw:
            s[key] = raw[key]
    if s.get("start_region") and s["start_region"] not in regions:
        raise TaskError(f"start_region {s['start_region']!r} is not a defined region", lines["start_region"], path)
    if "initial_state" in raw:
        x0 = _floats(raw["initial_state"], lines["initial_state"], path, "initial_state")
        if len(x0) != n:
            raise TaskError(f"initial_state needs {n} values", lines["initial_state"], path)
        s["initial_state"] = x0
    if "sim_seeds" in raw:
        s["sim_seeds"] = tuple(int(v) for v in _floats(raw["sim_seeds"], lines["sim_seeds"], path, "sim_seeds"))
    task = TaskFile(raw["name"], n, t_f, regions, raw["formula"], phi, basis, s, state_bounds, task_digest(text), path, lines)
    try:
        task.synthesis_config()
        task.controller_params()
        task.disturbance()
        if s.get("plant"):
            plant = task.plant()
            if plant.n != n:
                raise TaskError(f"plant {plant.name!r} has dimension {plant.n}, task has {n}", lines["plant"], path)
    except TaskError:
        raise
    except ValueError as exc:
        raise TaskError(str(exc), path=path) from None
    return task


def load_task(path):
    with open(path, encoding="utf-8") as fh:
        return parse_task(fh.read(), str(path))


def bundled_task_path(name):
    from importlib.resources import files

    return str(files("stltube") / "tasks" / f"{name}.task")
