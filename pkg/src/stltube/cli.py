"""``stltube`` command line: synthesize | simulate | monitor | verify.

Exit codes: 0 success/valid, 1 task rejected or run failed, 2 input or
validation error, 3 integrity failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .sim import DisturbancePolicy, POLICIES, SimulationError, read_trajectory_csv, simulate, verify_run
from .stl import HorizonError, STLSyntaxError, Signal, neg, parse_formula, robustness
from .synthesis import (
    CertificateIntegrityError,
    SynthesisError,
    SynthesisProblem,
    check_certificate,
    synthesize,
)
from .synthesis.certificate import Certificate
from .taskfile import TaskError, load_task, parse_task
from .tube import Tube

OK, REJECTED, INPUT_ERROR, INTEGRITY = 0, 1, 2, 3
FORMAT = "stltube-tube/1"

log = logging.getLogger("stltube")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _digest(payload):
    body = {k: v for k, v in payload.items() if k != "digest"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def tube_document(task, task_text, tube, cert, seed, epsilon):
    doc = {
        "format": FORMAT,
        "task": {"name": task.name, "digest": task.digest, "text": task_text},
        "seed": int(seed),
        "epsilon": float(epsilon),
        "tube": tube.to_dict(),
        "certificate": cert.to_dict(),
    }
    doc["digest"] = _digest(doc)
    return doc


def _dump(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(x):
    """JSON-safe float: infinities become None."""
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None


def _read_task(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        return parse_task(text, str(path)), text
    except OSError as exc:
        raise CliError(f"cannot read task file: {exc}", INPUT_ERROR) from None
    except TaskError as exc:
        raise CliError(str(exc), INPUT_ERROR) from None


def load_tube_document(path):
    """Parse a tube JSON and check its content digest and certificate arithmetic."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read tube file: {exc}", INPUT_ERROR) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: not valid JSON ({exc})", INPUT_ERROR) from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CliError(f"{path}: not a {FORMAT} document", INPUT_ERROR)
    if doc.get("digest") != _digest(doc):
        raise CliError(f"{path}: content digest mismatch (file was modified after synthesis)", INTEGRITY)
    try:
        tube = Tube.from_dict(doc["tube"])
        cert = Certificate.from_dict(doc["certificate"])
        check_certificate(cert)
    except CertificateIntegrityError as exc:
        raise CliError(f"{path}: {exc}", INTEGRITY) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: malformed tube document ({exc})", INPUT_ERROR) from None
    return doc, tube, cert


def cmd_synthesize(args):
    task, text = _read_task(args.task)
    cfg = task.synthesis_config(epsilon=args.eps, no_slope_cap=args.no_slope_cap, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    report = {"task": task.name, "task_digest": task.digest, "seed": cfg.rng_seed, "epsilon": cfg.epsilon,
              "slope_cap": cfg.slope_cap, "version": __version__}
    try:
        res = synthesize(task.phi, task.basis, cfg)
    except SynthesisError as exc:
        report.update(status="rejected", reason=str(exc), seconds=time.perf_counter() - t0)
        _dump(os.path.join(args.out, "report.json"), report)
        print(f"rejected: {exc}", file=sys.stderr)
        return REJECTED
    cert = res.certificate
    doc = tube_document(task, text, res.tube, cert, cfg.rng_seed, cfg.epsilon)
    _dump(os.path.join(args.out, "tube.json"), doc)
    trace = [{k: (_finite(v) if isinstance(v, float) else v) for k, v in row.items()} for row in res.trace]
    report.update(
        status="valid" if cert.valid else "rejected",
        seconds=res.seconds,
        certificate=cert.to_dict(),
        trace=trace,
    )
    _dump(os.path.join(args.out, "report.json"), report)
    print(f"eta* = {cert.eta_star:.6g}  L = {cert.composite_L:.6g}  eps = {cert.epsilon:g}  "
          f"slack = {cert.slack:.6g}  -> {'VALID' if cert.valid else 'REJECTED (slack > 0)'}")
    print(f"wrote {os.path.join(args.out, 'tube.json')} ({res.seconds:.1f} s)")
    return OK if cert.valid else REJECTED


def _check_pairing(doc, task):
    if doc["task"]["digest"] != task.digest:
        raise CliError("stale tube: it was synthesized for a different task file (digest mismatch)", INTEGRITY)


def cmd_simulate(args):
    task, _ = _read_task(args.task)
    doc, tube, cert = load_tube_document(args.tube)
    _check_pairing(doc, task)
    if not cert.valid and not args.allow_uncertified:
        print(f"tube certificate is not valid (slack {cert.slack:.6g} > 0); pass --allow-uncertified to run anyway",
              file=sys.stderr)
        return REJECTED
    plant = task.plant()
    if plant.n != tube.n:
        raise CliError(f"plant dimension {plant.n} != tube dimension {tube.n}", INPUT_ERROR)
    x0 = task.initial_state()
    if x0 is None:
        x0 = (tube.lower(0.0) + tube.upper(0.0)) / 2
    try:
        policy = task.disturbance(kind=args.policy, scale=args.scale)
    except ValueError as exc:
        raise CliError(str(exc), INPUT_ERROR) from None
    step = args.step if args.step is not None else task.sim_step
    seeds = [args.seed] if args.seed is not None else list(task.sim_seeds)
    params = task.controller_params()
    os.makedirs(args.out, exist_ok=True)
    runs = []
    ok = True
    for seed in seeds:
        try:
            traj = simulate(plant, tube, params, x0, step, policy, seed)
        except ValueError as exc:
            raise CliError(str(exc), INPUT_ERROR) from None
        except SimulationError as exc:
            runs.append({"seed": seed, "error": str(exc), "last_valid": exc.last_valid})
            ok = False
            continue
        rep = verify_run(traj, tube, task.phi, certificate_valid=cert.valid)
        csv_path = os.path.join(args.out, f"trajectory_seed{seed}.csv")
        traj.write_csv(csv_path)
        rep.update(seed=seed, csv=os.path.basename(csv_path))
        runs.append(rep)
        good = rep["contained"] and rep["robustness"] > 0 and rep["clamp_count"] == 0
        ok &= good
        print(f"seed {seed}: contained={rep['contained']} rho={rep['robustness']:.6g} "
              f"min_margin={rep['min_margin']:.4g} clamps={rep['clamp_count']}")
    report = {
        "task": task.name, "task_digest": task.digest, "tube_digest": doc["digest"], "plant": plant.name,
        "policy": policy.kind, "scale": policy.scale, "step": step, "certificate_valid": cert.valid,
        "initial_state": np.asarray(x0).tolist(), "runs": runs, "success": bool(ok),
    }
    _dump(os.path.join(args.out, "run_report.json"), report)
    return OK if ok else REJECTED


def cmd_monitor(args):
    task, _ = _read_task(args.task)
    phi = task.phi
    if args.formula:
        try:
            phi = parse_formula(args.formula, task.regions)
        except STLSyntaxError as exc:
            raise CliError(f"formula: {exc}", INPUT_ERROR) from None
    if args.negate:
        phi = neg(phi)
    try:
        traj = read_trajectory_csv(args.csv)
        if traj.states.shape[1] != task.n:
            raise ValueError(f"CSV has {traj.states.shape[1]} state columns, task has {task.n}")
        rho = robustness(phi, Signal(traj.times, traj.states))
    except OSError as exc:
        raise CliError(f"cannot read CSV: {exc}", INPUT_ERROR) from None
    except (ValueError, HorizonError) as exc:
        raise CliError(str(exc), INPUT_ERROR) from None
    sat = rho > 0
    print(f"robustness = {rho!r}  {'satisfied' if sat else 'violated'}")
    return OK if sat else REJECTED


def recheck(doc, tube, cert):
    """Recompute margin, Lipschitz constants and slack from the tube and embedded task."""
    task = parse_task(doc["task"]["text"], "<embedded task>")
    if task.digest != doc["task"]["digest"]:
        raise CliError("embedded task text does not match its digest", INTEGRITY)
    cfg = task.synthesis_config(epsilon=cert.epsilon, no_slope_cap=tube.slope_cap is None, seed=doc["seed"])
    if tube.slope_cap is not None:
        cfg.slope_cap = tube.slope_cap
    prob = SynthesisProblem(task.phi, tube.basis, cfg)
    margins = prob.margins(tube)
    fresh = prob.certify(tube, margins.margin)
    return margins, fresh


def cmd_verify(args):
    doc, tube, cert = load_tube_document(args.tube)
    margins, fresh = recheck(doc, tube, cert)
    rows = [("eta_star", cert.eta_star, fresh.eta_star), ("composite_L", cert.composite_L, fresh.composite_L),
            ("slack", cert.slack, fresh.slack)]
    bad = False
    for name, stored, new in rows:
        agree = abs(stored - new) <= 1e-9 * max(1.0, abs(stored))
        bad |= not agree
        print(f"{name:12s} stored {stored!r:24s} recomputed {new!r:24s} {'ok' if agree else 'MISMATCH'}")
    if not margins.admissible:
        print(f"initial side condition violated ({margins.initial:.4g} > 0)")
        bad = True
    if bad:
        print("integrity failure: stored certificate disagrees with recomputation", file=sys.stderr)
        return INTEGRITY
    print("certificate VALID" if fresh.valid else f"certificate INVALID (slack {fresh.slack:.6g} > 0)")
    return OK if fresh.valid else REJECTED


def build_parser():
    p = argparse.ArgumentParser(prog="stltube", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="synthesize and certify a tube for a task file")
    s.add_argument("task")
    s.add_argument("--out", default="out")
    s.add_argument("--seed", type=int)
    s.add_argument("--eps", type=float, help="override the covering radius")
    s.add_argument("--no-slope-cap", action="store_true", help="drop the boundary slope constraints")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("simulate", help="closed-loop runs of a synthesized tube")
    s.add_argument("task")
    s.add_argument("tube")
    s.add_argument("--out", default="out")
    s.add_argument("--seed", type=int, help="single seed instead of the task's seed list")
    s.add_argument("--step", type=float, help="integration step")
    s.add_argument("--policy", choices=POLICIES)
    s.add_argument("--scale", type=float, help="disturbance magnitude as a fraction of the bound")
    s.add_argument("--allow-uncertified", action="store_true", help="run even if the certificate is invalid")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("monitor", help="robustness of a trajectory CSV")
    s.add_argument("task", help="task file (its formula and regions)")
    s.add_argument("csv")
    s.add_argument("--formula", help="formula text over the task's regions instead of the task formula")
    s.add_argument("--negate", action="store_true")
    s.set_defaults(func=cmd_monitor)

    s = sub.add_parser("verify", help="recompute a tube's certificate from scratch")
    s.add_argument("tube")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
