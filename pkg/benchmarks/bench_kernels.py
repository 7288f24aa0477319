"""Compare the numba kernels with their numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Shapes match the omni-robot task: 100 constant mixtures x 421 grid times.
The end-to-end line times one penalty evaluation of the robot program under the
backend selected by STLTUBE_NUMBA (run twice, with the flag at 1 and 0).
"""

import argparse
import os
import time

import numpy as np

from stltube.stl import kernels as K


def _best(fn, repeat):
    fn()  # warm-up (numba compilation)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    S, T = 100, 421
    X = rng.normal(size=(S, T))
    Y = rng.normal(size=(S, T))
    P = rng.uniform(0, 20, size=(S, T, 2))
    c, hw = np.array([8.5, 14.5]), np.array([0.5, 0.5])
    flat = np.ascontiguousarray(P.reshape(-1, 2))
    cases = {
        "window_extremum": (lambda: K.window_extremum_np(X, 60, 80, True), lambda: K.window_extremum_nb(X, 60, 80, True)),
        "until_rows": (lambda: K.until_rows_np(X, Y, 0, 40), lambda: K.until_rows_nb(X, Y, 0, 40)),
        "box_h": (lambda: K.box_h_np(P, c, hw), lambda: K.box_h_nb(flat, c, hw)),
    }
    rows = []
    for name, (f_np, f_nb) in cases.items():
        a, b = f_np(), f_nb()
        np.testing.assert_allclose(np.reshape(b, np.shape(a)), a, rtol=0, atol=1e-12)
        t_np, t_nb = _best(f_np, repeat), _best(f_nb, repeat)
        rows.append((name, t_np, t_nb))
    return rows


def bench_penalty(repeat):
    from stltube.synthesis import SynthesisProblem, seed_tube_coeffs
    from stltube.taskfile import bundled_task_path, load_task

    task = load_task(bundled_task_path("omni_robot"))
    cfg = task.synthesis_config()
    prog = SynthesisProblem(task.phi, task.basis, cfg).program
    cl, cu = seed_tube_coeffs(task.phi, task.basis, cfg)
    return _best(lambda: prog.penalty(cl, cu, 0.0), repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"{'kernel':<18}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, t_np, t_nb in bench_kernels(args.repeat):
        print(f"{name:<18}{1e3 * t_np:>10.3f}{1e3 * t_nb:>10.3f}{t_np / t_nb:>8.1f}x")
    flag = os.environ.get("STLTUBE_NUMBA", "1")
    print(f"robot penalty (STLTUBE_NUMBA={flag}): {1e3 * bench_penalty(args.repeat):.2f} ms")


if __name__ == "__main__":
    main()
