import numpy as np
import pytest

from stltube.stl import BoxPredicate, Signal
from stltube.stl import formula as f


def random_formula(rng, preds, depth, budget):
    """Random formula of nesting depth <= depth whose horizon is <= budget."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.05:
            return f.true()
        return f.pred(preds[rng.integers(len(preds))])
    kind = rng.choice(["not", "and", "or", "F", "G", "U"])
    if kind == "not":
        return f.neg(random_formula(rng, preds, depth - 1, budget))
    if kind in ("and", "or"):
        l = random_formula(rng, preds, depth - 1, budget)
        r = random_formula(rng, preds, depth - 1, budget)
        return f.Formula(f.AND if kind == "and" else f.OR, (l, r))
    b = float(np.floor(rng.uniform(0, budget) * 100) / 100)
    rest = max(budget - b, 0.0)
    a = float(np.floor(rng.uniform(0, b) * 100) / 100)
    if kind == "U":
        return f.until(random_formula(rng, preds, depth - 1, rest), random_formula(rng, preds, depth - 1, rest), a, b)
    child = random_formula(rng, preds, depth - 1, rest)
    return f.eventually(child, a, b) if kind == "F" else f.always(child, a, b)


def random_signal(rng, n_samples, span, dim=2):
    gaps = rng.uniform(0.2, 1.0, n_samples - 1)
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    times *= span / times[-1]
    times[-1] = span
    values = rng.normal(0.0, 1.0, (n_samples, dim))
    return Signal(times, values)


@pytest.fixture
def box_preds():
    return [
        BoxPredicate((0.0, 0.0), (1.0, 1.0), "A"),
        BoxPredicate((0.5, -0.5), (0.7, 1.2), "B"),
        BoxPredicate((-1.0, 0.3), (0.6, 0.6), "C"),
    ]


ROBOT_REGIONS = {
    "S": ([4, 4], [5, 5]),
    "T1": ([8, 14], [9, 15]),
    "T2": ([14, 8], [15, 9]),
    "G": ([18, 18], [19, 19]),
    "O1": ([5, 8], [7, 10]),
    "O2": ([15, 12], [17, 14]),
}
ROBOT_PSI = (
    "G[0,13] ((S -> F[3,4] T1) & (T1 -> F[3,4] T2) & (T2 -> F[3,4] T1))"
    " & F[17,18] G[0,3] G & G[0,20] !(O1 | O2)"
)


@pytest.fixture
def robot_regions():
    return {k: BoxPredicate.from_bounds(lo, hi, k) for k, (lo, hi) in ROBOT_REGIONS.items()}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
