import numpy as np
import pytest

from stltube.stl import formula_horizon
from stltube.taskfile import TaskError, bundled_task_path, load_task, parse_task, task_digest
from stltube.tube import PIECEWISE, POLYNOMIAL

MINI = """\
name = mini
dim = 2
horizon = 4
state_bounds = [0,10] x [0,10]
region S = [0,1] x [0,1]
region B = [3,4] x [3,4]
formula = F[2,3] B
epsilon = 0.2
start_region = S
plant = omni_robot
"""


def test_bundled_robot():
    task = load_task(bundled_task_path("omni_robot"))
    assert task.n == 2 and task.t_f == 21.0
    assert formula_horizon(task.phi) == 21.0
    assert task.basis.kind == PIECEWISE and task.basis.degree == 5
    assert set(task.regions) == {"S", "T1", "T2", "G", "O1", "O2"}
    np.testing.assert_array_equal(task.regions["T1"].lower, [8, 14])
    np.testing.assert_array_equal(task.regions["O2"].upper, [17, 14])
    cfg = task.synthesis_config()
    assert cfg.epsilon == 0.1
    np.testing.assert_array_equal(cfg.initial_state, [4.5, 4.5])
    assert task.plant().name == "omni_robot"
    assert cfg.stall_polls == 100 and cfg.restarts == 1


def test_bundled_spacecraft():
    task = load_task(bundled_task_path("spacecraft"))
    assert task.n == 3 and task.t_f == 15.0 and task.basis.kind == POLYNOMIAL
    np.testing.assert_allclose(task.regions["O"].lower, [1.4, 1.4, 0.0])
    np.testing.assert_allclose(task.regions["G"].upper, [3.2, 3.2, 3.2])
    assert task.synthesis_config().epsilon == 0.5
    assert task.plant().n == 3


def test_defaults_and_breakpoints():
    task = parse_task(MINI.replace("formula = F[2,3] B", "formula = F[2,3] B\nbasis = piecewise_polynomial"))
    assert task.basis.breakpoints == (0.0, 2.0, 3.0, 4.0)
    assert task.sim_step == 1e-3 and task.sim_seeds == (0, 1, 2, 3, 4)
    assert task.controller_params().k == 1.0
    assert task.disturbance().scale == 0.5
    assert task.synthesis_config().slope_cap is None
    assert task.synthesis_config().stall_polls == 300
    assert task.synthesis_config(no_slope_cap=True).slope_cap is None


def test_continuation_and_comments():
    text = MINI.replace("formula = F[2,3] B", "formula = F[2,3] B \\\n   & G[0,4] !S   # stay out of S")
    task = parse_task(text)
    assert formula_horizon(task.phi) == 4.0


def test_digest_ignores_layout():
    assert task_digest(MINI) == task_digest("# header\n" + MINI.replace(" = ", "  =   ") + "\n\n")
    assert task_digest(MINI) != task_digest(MINI.replace("epsilon = 0.2", "epsilon = 0.3"))


@pytest.mark.parametrize(
    "old,new,line,msg",
    [
        ("formula = F[2,3] B", "formula = F[3,2] B", 7, "formula"),
        ("formula = F[2,3] B", "formula = F[2,3] Q", 7, "unbound"),
        ("formula = F[2,3] B", "formula = F[2,9] B", 7, "exceeds horizon"),
        ("region B = [3,4] x [3,4]", "region B = [3,4]", 6, "dimension"),
        ("region B = [3,4] x [3,4]", "region B = [4,3] x [3,4]", 6, "empty interval"),
        ("epsilon = 0.2", "epsilon = small", 8, "epsilon"),
        ("epsilon = 0.2", "epsilon = 0.2\nbogus = 1", 9, "unknown key"),
        ("start_region = S", "start_region = Z", 9, "start_region"),
        ("dim = 2", "dim = 2\ndim = 3", 3, "twice"),
    ],
)
def test_validation_errors_carry_line(old, new, line, msg):
    with pytest.raises(TaskError) as ei:
        parse_task(MINI.replace(old, new), "t.task")
    assert ei.value.line == line
    assert msg in str(ei.value) and f"t.task:{line}:" in str(ei.value)


def test_missing_key_and_plant_mismatch():
    with pytest.raises(TaskError, match="missing required key 'epsilon'"):
        parse_task(MINI.replace("epsilon = 0.2\n", ""))
    with pytest.raises(TaskError, match="plant"):
        parse_task(MINI.replace("plant = omni_robot", "plant = spacecraft"))
    with pytest.raises(TaskError):
        parse_task(MINI.replace("plant = omni_robot", "plant = blimp"))
