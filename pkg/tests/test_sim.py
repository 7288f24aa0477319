import numpy as np
import pytest

from stltube.controller import ControllerParams
from stltube.sim import (
    POLICIES,
    CoherenceError,
    DisturbancePolicy,
    Trajectory,
    builtin_plants,
    omni_robot,
    perturbed,
    read_trajectory_csv,
    simulate,
    single_integrator,
    spacecraft,
    verify_run,
)
from stltube.stl import BoxPredicate, parse_formula
from stltube.tube import PIECEWISE, POLYNOMIAL, BasisSpec, Tube


def const_tube(lo, hi, n, t_f=2.0):
    b = BasisSpec(POLYNOMIAL, 1, t_f)
    return Tube(b, np.tile([lo, 0.0], (n, 1)), np.tile([hi, 0.0], (n, 1)), 0.1)


def sweeping_tube(n=2, t_f=4.0):
    # boundaries fitted to a sine sweep with width 1
    b = BasisSpec(PIECEWISE, 5, t_f, (0.0, 2.0, 4.0), 1)
    from stltube.tube import basis_matrix

    t = np.linspace(0, t_f, 200)
    Phi = basis_matrix(b, t)
    center = np.stack([3 + np.sin(t + k) for k in range(n)], axis=1)
    c, *_ = np.linalg.lstsq(Phi, center, rcond=None)
    return Tube(b, c.T - 0.5, c.T + 0.5, 0.1)


def test_catalog_eigen_check():
    cat = builtin_plants()
    assert set(cat) == {"omni_robot", "spacecraft", "single_integrator"}
    for plant in cat.values():
        assert plant.check_input_map(1000, seed=0) >= plant.g_lower_bound


def test_spacecraft_drift_vanishes():
    sc = spacecraft()
    assert sc.f(np.array([0.7, 0.0, 0.0]))[0] == 0.0
    assert sc.f(np.array([2.0, 0.0, 5.0]))[0] == 0.0
    assert sc.f(np.array([0.0, 1.0, 1.0]))[0] == pytest.approx(0.1)


def test_omni_condition_number():
    rob = omni_robot()
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert np.linalg.cond(rob.g(rng.uniform(0, 20, 2))) <= 2.0


def test_single_integrator_constant_without_input():
    si = single_integrator(2)
    x = np.array([1.0, -2.0])
    assert np.all(si.rhs(x, np.zeros(2), np.zeros(2)) == 0)


def test_equilibrium_at_center():
    tube = const_tube(-1.0, 1.0, 2)
    traj = simulate(single_integrator(2), tube, ControllerParams(), [0.0, 0.0], 1e-2, DisturbancePolicy("zero"))
    assert np.all(traj.states == 0) and np.all(traj.inputs == 0)
    assert traj.clamp_count == 0
    assert traj.states.shape == (201, 2) and traj.times[-1] == 2.0
    np.testing.assert_allclose(np.diff(traj.times), 1e-2, atol=1e-12)


def test_rejects_bad_start_and_step():
    tube = const_tube(-1.0, 1.0, 1)
    with pytest.raises(ValueError):
        simulate(single_integrator(1), tube, ControllerParams(), [1.0], 1e-2)
    with pytest.raises(ValueError):
        simulate(single_integrator(1), tube, ControllerParams(), [0.0], 0.3)
    with pytest.raises(ValueError):
        DisturbancePolicy("gusts")


@pytest.mark.parametrize("kind", POLICIES)
@pytest.mark.parametrize("seed", range(3))
def test_containment_under_every_policy(kind, seed):
    tube = sweeping_tube()
    plant = omni_robot(w_bound=0.5)
    x0 = (tube.lower(0.0) + tube.upper(0.0)) / 2
    traj = simulate(plant, tube, ControllerParams(), x0, 1e-3, DisturbancePolicy(kind, 1.0, 0.7), seed)
    assert traj.clamp_count == 0
    lo, hi = tube.lower(traj.times), tube.upper(traj.times)
    assert np.all((lo < traj.states) & (traj.states < hi))
    assert np.all(np.abs(traj.disturbances) <= plant.w_bound + 1e-15)


def test_noise_is_seeded():
    tube = sweeping_tube()
    x0 = (tube.lower(0.0) + tube.upper(0.0)) / 2
    a = simulate(omni_robot(), tube, ControllerParams(), x0, 1e-2, DisturbancePolicy(), 7)
    b = simulate(omni_robot(), tube, ControllerParams(), x0, 1e-2, DisturbancePolicy(), 7)
    c = simulate(omni_robot(), tube, ControllerParams(), x0, 1e-2, DisturbancePolicy(), 8)
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.states, c.states)


def test_step_halving():
    tube = sweeping_tube()
    x0 = tube.lower(0.0) + 0.3 * (tube.upper(0.0) - tube.lower(0.0))
    a = simulate(omni_robot(), tube, ControllerParams(), x0, 1e-3, DisturbancePolicy("zero"))
    b = simulate(omni_robot(), tube, ControllerParams(), x0, 5e-4, DisturbancePolicy("zero"))
    assert np.max(np.abs(a.states[-1] - b.states[-1])) < 1e-4


def test_inertia_perturbation_keeps_containment():
    tube = sweeping_tube(3)
    x0 = (tube.lower(0.0) + tube.upper(0.0)) / 2
    base = spacecraft()
    for scale in (0.8, 1.2):
        plant = perturbed(base, inertia=tuple(scale * np.array(base.params["inertia"])))
        assert plant.params["inertia"][0] == pytest.approx(scale)
        traj = simulate(plant, tube, ControllerParams(), x0, 1e-3, DisturbancePolicy("noise", 1.0), 3)
        lo, hi = tube.lower(traj.times), tube.upper(traj.times)
        assert np.all((lo < traj.states) & (traj.states < hi)) and traj.clamp_count == 0


def _pinned(tube, states=None):
    t = np.linspace(0, tube.t_f, 101)
    x = (tube.lower(t) + tube.upper(t)) / 2 if states is None else states
    return Trajectory(t, x, np.zeros_like(x), np.zeros_like(x), 0)


def test_verify_center_run():
    tube = const_tube(0.0, 2.0, 2)
    phi = parse_formula("G[0,1] A", {"A": BoxPredicate((1.0, 1.0), 1.5, "A")})
    rep = verify_run(_pinned(tube), tube, phi)
    assert rep["contained"] and rep["min_margin"] == 1.0
    assert rep["robustness"] == pytest.approx(1.5)


def test_verify_boundary_sample_not_contained():
    tube = const_tube(0.0, 2.0, 1)
    tr = _pinned(tube)
    tr.states[40, 0] = 2.0
    phi = parse_formula("G[0,1] A", {"A": BoxPredicate((1.0,), 1.5, "A")})
    rep = verify_run(tr, tube, phi)
    assert not rep["contained"] and rep["first_violation"]["t"] == pytest.approx(0.8)


def test_verify_span_and_coherence():
    tube = const_tube(0.0, 2.0, 1)
    phi = parse_formula("G[0,1] A", {"A": BoxPredicate((5.0,), 0.5, "A")})
    short = Trajectory(np.linspace(0, 1, 11), np.ones((11, 1)), np.zeros((11, 1)), np.zeros((11, 1)), 0)
    with pytest.raises(ValueError):
        verify_run(short, tube, phi)
    # contained but violating: only an error when the certificate claims validity
    assert verify_run(_pinned(tube), tube, phi)["robustness"] < 0
    with pytest.raises(CoherenceError):
        verify_run(_pinned(tube), tube, phi, certificate_valid=True)


def test_csv_round_trip(tmp_path):
    tube = sweeping_tube()
    x0 = (tube.lower(0.0) + tube.upper(0.0)) / 2
    tr = simulate(omni_robot(), tube, ControllerParams(), x0, 1e-2, DisturbancePolicy(), 1)
    p = tmp_path / "run.csv"
    tr.write_csv(p)
    assert p.read_text().splitlines()[0] == "t,x1,x2,u1,u2,w1,w2"
    back = read_trajectory_csv(p)
    assert np.array_equal(back.times, tr.times) and np.array_equal(back.states, tr.states)
    assert np.array_equal(back.inputs, tr.inputs) and np.array_equal(back.disturbances, tr.disturbances)


def test_csv_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x1\n0,1\n0.1,abc\n")
    with pytest.raises(ValueError):
        read_trajectory_csv(p)
    p.write_text("time,x1\n0,1\n")
    with pytest.raises(ValueError):
        read_trajectory_csv(p)
