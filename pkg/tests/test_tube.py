import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stltube.tube import (
    LOWER,
    PIECEWISE,
    POLYNOMIAL,
    UPPER,
    BasisSpec,
    Tube,
    basis_matrix,
    estimate_lipschitz,
    eval_boundary,
    eval_boundary_derivative,
    search_transform,
    tube_center_and_width,
)


def poly_tube(lower, upper, degree=1, t_f=10.0, n=1):
    b = BasisSpec(POLYNOMIAL, degree, t_f)
    return Tube(b, np.tile(lower, (n, 1)), np.tile(upper, (n, 1)), 0.1)


def random_piecewise(seed, n=2, degree=5, t_f=12.0):
    rng = np.random.default_rng(seed)
    inner = np.sort(rng.uniform(1, t_f - 1, 3))
    b = BasisSpec(PIECEWISE, degree, t_f, (0.0, *inner, t_f), 1)
    c = rng.normal(size=(n, b.n_coeffs))
    return Tube(b, c - 1.0, c + 1.0 + rng.random((n, b.n_coeffs)), 0.1)


def random_polynomial(seed, n=3, degree=5, t_f=15.0):
    rng = np.random.default_rng(seed)
    b = BasisSpec(POLYNOMIAL, degree, t_f)
    c = rng.normal(size=(n, degree + 1)) / t_f ** np.arange(degree + 1)
    return Tube(b, c - 0.5, c + 0.5, 0.1)


# -- examples ------------------------------------------------------------------


def test_constant_boundary():
    tube = poly_tube([2.0, 0.0], [3.0, 0.0])
    for t in (0.0, 3.7, 10.0):
        assert eval_boundary(tube, 0, LOWER, t) == 2.0
        assert eval_boundary_derivative(tube, 0, LOWER, t) == 0.0


def test_linear_boundary():
    tube = poly_tube([0.0, 3.0], [1.0, 3.0])
    assert eval_boundary(tube, 0, LOWER, 2.0) == 6.0
    assert eval_boundary_derivative(tube, 0, UPPER, 7.5) == 3.0


def test_eval_errors():
    tube = poly_tube([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        eval_boundary(tube, 0, LOWER, -0.1)
    with pytest.raises(ValueError):
        eval_boundary(tube, 0, LOWER, 10.5)
    with pytest.raises(IndexError):
        eval_boundary(tube, 1, LOWER, 1.0)
    with pytest.raises(IndexError):
        eval_boundary_derivative(tube, -1, UPPER, 1.0)
    with pytest.raises(ValueError):
        tube.boundary("middle", 1.0)


def test_center_and_width():
    s, m = tube_center_and_width(poly_tube([0.0, 0.0], [2.0, 0.0]), 1.0)
    assert s[0] == 2.0 and m[0] == 2.0
    s, m = tube_center_and_width(poly_tube([-1.0, 0.0], [1.0, 0.0]), 1.0)
    assert s[0] == 0.0 and m[0] == 2.0
    crossing = poly_tube([0.0, 1.0], [5.0, 0.0])
    with pytest.raises(ValueError):
        tube_center_and_width(crossing, 6.0)


def test_lipschitz_examples():
    lip = estimate_lipschitz(poly_tube([-2.5, 0.0], [4.0, 0.0]), 0.01)
    assert (lip.L_lower, lip.L_upper, lip.L_dlower, lip.L_dupper) == (0.0, 0.0, 0.0, 0.0)
    assert lip.gamma_bar_lower == 2.5 and lip.gamma_bar_upper == 4.0
    lip = estimate_lipschitz(poly_tube([0.0, 3.0], [1.0, 3.0]), 0.01)
    assert lip.L_lower == pytest.approx(3.3, rel=1e-14)
    assert lip.L_dlower == 0.0
    with pytest.raises(ValueError):
        estimate_lipschitz(poly_tube([0.0, 3.0], [1.0, 3.0]), 10.0)
    with pytest.raises(ValueError):
        estimate_lipschitz(poly_tube([0.0, 3.0], [1.0, 3.0]), 0.0)


def test_basis_validation():
    with pytest.raises(ValueError):
        BasisSpec("spline", 3, 1.0)
    with pytest.raises(ValueError):
        BasisSpec(PIECEWISE, 5, 10.0, (0.0, 5.0, 9.0))
    with pytest.raises(ValueError):
        BasisSpec(PIECEWISE, 5, 10.0, (0.0, 6.0, 5.0, 10.0))
    with pytest.raises(ValueError):
        BasisSpec(PIECEWISE, 2, 10.0, (0.0, 5.0, 10.0), 1)
    b = BasisSpec(PIECEWISE, 5, 10.0, (0.0, 2.0, 5.0, 10.0), 1)
    assert b.n_coeffs == 3 * 6 - 2 * 2


def test_hermite_coefficients_are_knot_data():
    b = BasisSpec(PIECEWISE, 5, 6.0, (0.0, 2.5, 6.0), 1)
    rng = np.random.default_rng(0)
    c = rng.normal(size=(1, b.n_coeffs))
    tube = Tube(b, c, c + 1, 0.1)
    for knot, t in enumerate(b.breakpoints):
        assert tube.lower(t)[0] == pytest.approx(c[0, b.node_data_index(knot, 0)], abs=1e-12)
        assert tube.lower(t, order=1)[0] == pytest.approx(c[0, b.node_data_index(knot, 1)], abs=1e-12)


# -- properties ----------------------------------------------------------------


@pytest.mark.parametrize("make", [random_piecewise, random_polynomial])
def test_derivative_consistency(make):
    tube = make(1)
    rng = np.random.default_rng(2)
    bp = np.asarray(tube.basis.breakpoints)
    h = 1e-5
    checked = 0
    while checked < 100:
        i = int(rng.integers(tube.n))
        side = LOWER if rng.random() < 0.5 else UPPER
        t = rng.uniform(h, tube.t_f - h)
        if np.min(np.abs(bp - t)) < 2 * h:
            continue  # stay on one smooth piece
        fd = (eval_boundary(tube, i, side, t + h) - eval_boundary(tube, i, side, t - h)) / (2 * h)
        d = eval_boundary_derivative(tube, i, side, t)
        assert abs(fd - d) <= 1e-6 * max(1.0, abs(d))
        checked += 1


@pytest.mark.parametrize("make", [random_piecewise, random_polynomial])
def test_lipschitz_bounds_random_pairs(make):
    tube = make(3)
    lip = estimate_lipschitz(tube, 0.01)
    rng = np.random.default_rng(4)
    t1 = rng.uniform(0, tube.t_f, 1000)
    t2 = np.clip(t1 + rng.normal(size=1000) * rng.choice([1e-3, 1e-1, 3.0], 1000), 0, tube.t_f)
    keep = t1 != t2
    t1, t2 = t1[keep], t2[keep]
    dt = np.abs(t1 - t2)[:, None]
    for side, L, Ld in ((LOWER, lip.L_lower, lip.L_dlower), (UPPER, lip.L_upper, lip.L_dupper)):
        q = np.abs(tube.boundary(side, t1) - tube.boundary(side, t2)) / dt
        qd = np.abs(tube.boundary(side, t1, 1) - tube.boundary(side, t2, 1)) / dt
        assert np.all(q <= L) and np.all(qd <= Ld)


@pytest.mark.parametrize("make", [random_piecewise, random_polynomial])
def test_gamma_bar_bounds(make):
    tube = make(5)
    lip = estimate_lipschitz(tube, 0.01)
    t = np.random.default_rng(6).uniform(0, tube.t_f, 1000)
    assert np.isfinite(lip.gamma_bar_lower) and np.isfinite(lip.gamma_bar_upper)
    assert np.all(np.abs(tube.lower(t)) <= lip.gamma_bar_lower)
    assert np.all(np.abs(tube.upper(t)) <= lip.gamma_bar_upper)


@pytest.mark.parametrize("seed", range(5))
def test_breakpoint_continuity(seed):
    tube = random_piecewise(seed)
    bp = tube.basis.breakpoints
    for side in (LOWER, UPPER):
        P = tube.piece_polys(side)  # (n, m, d+1) in local s
        for k in range(1, len(bp) - 1):
            h = bp[k] - bp[k - 1]
            left = np.polynomial.polynomial.polyval(h, P[:, k - 1].T)
            dleft = np.polynomial.polynomial.polyval(h, np.polynomial.polynomial.polyder(P[:, k - 1].T))
            right, dright = P[:, k, 0], P[:, k, 1]
            np.testing.assert_allclose(left, right, atol=1e-10 * max(1.0, np.max(np.abs(right))))
            np.testing.assert_allclose(dleft, dright, atol=1e-10 * max(1.0, np.max(np.abs(dright))))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_basis_matrix_matches_tube(seed):
    tube = random_piecewise(seed, n=1)
    t = np.random.default_rng(seed).uniform(0, tube.t_f, 20)
    Phi = basis_matrix(tube.basis, t)
    np.testing.assert_allclose(Phi @ tube.coeffs_lower[0], tube.lower(t)[:, 0], rtol=1e-10, atol=1e-10)
    dPhi = basis_matrix(tube.basis, t, order=1)
    np.testing.assert_allclose(dPhi @ tube.coeffs_upper[0], tube.upper(t, 1)[:, 0], rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("basis", [BasisSpec(POLYNOMIAL, 5, 15.0), BasisSpec(PIECEWISE, 5, 21.0, (0.0, 3.0, 4.0, 13.0, 21.0), 1)])
def test_search_transform_invertible(basis):
    T = search_transform(basis)
    assert T.shape == (basis.n_coeffs, basis.n_coeffs)
    assert np.linalg.cond(T) < 1e8


def test_json_round_trip_exact():
    tube = random_piecewise(7)
    back = Tube.from_dict(json.loads(json.dumps(tube.to_dict())))
    assert back.basis == tube.basis
    assert np.array_equal(back.coeffs_lower, tube.coeffs_lower)
    assert np.array_equal(back.coeffs_upper, tube.coeffs_upper)
    assert np.array_equal(back.gamma_d, tube.gamma_d)
