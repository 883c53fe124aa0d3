import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from gjm.bounds import (
    CASES, DomainError, F, G, analytic_threshold, case_d_axis_angle, case_d_gap, case_d_params,
    case_d_sufficient, double_cone_angle, fold_axis, g_objective, generic_bound, qubit_bound_case_c,
    qubit_bound_case_d, stationary_gamma,
)
from gjm.matqm import unit

from .conftest import X, Y, Z, pair

THETAS = np.linspace(0.0, np.pi / 2, 20)


def brute_G(nu, t):
    """Grid of step 1e-5 over gamma followed by a bounded local refinement."""
    gam = np.linspace(0.0, 1.0, 100_001)
    a = 1 - nu * gam * t
    vals = (1 - nu * nu) / (a + np.sqrt(np.maximum(a * a - (1 - nu * nu) * (1 - gam * gam), 0.0)))
    i = int(np.argmax(vals))
    lo, hi = gam[max(i - 1, 0)], gam[min(i + 1, len(gam) - 1)]
    res = optimize.minimize_scalar(lambda g: -g_objective(nu, t, g), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return max(vals[i], -res.fun)


def test_generic_bound_examples():
    assert generic_bound("a", 3, 2) == pytest.approx(1 / 3)
    assert generic_bound("b", 4, 7) == 0.5
    assert generic_bound("c", 2, 3) == 0.5
    assert generic_bound("c", 5, 3) == pytest.approx(1 / 3)
    assert generic_bound("d", 5, 2) == pytest.approx(2 / 3)


def test_generic_bound_rejects_unknown_case():
    with pytest.raises(DomainError):
        generic_bound("e", 2, 2)
    with pytest.raises(DomainError):
        generic_bound("a", 0, 2)


def test_double_cone_examples():
    assert double_cone_angle([Z, X]).theta == pytest.approx(np.pi / 2, abs=1e-12)
    assert double_cone_angle([Z, Z]).theta == pytest.approx(0.0, abs=1e-12)
    assert double_cone_angle([Z]).theta == 0.0
    res = double_cone_angle([X, Y, Z])
    assert res.theta == pytest.approx(2 * np.arccos(1 / np.sqrt(3)), abs=1e-6)
    assert res.certified


def test_double_cone_rejects_zero_vector():
    with pytest.raises(ValueError):
        double_cone_angle([Z, np.zeros(3)])


def test_cone_result_invariant():
    res = double_cone_angle([X, Y, Z])
    assert res.theta / 2 == pytest.approx(res.per_axis_angles.max(), abs=1e-9)
    assert 0 <= res.theta <= np.pi


def test_antipodal_axes_are_identified():
    assert double_cone_angle([Z, -Z]).theta == pytest.approx(0.0, abs=1e-12)
    assert double_cone_angle([Z, -X]).theta == pytest.approx(np.pi / 2)
    np.testing.assert_allclose(fold_axis(-Z), Z)
    np.testing.assert_allclose(fold_axis(np.array([-1.0, 0, 0])), X)


def test_pair_closed_form_matches_numeric(rng):
    for _ in range(50):
        r1, r2 = unit(rng.normal(size=3)), unit(rng.normal(size=3))
        closed = double_cone_angle([r1, r2]).theta
        numeric = double_cone_angle([r1, r2], method="numeric").theta
        assert abs(closed - numeric) <= 1e-7


def test_case_d_axis_angle_examples():
    assert case_d_axis_angle([Z, X]) == pytest.approx(np.pi / 2)
    for t0 in np.linspace(0, np.pi / 2, 7):
        assert case_d_axis_angle(pair(t0)) == pytest.approx(t0, abs=1e-12)
    assert case_d_axis_angle([Z, -Z]) == 0.0
    assert case_d_axis_angle([Z]) == 0.0


def test_closed_form_examples():
    assert qubit_bound_case_c(np.pi / 2) == pytest.approx(2 - np.sqrt(2), abs=1e-12)
    assert qubit_bound_case_c(0.0) == 1.0
    th = 2 * np.arccos(1 / np.sqrt(3))
    assert qubit_bound_case_c(th) == pytest.approx(1 / (1 + np.sin(np.arccos(1 / np.sqrt(3)))))
    assert qubit_bound_case_d(np.pi / 2, "n2") == pytest.approx(2 / 3)
    assert qubit_bound_case_d(np.pi / 2, "general") == pytest.approx(2 / 3)
    assert qubit_bound_case_d(np.pi / 6, "n2") == pytest.approx(0.8)


def test_closed_forms_reject_out_of_range_theta():
    with pytest.raises(DomainError):
        qubit_bound_case_c(3.5)
    with pytest.raises(DomainError):
        qubit_bound_case_d(2.0)
    with pytest.raises(DomainError):
        qubit_bound_case_d(1.0, "n7")


@given(st.floats(0, np.pi / 2))
def test_case_d_gap_identity(theta):
    diff = qubit_bound_case_d(theta, "n2") - qubit_bound_case_d(theta, "general")
    assert diff == pytest.approx(case_d_gap(theta), abs=1e-14)
    assert case_d_gap(theta) >= 0


@given(st.floats(0, np.pi - 1e-4))
def test_case_c_bound_exceeds_half(theta):
    assert qubit_bound_case_c(theta) > 0.5


def test_bounds_nonincreasing_in_theta():
    grid = np.linspace(0, np.pi, 200)
    assert np.all(np.diff([qubit_bound_case_c(t) for t in grid]) <= 1e-15)
    half = np.linspace(0, np.pi / 2, 200)
    for variant in ("n2", "general"):
        assert np.all(np.diff([qubit_bound_case_d(t, variant) for t in half]) <= 1e-15)


def test_F_examples():
    for t in np.linspace(0, 1, 11):
        assert F(0.0, t) == 0.5
    with pytest.raises(DomainError):
        F(1.0, 0.5)
    with pytest.raises(DomainError):
        F(0.5, 1.5)


def test_G_examples():
    for nu in (0.0, 0.3, 0.9):
        assert G(nu, 1.0) == pytest.approx(1.0)
        assert brute_G(nu, 1.0) == pytest.approx(1.0, abs=1e-9)
    val = 1 - 0.5 * np.sin(np.pi / 4)
    assert G(0.5, np.cos(np.pi / 4)) == pytest.approx(val, abs=1e-12)
    assert brute_G(0.5, np.cos(np.pi / 4)) == pytest.approx(val, abs=1e-9)


def test_G_matches_brute_force_maximum(rng):
    for _ in range(100):
        nu, t = rng.uniform(0, 0.999), rng.uniform(0, 1)
        assert abs(G(nu, t) - brute_G(nu, t)) <= 1e-7


def test_G_continuous_at_branch_point():
    for t in np.linspace(0.05, 0.95, 10):
        nu = 1 / (t + np.sqrt(1 - t * t))
        if nu >= 1:
            continue
        first = 1 - nu * np.sqrt(1 - t * t)
        second = (1 - nu * nu) / (2 * (1 - nu * t))
        assert first == pytest.approx(second, abs=1e-12)
        assert G(nu, t) == pytest.approx(first, abs=1e-12)


def test_stationary_gamma_maximizes_on_first_branch(rng):
    for _ in range(20):
        nu, t = rng.uniform(0, 0.6), rng.uniform(0, 1)
        if nu * (t + np.sqrt(1 - t * t)) > 1:
            continue
        g = stationary_gamma(nu, t)
        assert 0 <= g <= 1
        assert g_objective(nu, t, g) == pytest.approx(G(nu, t), abs=1e-10)


def test_case_d_params_examples():
    p = case_d_params(np.pi / 2, "n2")
    assert p.x_star == pytest.approx(0.0, abs=1e-12)
    assert p.nu_star == pytest.approx(1 / 3)
    assert p.gamma[0] == pytest.approx(0.0, abs=1e-15)
    assert F(p.nu_star, np.cos(p.x_star)) == pytest.approx(2 / 3)
    assert G(p.nu_star, np.cos(np.pi / 2 - p.x_star)) == pytest.approx(2 / 3)
    p0 = case_d_params(0.0, "n2")
    assert p0.x_star == 0.0 and p0.nu_star == pytest.approx(1.0)
    assert p0.bound == pytest.approx(1.0)
    pg = case_d_params(np.pi / 2, "general")
    assert pg.nu_star == pytest.approx(1 / 3)
    assert pg.bound == pytest.approx(2 / 3)


@pytest.mark.parametrize("theta", THETAS[1:])
def test_case_d_params_admissible_and_attain_bound(theta):
    p = case_d_params(theta, "n2")
    assert 0 <= p.nu_star < 1 and 0 <= p.gamma[0] <= 1
    assert p.branch_value <= 1 + 1e-12
    nu, x = p.nu_star, p.x_star
    branch = nu * (np.cos(theta - x) + np.sin(theta - x))
    assert branch == pytest.approx(p.branch_value, abs=1e-12)
    val = case_d_sufficient(nu, np.cos(x), [np.cos(theta - x)])
    assert val == pytest.approx(qubit_bound_case_d(theta, "n2"), abs=1e-9)

    q = case_d_params(theta, "general")
    assert 0 <= q.gamma[0] <= 1 / (1 + np.sin(theta)) + 1e-12
    val = case_d_sufficient(q.nu_star, 1.0, [np.cos(theta)])
    assert val == pytest.approx(qubit_bound_case_d(theta, "general"), abs=1e-9)


@pytest.mark.parametrize("theta", THETAS[1:])
def test_two_setting_reduced_bound_is_optimal(theta):
    xs = np.linspace(0, theta, 301)[:, None]
    nus = np.linspace(0, 0.999, 400)[None, :]
    f = (1 - nus ** 2) / (2 * (1 - nus * np.cos(xs)))
    vals = np.minimum(f, 1 - nus * np.sin(theta - xs))
    bound = 2 / (2 + np.sin(theta))
    assert vals.max() <= bound + 1e-9
    p = case_d_params(theta, "n2")
    at_opt = min(F(p.nu_star, np.cos(p.x_star)), 1 - p.nu_star * np.sin(theta - p.x_star))
    assert at_opt == pytest.approx(bound, abs=1e-9)


def test_analytic_threshold():
    dirs = pair(np.pi / 2)
    assert analytic_threshold("a", dirs) == 0.5
    assert analytic_threshold("b", dirs) == 0.5
    assert analytic_threshold("c", dirs) == pytest.approx(2 - np.sqrt(2))
    assert analytic_threshold("d", dirs) == pytest.approx(2 / 3)
    assert analytic_threshold("a", [Z, Z]) == 1.0
    assert np.isnan(analytic_threshold("c", dirs, nu_vis=0.9))
    assert set(CASES) == {"a", "b", "c", "d"}
