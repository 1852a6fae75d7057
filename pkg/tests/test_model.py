import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from tfc_descent.errors import (
    ConfigurationError, InfeasibleProfileError, SingularCostateError,
)
from tfc_descent.model import (
    BoundaryConditions, ProfileKind, SegmentTimes, ThrustProfile, beta_at, derive_params,
    dynamics_loss, hamiltonian_history, hamiltonian_loss, make_profile, mass_at, mass_used,
    segment_start_masses, switching_function, thrust_at,
)


def quadrature_mass(profile, m0, alpha, t):
    """m(t) by integrating mdot = -alpha T arc by arc, independent of mass_at."""
    b = profile.times.boundaries
    m = m0
    for k in range(len(b) - 1):
        hi = min(t, b[k + 1])
        if hi <= b[k]:
            break
        T = profile.levels[k]
        m = solve_ivp(lambda _, y, T=T: [-alpha * T], (b[k], hi), [m], rtol=1e-13, atol=1e-12,
                      method="DOP853").y[0, -1]
    return m


def test_reference_lander_constants(lander):
    assert lander.alpha == pytest.approx(5.0863e-4, rel=1e-4)
    assert lander.t_min == pytest.approx(4971.81, abs=0.01)
    assert lander.t_max == pytest.approx(13258.18, abs=0.01)


def test_uncanted_single_engine():
    lan = derive_params([0, 0, -1.62], 300.0, 9.81, 1000.0, 1, 0.0)
    assert lan.t_min == pytest.approx(300.0)
    assert lan.t_max == pytest.approx(800.0)
    assert lan.v_ex == pytest.approx(300.0 * 9.81)


@pytest.mark.parametrize("field, value", [("isp", 0.0), ("g0", -1.0), ("t_bar", float("nan")),
                                          ("n_engines", 0)])
def test_derive_params_rejects_nonpositive(field, value):
    kw = dict(a_g=[0, 0, -3.7], isp=225.0, g0=9.8, t_bar=3100.0, n_engines=6, cant=0.3)
    kw[field] = value
    with pytest.raises(ConfigurationError):
        derive_params(**kw)


def test_derive_params_rejects_bad_cant_and_gravity():
    with pytest.raises(ConfigurationError):
        derive_params([0, 0, -3.7], 225, 9.8, 3100, 6, math.pi / 2)
    with pytest.raises(ConfigurationError):
        derive_params([0, -3.7], 225, 9.8, 3100, 6, 0.1)


def test_boundary_conditions_validate():
    with pytest.raises(ConfigurationError):
        BoundaryConditions([0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0], 10.0)
    with pytest.raises(ConfigurationError):
        BoundaryConditions([0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0], 0.0)


def test_segment_times_ordering():
    SegmentTimes(0.0, 5.0, 20.0, 10.0)
    for bad in [(0.0, 5.0, 4.0), (0.0, 0.0, 4.0), (0.0, 5.0, 20.0, 4.0), (0.0, 5.0, 20.0, 25.0)]:
        with pytest.raises(ConfigurationError):
            SegmentTimes(*bad)
    assert SegmentTimes.from_boundaries([0, 1, 2, 3]).boundaries == (0, 1, 2, 3)


def test_profile_shape_checks(lander):
    with pytest.raises(ConfigurationError):
        make_profile(ProfileKind.MIN_MAX, SegmentTimes(0, 1, 3, 2), lander)
    with pytest.raises(ConfigurationError):
        make_profile(ProfileKind.MAX_MIN_MAX, SegmentTimes(0, 1, 3), lander)
    with pytest.raises(ConfigurationError):
        ThrustProfile(ProfileKind.MIN_MAX, SegmentTimes(0, 1, 3), 5.0, 5.0)


def test_thrust_program(lander):
    mm = make_profile(ProfileKind.MIN_MAX, SegmentTimes(0.0, 7.443, 31.2623), lander)
    assert thrust_at(mm, 3.0) == lander.t_min
    assert thrust_at(mm, 7.443) == lander.t_max  # right-continuous at the switch
    mmm = make_profile(ProfileKind.MAX_MIN_MAX, SegmentTimes(0.0, 32.418, 44.823, 38.838), lander)
    assert thrust_at(mmm, 35.0) == lander.t_min
    assert thrust_at(mmm, 44.823) == lander.t_max
    assert thrust_at(mmm, 0.0) == lander.t_max
    with pytest.raises(ConfigurationError):
        thrust_at(mmm, 50.0)


def test_mass_at_start_and_first_switch(lander):
    prof = make_profile(ProfileKind.MIN_MAX, SegmentTimes(0.0, 7.4430, 31.2623), lander)
    assert mass_at(prof, 1905.0, lander.alpha, 0.0) == 1905.0
    assert mass_at(prof, 1905.0, lander.alpha, 7.4430) == pytest.approx(1886.18, abs=0.01)
    assert mass_used(prof, lander.alpha) == pytest.approx(179.447, abs=0.01)


@pytest.mark.parametrize("kind, times", [
    (ProfileKind.MIN_MAX, SegmentTimes(0.0, 7.4430, 31.2623)),
    (ProfileKind.MAX_MIN_MAX, SegmentTimes(0.0, 32.418, 44.823, 38.838)),
])
def test_mass_matches_independent_quadrature(lander, kind, times):
    prof = make_profile(kind, times, lander)
    b = times.boundaries
    for k in range(len(b) - 1):
        t_check = np.linspace(b[k], b[k + 1], 5)[1:]
        assert abs(mass_at(prof, 1905.0, lander.alpha, b[k + 1])
                   - quadrature_mass(prof, 1905.0, lander.alpha, b[k + 1])) <= 1e-9
        assert np.all(np.diff(mass_at(prof, 1905.0, lander.alpha, t_check)) < 0)
    m = quadrature_mass(prof, 1905.0, lander.alpha, b[-1])
    assert abs((1905.0 - m) - mass_used(prof, lander.alpha)) <= 1e-9


def test_beta_and_infeasible_mass(lander):
    prof = make_profile(ProfileKind.MIN_MAX, SegmentTimes(0.0, 5.0, 10.0), lander)
    assert beta_at(prof, 1905.0, lander.alpha, 5.0) == pytest.approx(
        lander.t_max / mass_at(prof, 1905.0, lander.alpha, 5.0))
    with pytest.raises(InfeasibleProfileError):
        segment_start_masses(prof, 30.0, lander.alpha)


def test_dynamics_loss_identity(lander, rng):
    lam = rng.normal(size=(7, 3))
    beta = rng.uniform(1, 5, size=7)
    a = lander.a_g - beta[:, None] * lam / np.linalg.norm(lam, axis=1)[:, None]
    np.testing.assert_allclose(dynamics_loss(a, lam, beta, lander.a_g), 0.0, atol=1e-15)


def test_dynamics_loss_cases(lander):
    a = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_allclose(dynamics_loss(a, [[0.3, 0, 1]], [0.0], lander.a_g), a - lander.a_g)
    np.testing.assert_allclose(dynamics_loss([lander.a_g], [[1.0, 0, 0]], [2.0], lander.a_g), [[2, 0, 0]])
    with pytest.raises(SingularCostateError):
        dynamics_loss(a, [[0.0, 0.0, 0.0]], [1.0], lander.a_g)


def test_hamiltonian_loss_constructed_root(lander):
    lam = np.array([0.2, -0.1, 0.7])
    thrust = lander.t_max
    # beta chosen so that beta |lam| = alpha T + lam . a_g
    beta = (lander.alpha * thrust + lam @ lander.a_g) / np.linalg.norm(lam)
    assert hamiltonian_loss(lam, beta, thrust, lander) == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(SingularCostateError):
        hamiltonian_loss([0.0, 0.0, 0.0], beta, thrust, lander)


def test_hamiltonian_history_null_and_shapes(lander, rng):
    n = 5
    H = hamiltonian_history(np.zeros(n), np.full(n, 1000.0), rng.normal(size=(n, 3)),
                            np.zeros((n, 3)), np.zeros(3), np.zeros(n), lander)
    np.testing.assert_array_equal(H, 0.0)
    v, lam_r = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    H = hamiltonian_history(np.ones(n), np.ones(n), v, np.ones((n, 3)), lam_r, np.zeros(n), lander)
    np.testing.assert_allclose(H - np.sum(v * lam_r, axis=1),
                               lander.alpha + lander.a_g.sum() - math.sqrt(3))


def test_switching_function_root(lander):
    m = np.array([1500.0])
    lam = np.array([[lander.alpha * 1500.0, 0.0, 0.0]])
    assert switching_function(lam, [0.0], m, lander.alpha)[0] == pytest.approx(0.0, abs=1e-18)
