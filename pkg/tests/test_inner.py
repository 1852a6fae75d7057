from types import SimpleNamespace

import numpy as np
import pytest

from tfc_descent.errors import ConfigurationError, DivergenceError, RankDeficiencyError
from tfc_descent.inner import (
    InnerSettings, energy_costate_guess, gauss_newton_steps, initialize, least_squares_step, solve_inner,
)
from tfc_descent.jacobian import CollocatedProblem, ResidualSystem, UnknownVector
from tfc_descent.model import BoundaryConditions, ProfileKind, SegmentTimes, make_profile


def _problem(lander, bc, kind, times, nb=24, n=60):
    return CollocatedProblem(make_profile(kind, times, lander), bc, lander, nb, n)


@pytest.fixture(scope="module")
def converged(sol1, sol2, bc1, bc2, lander):
    return {
        "test1": _problem(lander, bc1, ProfileKind.MIN_MAX, sol1.times),
        "test2": _problem(lander, bc2, ProfileKind.MAX_MIN_MAX, sol2.times),
    }


def test_settings_validated():
    with pytest.raises(ConfigurationError):
        InnerSettings(max_iterations=0)
    with pytest.raises(ConfigurationError):
        InnerSettings(step_tolerance=0.0)
    with pytest.raises(ConfigurationError):
        InnerSettings(stall_tolerance=1.0)


def test_initialize_junction_on_straight_line(lander, bc1):
    times = SegmentTimes(0.0, 7.0, 30.0)
    p = _problem(lander, bc1, ProfileKind.MIN_MAX, times)
    u = UnknownVector.unpack(initialize(p), p.layout)
    np.testing.assert_allclose(u.junctions[0, 0], bc1.r0 + (bc1.rf - bc1.r0) * 7.0 / 30.0, rtol=1e-14)
    np.testing.assert_allclose(u.junctions[0, 1], (bc1.rf - bc1.r0) / 30.0, rtol=1e-14)


def test_initialize_endpoint_costate(lander, bc1):
    p = _problem(lander, bc1, ProfileKind.MIN_MAX, SegmentTimes(0.0, 7.0, 30.0))
    u = UnknownVector.unpack(initialize(p, costate_guess="endpoint"), p.layout)
    lam0 = p.costate(u, 0)[0]
    lamf = p.lambda_v_final(u)
    np.testing.assert_allclose(lam0, np.array([30.0, -10.0, -70.0]) / 76.81145747868608, rtol=1e-14)
    np.testing.assert_allclose(lamf, -bc1.r0 / np.linalg.norm(bc1.r0), rtol=1e-14)


def test_initialize_fits_line(lander, bc2):
    # the middle arc has both ends on the line, so the fit is exact
    p = _problem(lander, bc2, ProfileKind.MAX_MIN_MAX, SegmentTimes(0.0, 20.0, 40.0, 30.0))
    u = UnknownVector.unpack(initialize(p), p.layout)
    r, _, _ = p.segment_states(u, 1)
    e = p.segments[1]
    line = bc2.r0 + np.multiply.outer(e.t_nodes, (bc2.rf - bc2.r0) / 40.0)
    np.testing.assert_allclose(r, line, atol=1e-9)


def test_initialize_degenerate_line(lander):
    bc = BoundaryConditions([5.0, 0.0, 100.0], [0.0, 0.0, 0.0], [5.0, 0.0, 100.0], [0.0, 0.0, 0.0], 1905.0)
    p = _problem(lander, bc, ProfileKind.MIN_MAX, SegmentTimes(0.0, 3.0, 10.0))
    with pytest.raises(ConfigurationError, match="explicit"):
        initialize(p, costate_guess="endpoint")
    u = UnknownVector.unpack(initialize(p, [1.0, 0, 0], [0, 0, 1.0]), p.layout)
    assert np.max(np.abs(u.xi)) <= 1e-12


def test_initialize_rejects_unknown_guess(lander, bc1):
    p = _problem(lander, bc1, ProfileKind.MIN_MAX, SegmentTimes(0.0, 7.0, 30.0))
    with pytest.raises(ConfigurationError):
        initialize(p, costate_guess="psychic")


def test_energy_guess_zeroes_transversality(lander, bc1):
    p = _problem(lander, bc1, ProfileKind.MIN_MAX, SegmentTimes(0.0, 7.0, 30.0))
    _, lamf = energy_costate_guess(p)
    h = lander.alpha * p.thrust_f + lamf @ lander.a_g - p.beta_f * np.linalg.norm(lamf)
    assert abs(h) <= 1e-12


@pytest.mark.parametrize("case", ["test1", "test2"])
def test_converged_times_give_small_loss(converged, case):
    p = converged[case]
    res = solve_inner(p, initialize(p, costate_guess="energy"))
    assert res.residual_norm <= 1e-8
    assert res.iterations <= 10


@pytest.mark.parametrize("case", ["test1", "test2"])
def test_gauss_newton_monotone_on_reference_cases(converged, case):
    p = converged[case]
    h = solve_inner(p, initialize(p, costate_guess="energy")).history
    # ignore wobble once the residual sits at roundoff level
    assert all(b <= a or b <= 1e-9 for a, b in zip(h, h[1:]))


def test_fixed_point_takes_one_iteration(converged):
    p = converged["test1"]
    res = solve_inner(p, initialize(p, costate_guess="energy"))
    again = solve_inner(p, res.xi)
    assert again.iterations == 1
    assert again.reason == "step"


def test_normal_equations(converged):
    p = converged["test2"]
    sysm = p.system(initialize(p, costate_guess="energy"))
    dx = least_squares_step(sysm.J, sysm.L)
    JtL = sysm.J.T @ sysm.L
    assert np.linalg.norm(sysm.J.T @ (sysm.J @ dx - sysm.L)) <= 1e-8 * np.linalg.norm(JtL)


def test_rank_deficiency_names_columns(rng):
    J = rng.normal(size=(12, 5))
    J[:, 3] = 2.0 * J[:, 1]
    with pytest.raises(RankDeficiencyError) as info:
        least_squares_step(J, rng.normal(size=12))
    assert set(info.value.columns) & {1, 3}
    assert len(info.value.columns) == 1


def test_deterministic(converged):
    p = converged["test2"]
    a = solve_inner(p, initialize(p))
    b = solve_inner(p, initialize(p))
    np.testing.assert_array_equal(a.xi, b.xi)
    assert a.history == b.history


def test_plateau_stops_as_stalled(converged):
    # the endpoint costate guess lands on a plateau for this case
    p = converged["test1"]
    res = solve_inner(p, initialize(p, costate_guess="endpoint"))
    assert res.reason == "stalled"
    assert res.iterations < InnerSettings().max_iterations
    assert res.residual_norm == min(res.history)


class _Growing:
    """Residual that grows on every evaluation, whatever the iterate."""

    profile = SimpleNamespace(times=None)

    def __init__(self):
        self.calls = 0

    def system(self, x):
        self.calls += 1
        return ResidualSystem(L=np.full(2, float(self.calls)), J=np.eye(2))


def test_divergence_raised_without_damping():
    with pytest.raises(DivergenceError):
        solve_inner(_Growing(), np.zeros(2), InnerSettings(damping_fallback=False))


def test_max_iterations_reason():
    res = solve_inner(_Growing(), np.zeros(2), InnerSettings(max_iterations=2, damping_fallback=False))
    assert res.reason == "max_iterations" and res.iterations == 2
    assert np.all(np.isfinite(res.history))


def test_fixed_steps_run_exactly(converged):
    p = converged["test1"]
    res = gauss_newton_steps(p, initialize(p, costate_guess="energy"), 2)
    assert res.iterations == 2 and len(res.history) == 3 and res.reason == "fixed"
