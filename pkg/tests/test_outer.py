import numpy as np
import pytest

from tfc_descent.errors import (
    ConfigurationError, OuterConvergenceError, ProfileClassificationError, SegmentCollapseError,
)
from tfc_descent.model import BoundaryConditions, ProfileKind, SegmentTimes, make_profile, mass_at
from tfc_descent.outer import (
    FixedTimeSolve, OuterSettings, ProfileMode, default_initial_times, outer_residual, select_profile,
    sign_pattern, solve, solve_switching_times,
)


def test_settings_validated():
    with pytest.raises(ConfigurationError):
        OuterSettings(fd_step=0.0)
    with pytest.raises(ConfigurationError):
        OuterSettings(n_nodes=4)
    with pytest.raises(ConfigurationError):
        OuterSettings(n_basis=60, n_nodes=60)


def test_default_initial_times(lander, bc1):
    t = default_initial_times(bc1, lander, ProfileKind.MIN_MAX)
    assert t.tf == pytest.approx(1.5 * np.linalg.norm(bc1.v0) / 3.7114)
    assert t.t1 == pytest.approx(0.25 * t.tf) and t.t2 is None
    t3 = default_initial_times(bc1, lander, ProfileKind.MAX_MIN_MAX)
    assert t3.t2 == pytest.approx(0.5 * t3.tf)


def test_residual_vanishes_at_converged_times(sol1, bc1, lander):
    F = outer_residual(sol1.times, ProfileKind.MIN_MAX, bc1, lander)
    assert F.shape == (2,)
    assert np.all(F <= 1e-7)


def test_residual_sensitive_to_final_time(sol1, bc1, lander):
    t = sol1.times
    F = outer_residual(SegmentTimes(0.0, t.t1, t.tf + 1.0), ProfileKind.MIN_MAX, bc1, lander)
    assert F[0] > 1e-4


def test_residual_length_three_phase(bc2, lander):
    F = outer_residual(SegmentTimes(0.0, 30.0, 45.0, 39.0), ProfileKind.MAX_MIN_MAX, bc2, lander)
    assert F.shape == (3,) and np.all(F >= 0)


def test_signed_residual_tracks_unsigned_near_root(sol2, bc2, lander):
    t = sol2.times
    fs = FixedTimeSolve(ProfileKind.MAX_MIN_MAX, SegmentTimes(0.0, t.t1 + 1e-3, t.tf, t.t2), bc2, lander,
                        OuterSettings())
    signed, unsigned = fs.signed_residual(), fs.residual()
    # sqrt(n) |mean| never exceeds the L2 norm and is close to it while H is nearly flat
    assert np.all(np.abs(signed[:2]) <= unsigned[:2] * (1 + 1e-12))
    assert np.all(np.abs(signed[:2]) >= 0.5 * unsigned[:2])


@pytest.mark.parametrize("case", ["test1", "test2"])
def test_hamiltonian_flat(case, sol1, sol2):
    sol = {"test1": sol1, "test2": sol2}[case]
    assert np.max(np.abs(sol.H)) <= 1e-6


@pytest.mark.parametrize("case", ["test1", "test2"])
def test_switching_function_at_switches(case, sol1, sol2):
    sol = {"test1": sol1, "test2": sol2}[case]
    for s in range(len(sol.times.switches)):
        assert abs(sol.sigma[sol.segment == s][-1]) <= 1e-3
    assert sign_pattern(sol)["consistent"]


def test_sign_pattern_report(sol2):
    rep = sign_pattern(sol2)
    assert rep["profile"] == "max-min-max"
    assert [s["expected"] for s in rep["segments"]] == ["-", "+", "-"]
    assert rep["segments"][1]["min"] > 0


def test_mass_used_identity(solutions, lander):
    for sol, bc in solutions.values():
        prof = make_profile(sol.kind, sol.times, lander)
        b = sol.times.boundaries
        direct = lander.alpha * sum(T * (b[s + 1] - b[s]) for s, T in enumerate(prof.levels))
        assert sol.m_used == pytest.approx(direct, rel=1e-12)
        assert abs(bc.m0 - mass_at(prof, bc.m0, lander.alpha, sol.times.tf) - sol.m_used) <= 1e-9
        assert abs(bc.m0 - sol.mass[-1] - sol.m_used) <= 1e-9


def test_histories_aligned(sol2):
    n = sol2.t.size
    for name in ("r", "v", "a", "lam_v", "lam_r"):
        assert getattr(sol2, name).shape == (n, 3)
    for name in ("thrust", "mass", "lam_m", "H", "sigma", "segment"):
        assert getattr(sol2, name).shape == (n,)
    assert np.all(np.diff(sol2.t) >= 0)
    assert sol2.t[0] == 0.0 and sol2.t[-1] == sol2.times.tf


def test_iteration_counts(sol1, sol2):
    for sol in (sol1, sol2):
        assert max(sol.inner_iterations) <= 10
        assert sol.outer_iterations <= 60
        m = sol.metrics()
        assert m["inner_calls"] == len(sol.inner_iterations)


def test_metrics_keys(sol1, sol2):
    assert "t2" not in sol1.metrics()
    assert sol2.metrics()["t2"] == sol2.times.t2


def test_auto_selects_min_max(auto1):
    assert auto1.kind is ProfileKind.MIN_MAX


def test_auto_selects_max_min_max(auto2, sol2):
    assert auto2.kind is ProfileKind.MAX_MIN_MAX
    assert auto2.times.tf == pytest.approx(sol2.times.tf, abs=1e-6)


def test_forced_mode_bypasses_classification(sol2):
    # min-max is tried first in auto mode; a forced run reports only its own outer loop
    assert sol2.kind is ProfileKind.MAX_MIN_MAX
    assert sol2.wall_time > 0


def test_mismatched_initial_times(bc1, lander):
    s = OuterSettings(initial_times=SegmentTimes(0.0, 7.0, 31.0))
    with pytest.raises(ConfigurationError):
        solve_switching_times(bc1, lander, ProfileKind.MAX_MIN_MAX, s)


def test_auto_ignores_times_of_other_shape(bc1, lander):
    s = OuterSettings(initial_times=SegmentTimes(0.0, 10.0, 35.0, 20.0))
    assert select_profile(bc1, lander, s).kind is ProfileKind.MIN_MAX


def test_iteration_cap_reports_best(bc1, lander):
    with pytest.raises(OuterConvergenceError) as info:
        solve(bc1, lander, OuterSettings(profile_mode=ProfileMode.MIN_MAX, max_iterations=1))
    err = info.value
    assert isinstance(err.best_times, SegmentTimes) and np.isfinite(err.best_residual)


def test_wrong_profile_does_not_converge(bc1, lander):
    with pytest.raises(OuterConvergenceError):
        solve(bc1, lander, OuterSettings(profile_mode=ProfileMode.MAX_MIN_MAX))


def test_collapse_detected(bc1, lander):
    # every arc of a max-min-max fit to this case is shorter than 10 s
    with pytest.raises(SegmentCollapseError) as info:
        solve(bc1, lander, OuterSettings(profile_mode=ProfileMode.MAX_MIN_MAX, collapse_tolerance=10.0))
    assert "collapsed" in str(info.value)


def test_classification_failure(lander, monkeypatch):
    import tfc_descent.outer as outer

    bc = BoundaryConditions([-900.0, 100.0, 1500.0], [30.0, -10.0, -70.0], [0.0] * 3, [0.0] * 3, 1905.0)
    monkeypatch.setattr(outer, "sign_pattern", lambda sol: {"consistent": False, "profile": sol.kind.value})
    monkeypatch.setattr(outer, "solve_switching_times",
                        lambda bc, lander, kind, settings: type("S", (), {"kind": kind})())
    with pytest.raises(ProfileClassificationError) as info:
        select_profile(bc, lander)
    assert set(info.value.diagnostics) == {"min-max", "max-min-max"}
