"""Switching-time outer loop around the fixed-time collocation solve."""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigurationError, DescentError, InnerSolverError, OuterConvergenceError,
    ProfileClassificationError, SegmentCollapseError,
)
from .inner import InnerResult, InnerSettings, gauss_newton_steps, initialize, solve_inner
from .jacobian import CollocatedProblem, UnknownVector
from .mass_costate import solve_lambda_m
from .model import (
    TIME_MARGIN, BoundaryConditions, LanderConfig, ProfileKind, SegmentTimes,
    hamiltonian_history, make_profile, mass_used, switching_function,
)

log = logging.getLogger(__name__)

SHRINK_LIMIT = 0.5
FD_REFINE_STEPS = 2
# give up when |F| gains less than STALL_GAIN over STALL_WINDOW iterations
STALL_WINDOW = 5
STALL_GAIN = 0.01


class ProfileMode(enum.Enum):
    MIN_MAX = "min-max"
    MAX_MIN_MAX = "max-min-max"
    AUTO = "auto"


@dataclass(frozen=True)
class OuterSettings:
    time_tolerance: float = 1e-9
    # a converged step must also leave the residual this small
    residual_tolerance: float = 1e-6
    # a segment shorter than this counts as collapsed
    collapse_tolerance: float = 1e-3
    fd_step: float = 1e-6
    max_iterations: int = 100
    initial_times: SegmentTimes | None = None
    profile_mode: ProfileMode = ProfileMode.AUTO
    n_basis: int = 24
    n_nodes: int = 60
    costate_guess: str = "energy"
    inner: InnerSettings = field(default_factory=InnerSettings)

    def __post_init__(self):
        if (self.time_tolerance <= 0 or self.residual_tolerance <= 0 or self.collapse_tolerance <= 0
                or self.fd_step <= 0 or self.max_iterations < 1):
            raise ConfigurationError("outer tolerances and step must be positive")
        if self.n_nodes < 5:
            raise ConfigurationError(f"need at least 5 collocation intervals, got {self.n_nodes}")
        if self.n_basis < 1 or self.n_basis + 4 > self.n_nodes + 1:
            raise ConfigurationError(
                f"n_basis={self.n_basis} incompatible with {self.n_nodes + 1} nodes per segment")


@dataclass
class GuidanceSolution:
    kind: ProfileKind
    times: SegmentTimes
    xi: np.ndarray
    t: np.ndarray
    segment: np.ndarray
    r: np.ndarray
    v: np.ndarray
    a: np.ndarray
    thrust: np.ndarray
    mass: np.ndarray
    lam_v: np.ndarray
    lam_r: np.ndarray
    lam_m: np.ndarray
    H: np.ndarray
    sigma: np.ndarray
    loss: np.ndarray
    m_used: float
    inner_iterations: list = field(default_factory=list)
    outer_iterations: int = 0
    wall_time: float = 0.0
    mass_costate_residual: float = 0.0

    @property
    def l2_loss(self) -> float:
        return float(np.linalg.norm(self.loss))

    @property
    def l2_hamiltonian(self) -> float:
        return float(np.linalg.norm(self.H))

    def segment_mask(self, s: int) -> np.ndarray:
        return self.segment == s

    def metrics(self) -> dict:
        b = self.times
        out = {
            "profile": self.kind.value,
            "t1": b.t1,
            "t2": b.t2,
            "tf": b.tf,
            "m_used": self.m_used,
            "l2_loss": self.l2_loss,
            "l2_hamiltonian": self.l2_hamiltonian,
            "max_abs_hamiltonian": float(np.max(np.abs(self.H))),
            "lambda_m0": float(self.lam_m[0]),
            "mass_costate_residual": self.mass_costate_residual,
            "inner_iterations_max": max(self.inner_iterations, default=0),
            "inner_iterations_total": int(sum(self.inner_iterations)),
            "inner_calls": len(self.inner_iterations),
            "outer_iterations": self.outer_iterations,
            "wall_time_s": self.wall_time,
        }
        if b.t2 is None:
            del out["t2"]
        return out


def default_initial_times(bc: BoundaryConditions, lander: LanderConfig, kind: ProfileKind) -> SegmentTimes:
    tf = 1.5 * float(np.linalg.norm(bc.v0)) / float(np.linalg.norm(lander.a_g))
    if kind is ProfileKind.MIN_MAX:
        return SegmentTimes(0.0, 0.25 * tf, tf)
    return SegmentTimes(0.0, 0.25 * tf, tf, 0.5 * tf)


class FixedTimeSolve:
    """Inner solve at given times plus everything derived from it."""

    def __init__(self, kind, times, bc, lander, settings: OuterSettings, warm=None, fixed_steps=None):
        self.profile = make_profile(kind, times, lander)
        self.problem = CollocatedProblem(self.profile, bc, lander, settings.n_basis, settings.n_nodes)
        x0 = warm if warm is not None else initialize(self.problem, costate_guess=settings.costate_guess)
        try:
            if fixed_steps is None:
                self.inner: InnerResult = solve_inner(self.problem, x0, settings.inner)
            else:
                self.inner = gauss_newton_steps(self.problem, x0, fixed_steps)
        except InnerSolverError as exc:
            exc.times = times
            raise
        self.settings = settings
        self._hist = None

    @property
    def xi(self):
        return self.inner.xi

    def histories(self):
        if self._hist is not None:
            return self._hist
        prob, prof = self.problem, self.profile
        u = UnknownVector.unpack(self.xi, prob.layout)
        lam_r = -u.xi_lambda.reshape(3, 2)[:, 1] * prob.global_map.c
        segs = []
        lam = [prob.costate(u, s) for s in range(prob.S)]
        mc = solve_lambda_m(prob.grid, prof.times.boundaries, prof.levels, prob.mass,
                            [np.linalg.norm(l, axis=1) for l in lam], self.settings.n_basis)
        loss = prob.residual(self.xi)
        for s, e in enumerate(prob.segments):
            r, v, a = prob.segment_states(u, s)
            n = e.t_nodes.size
            thrust = np.full(n, prof.levels[s])
            H = hamiltonian_history(thrust, prob.mass[s], v, lam[s], lam_r, mc.values[s], prob.lander)
            sig = switching_function(lam[s], mc.values[s], prob.mass[s], prob.lander.alpha)
            segs.append(dict(t=e.t_nodes, segment=np.full(n, s), r=r, v=v, a=a, thrust=thrust,
                             mass=prob.mass[s], lam_v=lam[s], lam_r=np.tile(lam_r, (n, 1)),
                             lam_m=mc.values[s], H=H, sigma=sig))
        hist = {k: np.concatenate([sg[k] for sg in segs]) for k in segs[0]}
        hist["loss"] = loss
        hist["mass_costate_residual"] = mc.max_residual
        self._hist = hist
        return hist

    def segment_hamiltonian(self, s: int) -> np.ndarray:
        h = self.histories()
        return h["H"][h["segment"] == s]

    def residual(self) -> np.ndarray:
        """Unsigned outer residual: per-segment L2(H) for all but the last segment, then L2(L)."""
        S = self.problem.S
        comps = [np.linalg.norm(self.segment_hamiltonian(s)) for s in range(S - 1)]
        comps.append(np.linalg.norm(self.histories()["loss"]))
        return np.array(comps)

    def signed_residual(self) -> np.ndarray:
        """Smooth outer residual driven to zero by the switching-time Newton loop.

        Component s is sqrt(n) times the mean of H on segment s, which equals
        the segment's L2(H) with a sign whenever H is flat. The last segment
        stands in for L2(L): the inner solve pins H(tf) to zero, so a nonzero
        mean there measures how far the dynamics are from being satisfied.
        """
        n = self.problem.grid.size
        return np.array([np.sqrt(n) * np.mean(self.segment_hamiltonian(s))
                         for s in range(self.problem.S)])

    def to_solution(self, **extra) -> GuidanceSolution:
        h = self.histories()
        return GuidanceSolution(
            kind=self.profile.kind, times=self.profile.times, xi=self.xi.copy(),
            t=h["t"], segment=h["segment"], r=h["r"], v=h["v"], a=h["a"], thrust=h["thrust"],
            mass=h["mass"], lam_v=h["lam_v"], lam_r=h["lam_r"], lam_m=h["lam_m"], H=h["H"],
            sigma=h["sigma"], loss=h["loss"], m_used=mass_used(self.profile, self.problem.lander.alpha),
            mass_costate_residual=h["mass_costate_residual"], **extra,
        )


def _free_times(times: SegmentTimes) -> np.ndarray:
    return np.array(times.boundaries[1:])


def _times_from(x, t0: float) -> SegmentTimes:
    return SegmentTimes.from_boundaries([t0, *x])


def _ordered(x, t0: float) -> bool:
    b = np.concatenate([[t0], x])
    return bool(np.all(np.diff(b) >= TIME_MARGIN))


def outer_residual(times: SegmentTimes, kind: ProfileKind, bc: BoundaryConditions,
                   lander: LanderConfig, settings: OuterSettings = OuterSettings(), warm=None) -> np.ndarray:
    return FixedTimeSolve(kind, times, bc, lander, settings, warm).residual()


def solve_switching_times(bc: BoundaryConditions, lander: LanderConfig, kind: ProfileKind,
                          settings: OuterSettings = OuterSettings()) -> GuidanceSolution:
    """Damped forward-difference Newton on the switching and final times.

    Raises SegmentCollapseError when an arc shrinks below the collapse
    tolerance and OuterConvergenceError when the iteration stalls.
    """
    start = time.perf_counter()
    times = settings.initial_times or default_initial_times(bc, lander, kind)
    if (times.t2 is None) != (kind is ProfileKind.MIN_MAX):
        raise ConfigurationError(f"initial times {times.boundaries} do not match profile {kind.value}")
    t0 = times.t0
    x = _free_times(times)
    inner_its = []

    def evaluate(xv, warm, fixed_steps=None):
        fs = FixedTimeSolve(kind, _times_from(xv, t0), bc, lander, settings, warm, fixed_steps)
        inner_its.append(fs.inner.iterations)
        return fs, fs.signed_residual()

    base, F = evaluate(x, None)
    best = (float(np.linalg.norm(F)), x.copy(), base)
    norms = [best[0]]
    for it in range(1, settings.max_iterations + 1):
        # every column uses the same fixed refinement from the base iterate,
        # so differences are free of inner stopping noise
        n = x.size
        Jf = np.empty((n, n))
        _, F0 = evaluate(x, base.xi, FD_REFINE_STEPS)
        for k in range(n):
            h = settings.fd_step * max(1.0, abs(x[k]))
            xp = x.copy()
            xp[k] += h
            if not _ordered(xp, t0):
                xp[k] -= 2 * h
                h = -h
            try:
                _, Fp = evaluate(xp, base.xi, FD_REFINE_STEPS)
            except DescentError:
                xp[k] -= 2 * h
                h = -h
                _, Fp = evaluate(xp, base.xi, FD_REFINE_STEPS)
            Jf[:, k] = (Fp - F0) / h
        try:
            dx = -np.linalg.solve(Jf, F)
        except np.linalg.LinAlgError:
            dx = -np.linalg.lstsq(Jf, F, rcond=None)[0]
        # no segment may lose more than half its length in one step
        lam = 1.0
        b = np.concatenate([[t0], x])
        db = np.concatenate([[0.0], dx])
        gaps, dgaps = np.diff(b), np.diff(db)
        shrink = dgaps < 0
        if np.any(shrink):
            lam = min(1.0, float(np.min(SHRINK_LIMIT * (gaps[shrink] - TIME_MARGIN) / -dgaps[shrink])))
        normF = float(np.linalg.norm(F))
        accepted = False
        for _ in range(30):
            xt = x + lam * dx
            try:
                trial, Ft = evaluate(xt, base.xi)
            except DescentError as exc:
                log.debug("outer trial at %s failed: %s", xt, exc)
                lam *= 0.5
                continue
            if np.linalg.norm(Ft) < normF or lam * np.max(np.abs(dx)) <= settings.time_tolerance:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise OuterConvergenceError(
                f"line search failed at iteration {it}", best_times=_times_from(best[1], t0),
                best_residual=best[0])
        step = lam * dx
        x, base, F = xt, trial, Ft
        normF = float(np.linalg.norm(F))
        log.info("outer it %d: times %s |F| = %.3e step %.3e", it, x, normF, np.max(np.abs(step)))
        if normF < best[0]:
            best = (normF, x.copy(), base)
        norms.append(normF)
        if len(norms) > STALL_WINDOW and normF > (1.0 - STALL_GAIN) * norms[-1 - STALL_WINDOW] \
                and normF > settings.residual_tolerance:
            raise OuterConvergenceError(
                f"outer iteration stagnated at |F| = {normF:.3e}",
                best_times=_times_from(best[1], t0), best_residual=best[0])
        gaps = np.diff(np.concatenate([[t0], x]))
        if np.min(gaps) < settings.collapse_tolerance:
            k = int(np.argmin(gaps))
            raise SegmentCollapseError(
                f"segment {k + 1} of {kind.value} collapsed to {gaps[k]:.3e} s",
                best_times=_times_from(best[1], t0), best_residual=best[0])
        if np.max(np.abs(step)) <= settings.time_tolerance:
            if normF > settings.residual_tolerance:
                raise OuterConvergenceError(
                    f"outer iteration stalled with |F| = {normF:.3e}",
                    best_times=_times_from(best[1], t0), best_residual=best[0])
            return base.to_solution(inner_iterations=inner_its, outer_iterations=it,
                                    wall_time=time.perf_counter() - start)
    raise OuterConvergenceError(
        f"no convergence in {settings.max_iterations} outer iterations",
        best_times=_times_from(best[1], t0), best_residual=best[0])


def sign_pattern(solution: GuidanceSolution) -> dict:
    """Switching-function signs on segment interiors against what the profile needs.

    Minimum thrust is optimal where sigma > 0 and maximum thrust where
    sigma < 0, so a min-max solution needs (+, -) and max-min-max (-, +, -).
    """
    want = [1.0, -1.0] if solution.kind is ProfileKind.MIN_MAX else [-1.0, 1.0, -1.0]
    segments = []
    for s, w in enumerate(want):
        sig = solution.sigma[solution.segment == s][1:-1]
        segments.append({
            "expected": "+" if w > 0 else "-",
            "min": float(np.min(sig)),
            "max": float(np.max(sig)),
            "consistent": bool(np.all(w * sig > 0)),
        })
    return {"profile": solution.kind.value, "segments": segments,
            "consistent": all(seg["consistent"] for seg in segments)}


def _attempt(bc, lander, kind, settings):
    try:
        sol = solve_switching_times(bc, lander, kind, settings)
    except (OuterConvergenceError, InnerSolverError) as exc:
        log.info("%s attempt failed: %s", kind.value, exc)
        return None, {"profile": kind.value, "error": str(exc), "consistent": False}
    return sol, sign_pattern(sol)


def _settings_for(kind: ProfileKind, settings: OuterSettings) -> OuterSettings:
    # user initial times only apply to the profile they have the shape of
    times = settings.initial_times
    if times is not None and (times.t2 is None) != (kind is ProfileKind.MIN_MAX):
        return replace(settings, initial_times=None)
    return settings


def select_profile(bc: BoundaryConditions, lander: LanderConfig,
                   settings: OuterSettings = OuterSettings()) -> GuidanceSolution:
    """Solve min-max first and fall back to max-min-max when its switching function disagrees."""
    start = time.perf_counter()
    diagnostics = {}
    for kind in (ProfileKind.MIN_MAX, ProfileKind.MAX_MIN_MAX):
        sol, diagnostics[kind.value] = _attempt(bc, lander, kind, _settings_for(kind, settings))
        if sol is not None and diagnostics[kind.value]["consistent"]:
            sol.wall_time = time.perf_counter() - start
            return sol
    raise ProfileClassificationError(
        "neither min-max nor max-min-max gave a consistent switching function",
        diagnostics=diagnostics)


def solve(bc: BoundaryConditions, lander: LanderConfig,
          settings: OuterSettings = OuterSettings()) -> GuidanceSolution:
    """Entry point honouring ``settings.profile_mode``."""
    if settings.profile_mode is ProfileMode.MIN_MAX:
        return solve_switching_times(bc, lander, ProfileKind.MIN_MAX, settings)
    if settings.profile_mode is ProfileMode.MAX_MIN_MAX:
        return solve_switching_times(bc, lander, ProfileKind.MAX_MIN_MAX, settings)
    return select_profile(bc, lander, settings)
