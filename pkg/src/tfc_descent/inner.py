"""Gauss-Newton iteration on the collocated unknowns at fixed switching times."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DivergenceError, RankDeficiencyError
from .jacobian import CollocatedProblem, UnknownVector

log = logging.getLogger(__name__)

RANK_RTOL = 1e-13


@dataclass(frozen=True)
class InnerSettings:
    max_iterations: int = 20
    step_tolerance: float = 1e-12
    residual_tolerance: float = 1e-12
    # relative part of the L2-change test; only bites while the residual is large
    relative_tolerance: float = 1e-8
    # a plateau: this many iterations each gaining less than stall_tolerance
    stall_iterations: int = 3
    stall_tolerance: float = 1e-3
    damping_fallback: bool = True

    def __post_init__(self):
        if (self.max_iterations < 1 or self.step_tolerance <= 0 or self.residual_tolerance <= 0
                or self.relative_tolerance < 0 or self.stall_iterations < 1 or not 0 <= self.stall_tolerance < 1):
            raise ConfigurationError("inner settings must be positive")


@dataclass
class InnerResult:
    xi: np.ndarray
    iterations: int
    history: list = field(default_factory=list)
    reason: str = ""

    @property
    def residual_norm(self) -> float:
        return self.history[-1]


COSTATE_GUESSES = ("energy", "endpoint")


def energy_costate_guess(problem: CollocatedProblem):
    """Endpoint values of lambda_v from the minimum-energy transfer.

    Minimizing the integral of |u|^2 under r'' = a_g + u gives a thrust
    acceleration u(t) affine in time, the same shape lambda_v has, so
    lambda_v = -s u(t) with the scale s chosen to zero the transversality
    residual.
    """
    bc, lander = problem.bc, problem.lander
    b = problem.profile.times.boundaries
    tf = b[-1] - b[0]
    A = np.array([[tf ** 2 / 2.0, tf ** 3 / 6.0], [tf, tf ** 2 / 2.0]])
    rhs = np.vstack([bc.rf - bc.r0 - bc.v0 * tf - 0.5 * lander.a_g * tf ** 2,
                     bc.vf - bc.v0 - lander.a_g * tf])
    p, q = np.linalg.solve(A, rhs)
    lam0, lamf = -p, -(p + q * tf)
    if np.linalg.norm(lamf) == 0.0 or np.linalg.norm(lam0) == 0.0:
        raise ConfigurationError("minimum-energy costate guess is singular; supply one explicitly")
    denom = problem.beta_f * np.linalg.norm(lamf) - lamf @ lander.a_g
    scale = lander.alpha * problem.thrust_f / denom if denom > 0 else 1.0 / np.linalg.norm(lamf)
    return scale * lam0, scale * lamf


def initialize(problem: CollocatedProblem, lambda_v0=None, lambda_vf=None,
               costate_guess: str = "endpoint") -> np.ndarray:
    """Straight-line state guess plus a costate guess.

    With ``costate_guess="endpoint"`` lambda_v points along ``v0 / |v0|`` at
    t0 and ``-r0 / |r0|`` at t_f; ``"energy"`` uses
    :func:`energy_costate_guess`. Explicit endpoint values override both.
    """
    if costate_guess not in COSTATE_GUESSES:
        raise ConfigurationError(f"unknown costate guess {costate_guess!r}")
    bc = problem.bc
    b = problem.profile.times.boundaries
    t0, tf = b[0], b[-1]
    slope = (bc.rf - bc.r0) / (tf - t0)

    def line(t):
        return bc.r0 + np.multiply.outer(np.asarray(t) - t0, slope)

    junctions = np.array([[line(tj), slope] for tj in b[1:-1]]).reshape(-1, 2, 3)
    xi = np.zeros((problem.S, 3, problem.n_basis))
    u = UnknownVector(xi, junctions, np.zeros(6))
    for s, e in enumerate(problem.segments):
        start, end = problem.boundary_states(u, s)
        data = np.vstack([start[0], end[0], start[1], end[1]])
        target = line(e.t_nodes) - e.W0 @ data
        xi[s] = np.linalg.lstsq(e.P0, target, rcond=None)[0].T

    if costate_guess == "energy" and lambda_v0 is None and lambda_vf is None:
        lambda_v0, lambda_vf = energy_costate_guess(problem)
    if lambda_v0 is None:
        n = np.linalg.norm(bc.v0)
        if n == 0.0:
            raise ConfigurationError("|v0| = 0: supply an explicit initial costate guess")
        lambda_v0 = bc.v0 / n
    if lambda_vf is None:
        n = np.linalg.norm(bc.r0)
        if n == 0.0:
            raise ConfigurationError("|r0| = 0: supply an explicit final costate guess")
        lambda_vf = -bc.r0 / n
    lam0, lamf = np.asarray(lambda_v0, float), np.asarray(lambda_vf, float)
    # z = -1 at t0, z = +1 at tf
    xl = np.column_stack([(lam0 + lamf) / 2.0, (lamf - lam0) / 2.0]).ravel()
    return UnknownVector(xi, junctions, xl).pack()


def least_squares_step(J, L):
    """Column-pivoted QR solution of min ||J dx - L||; flags rank deficiency."""
    Q, R, perm = scipy.linalg.qr(J, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    bad = diag < RANK_RTOL * diag[0]
    if np.any(bad):
        raise RankDeficiencyError(
            f"Jacobian rank deficient: {int(bad.sum())} of {J.shape[1]} columns",
            columns=sorted(perm[bad].tolist()),
        )
    y = scipy.linalg.solve_triangular(R, Q.T @ L)
    dx = np.empty_like(y)
    dx[perm] = y
    return dx


def _damped_step(J, L, mu):
    n = J.shape[1]
    A = np.vstack([J, np.sqrt(mu) * np.eye(n)])
    return np.linalg.lstsq(A, np.concatenate([L, np.zeros(n)]), rcond=None)[0]


def solve_inner(problem: CollocatedProblem, xi0, settings: InnerSettings = InnerSettings()) -> InnerResult:
    x = np.array(xi0, dtype=float)
    sysm = problem.system(x)
    history = [float(np.linalg.norm(sysm.L))]
    best_x, best_norm = x.copy(), history[0]
    growth = stall = 0
    mu = None
    for it in range(1, settings.max_iterations + 1):
        if mu is None:
            dx = least_squares_step(sysm.J, sysm.L)
        else:
            dx = _damped_step(sysm.J, sysm.L, mu)
        x = x - dx
        sysm = problem.system(x)
        norm = float(np.linalg.norm(sysm.L))
        history.append(norm)
        log.debug("inner it %d: |L| = %.3e, max|dx| = %.3e", it, norm, np.max(np.abs(dx)))
        if norm < best_norm * (1.0 - settings.stall_tolerance):
            stall = 0
        else:
            stall += 1
        if norm < best_norm:
            best_x, best_norm = x.copy(), norm
        growth = growth + 1 if norm > history[-2] else 0
        if growth >= 3:
            if settings.damping_fallback and mu is None:
                log.info("inner loop diverging; switching to damped steps")
                mu = 1e-3 * float(np.max(np.sum(sysm.J ** 2, axis=0)))
                x = best_x.copy()
                sysm = problem.system(x)
                growth = 0
                continue
            raise DivergenceError(
                f"residual grew for 3 consecutive iterations (|L| = {norm:.3e})",
                times=problem.profile.times,
            )
        step = float(np.max(np.abs(dx) / (1.0 + np.abs(x))))
        if step <= settings.step_tolerance:
            return InnerResult(best_x, it, history, "step")
        if abs(history[-2] - norm) <= settings.residual_tolerance + settings.relative_tolerance * norm:
            return InnerResult(best_x, it, history, "residual")
        if stall >= settings.stall_iterations:
            return InnerResult(best_x, it, history, "stalled")
    return InnerResult(best_x, settings.max_iterations, history, "max_iterations")


def gauss_newton_steps(problem: CollocatedProblem, xi0, steps: int) -> InnerResult:
    """Exactly ``steps`` undamped iterations with no stopping tests.

    The result is a smooth function of the switching times for a fixed
    starting point, which is what finite-difference outer Jacobians need.
    """
    x = np.array(xi0, dtype=float)
    sysm = problem.system(x)
    history = [float(np.linalg.norm(sysm.L))]
    for _ in range(steps):
        x = x - least_squares_step(sysm.J, sysm.L)
        sysm = problem.system(x)
        history.append(float(np.linalg.norm(sysm.L)))
    return InnerResult(x, steps, history, "fixed")
