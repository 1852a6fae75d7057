"""Lander physics: constants, bang-bang thrust program, mass, losses."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InfeasibleProfileError, SingularCostateError

LAMBDA_FLOOR = 1e-12
TIME_MARGIN = 1e-6


@dataclass(frozen=True)
class LanderConfig:
    a_g: np.ndarray
    isp: float
    g0: float
    t_bar: float
    n_engines: int
    cant: float  # rad

    @property
    def t_min(self) -> float:
        return 0.3 * self.t_bar * self.n_engines * math.cos(self.cant)

    @property
    def t_max(self) -> float:
        return 0.8 * self.t_bar * self.n_engines * math.cos(self.cant)

    @property
    def alpha(self) -> float:
        return 1.0 / (self.isp * self.g0 * math.cos(self.cant))

    @property
    def v_ex(self) -> float:
        return 1.0 / self.alpha


def derive_params(a_g, isp, g0, t_bar, n_engines, cant) -> LanderConfig:
    """Validate raw lander fields and build a :class:`LanderConfig`.

    ``cant`` is in radians.
    """
    for name, val in (("isp", isp), ("g0", g0), ("t_bar", t_bar), ("n_engines", n_engines)):
        if not (np.isfinite(val) and val > 0):
            raise ConfigurationError(f"{name} must be positive, got {val!r}")
    if not 0.0 <= cant < math.pi / 2:
        raise ConfigurationError(f"cant angle must lie in [0, pi/2), got {cant!r}")
    a_g = np.asarray(a_g, dtype=float)
    if a_g.shape != (3,) or not np.all(np.isfinite(a_g)):
        raise ConfigurationError("a_g must be a finite 3-vector")
    a_g.setflags(write=False)
    return LanderConfig(a_g, float(isp), float(g0), float(t_bar), int(n_engines), float(cant))


def reference_lander() -> LanderConfig:
    """Mars lander constants used by both reference scenarios."""
    return derive_params([0.0, 0.0, -3.7114], 225.0, 9.807, 3100.0, 6, math.radians(27.0))


@dataclass(frozen=True)
class BoundaryConditions:
    r0: np.ndarray
    v0: np.ndarray
    rf: np.ndarray
    vf: np.ndarray
    m0: float

    def __post_init__(self):
        for name in ("r0", "v0", "rf", "vf"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{name} must be a finite 3-vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.m0 > 0:
            raise ConfigurationError(f"m0 must be positive, got {self.m0!r}")


class ProfileKind(enum.Enum):
    MIN_MAX = "min-max"
    MAX_MIN_MAX = "max-min-max"

    @property
    def n_segments(self) -> int:
        return 2 if self is ProfileKind.MIN_MAX else 3


@dataclass(frozen=True)
class SegmentTimes:
    t0: float
    t1: float
    tf: float
    t2: float | None = None

    def __post_init__(self):
        b = self.boundaries
        if any(not np.isfinite(x) for x in b):
            raise ConfigurationError(f"non-finite segment times {b}")
        if any(b1 - b0 < TIME_MARGIN for b0, b1 in zip(b[:-1], b[1:])):
            raise ConfigurationError(f"segment times not strictly ordered: {b}")

    @property
    def boundaries(self) -> tuple:
        if self.t2 is None:
            return (self.t0, self.t1, self.tf)
        return (self.t0, self.t1, self.t2, self.tf)

    @property
    def switches(self) -> tuple:
        return self.boundaries[1:-1]

    @classmethod
    def from_boundaries(cls, b) -> "SegmentTimes":
        b = [float(x) for x in b]
        if len(b) == 3:
            return cls(b[0], b[1], b[2])
        if len(b) == 4:
            return cls(b[0], b[1], b[3], b[2])
        raise ConfigurationError(f"expected 3 or 4 boundary times, got {len(b)}")


@dataclass(frozen=True)
class ThrustProfile:
    kind: ProfileKind
    times: SegmentTimes
    t_min: float
    t_max: float
    levels: tuple = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.t_min < self.t_max:
            raise ConfigurationError("need 0 < T_min < T_max")
        if self.kind is ProfileKind.MIN_MAX:
            if self.times.t2 is not None:
                raise ConfigurationError("min-max profile takes no second switch time")
            levels = (self.t_min, self.t_max)
        else:
            if self.times.t2 is None:
                raise ConfigurationError("max-min-max profile needs t2")
            levels = (self.t_max, self.t_min, self.t_max)
        object.__setattr__(self, "levels", levels)

    @property
    def n_segments(self) -> int:
        return len(self.levels)

    def segment_index(self, t):
        """Segment of each time; right-continuous at the switches."""
        b = self.times.boundaries
        t = np.asarray(t, dtype=float)
        if np.any(t < b[0]) or np.any(t > b[-1]):
            raise ConfigurationError(f"time outside [{b[0]}, {b[-1]}]")
        idx = np.searchsorted(np.asarray(b[1:-1]), t, side="right")
        return idx


def make_profile(kind: ProfileKind, times: SegmentTimes, lander: LanderConfig) -> ThrustProfile:
    return ThrustProfile(kind, times, lander.t_min, lander.t_max)


def thrust_at(profile: ThrustProfile, t):
    idx = profile.segment_index(t)
    out = np.asarray(profile.levels)[idx]
    return float(out) if np.ndim(out) == 0 else out


def segment_start_masses(profile: ThrustProfile, m0: float, alpha: float, dry_mass: float = 0.0):
    b = profile.times.boundaries
    masses = [float(m0)]
    for k, level in enumerate(profile.levels):
        masses.append(masses[-1] - alpha * level * (b[k + 1] - b[k]))
    if masses[-1] <= dry_mass:
        raise InfeasibleProfileError(
            f"mass reaches {masses[-1]:.6g} kg (floor {dry_mass} kg) before t_f"
        )
    return masses


def mass_at(profile: ThrustProfile, m0: float, alpha: float, t, dry_mass: float = 0.0):
    """Analytic mass for the piecewise-constant thrust program."""
    starts = segment_start_masses(profile, m0, alpha, dry_mass)
    b = np.asarray(profile.times.boundaries)
    idx = profile.segment_index(t)
    levels = np.asarray(profile.levels)
    m = np.asarray(starts)[idx] - alpha * levels[idx] * (np.asarray(t, dtype=float) - b[idx])
    return float(m) if np.ndim(m) == 0 else m


def beta_at(profile: ThrustProfile, m0: float, alpha: float, t, dry_mass: float = 0.0):
    return thrust_at(profile, t) / mass_at(profile, m0, alpha, t, dry_mass)


def mass_used(profile: ThrustProfile, alpha: float) -> float:
    b = profile.times.boundaries
    return alpha * sum(level * (b[k + 1] - b[k]) for k, level in enumerate(profile.levels))


def _costate_norm(lam_v):
    lam_v = np.asarray(lam_v, dtype=float)
    norm = np.linalg.norm(lam_v, axis=-1)
    if np.any(norm < LAMBDA_FLOOR):
        raise SingularCostateError(
            f"||lambda_v|| = {np.min(norm):.3e} below floor {LAMBDA_FLOOR:g}"
        )
    return norm


def dynamics_loss(a, lam_v, beta, a_g):
    """Residual a - a_g + beta * lambda_v / ||lambda_v|| per node and axis."""
    lam_v = np.asarray(lam_v, dtype=float)
    norm = _costate_norm(lam_v)
    beta = np.asarray(beta, dtype=float)
    return np.asarray(a, dtype=float) - a_g + (beta / norm)[..., None] * lam_v


def hamiltonian_loss(lam_v_f, beta_f: float, thrust_f: float, lander: LanderConfig) -> float:
    """Transversality residual H(t_f) with lambda_m(t_f) = 0."""
    lam_v_f = np.asarray(lam_v_f, dtype=float)
    norm = float(_costate_norm(lam_v_f))
    return lander.alpha * thrust_f + float(lam_v_f @ lander.a_g) - beta_f * norm


def hamiltonian_history(thrust, mass, v, lam_v, lam_r, lam_m, lander: LanderConfig):
    lam_v = np.asarray(lam_v, dtype=float)
    norm = np.linalg.norm(lam_v, axis=-1)
    thrust = np.asarray(thrust, dtype=float)
    return (lander.alpha * thrust
            + np.sum(np.asarray(v, dtype=float) * np.asarray(lam_r, dtype=float), axis=-1)
            + lam_v @ lander.a_g
            - thrust / np.asarray(mass, dtype=float) * norm
            - np.asarray(lam_m, dtype=float) * lander.alpha * thrust)


def switching_function(lam_v, lam_m, mass, alpha: float):
    norm = np.linalg.norm(np.asarray(lam_v, dtype=float), axis=-1)
    return alpha - norm / np.asarray(mass, dtype=float) - alpha * np.asarray(lam_m, dtype=float)
