"""Run configuration files.

Plain ``key = value`` text in sections, vectors as comma-separated numbers::

    [lander]
    a_g = 0, 0, -3.7114
    isp = 225
    ...

    [boundary]
    r0 = -900, 100, 1500
    ...

    [solver]
    profile = auto

    [solver.inner]
    max_iterations = 20

Angles are in degrees in the file and radians in memory; everything else is SI.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError
from .inner import COSTATE_GUESSES, InnerSettings
from .model import BoundaryConditions, LanderConfig, SegmentTimes, derive_params
from .outer import OuterSettings, ProfileMode

BUNDLED = ("test1_minmax", "test2_maxminmax")

_LANDER_KEYS = {"a_g", "isp", "g0", "t_bar", "n_engines", "cant_deg"}
_BOUNDARY_KEYS = {"r0", "v0", "rf", "vf", "m0"}
_SOLVER_KEYS = {"profile", "n_basis", "n_nodes", "time_tolerance", "residual_tolerance",
                "collapse_tolerance", "fd_step", "max_iterations", "costate_guess", "t1", "t2", "tf"}
_INNER_KEYS = {f.name for f in fields(InnerSettings)}


@dataclass(frozen=True)
class RunConfig:
    name: str
    lander: LanderConfig
    bc: BoundaryConditions
    settings: OuterSettings


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ConfigurationError(f"no bundled config {name!r}; have {', '.join(BUNDLED)}")
    return Path(str(resources.files("tfc_descent") / "data" / f"{name}.cfg"))


def _vector(section, key):
    raw = section.get(key)
    try:
        vals = [float(p) for p in raw.split(",")]
    except ValueError:
        raise ConfigurationError(f"[{section.name}] {key}: expected numbers, got {raw!r}") from None
    if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
        raise ConfigurationError(f"[{section.name}] {key}: expected 3 finite components, got {raw!r}")
    return vals


def _number(section, key, kind=float):
    raw = section.get(key)
    try:
        val = kind(raw)
    except ValueError:
        raise ConfigurationError(f"[{section.name}] {key}: expected {kind.__name__}, got {raw!r}") from None
    if kind is float and not math.isfinite(val):
        raise ConfigurationError(f"[{section.name}] {key}: not finite")
    return val


def _require(parser, name, required, allowed):
    if not parser.has_section(name):
        if required:
            raise ConfigurationError(f"missing section [{name}]")
        return None
    sec = parser[name]
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigurationError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    missing = [k for k in sorted(required) if k not in sec]
    if missing:
        raise ConfigurationError(f"[{name}] missing keys: {', '.join(missing)}")
    return sec


def parse_config(text: str, name: str = "run") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable config: {exc}") from None
    extra = set(parser.sections()) - {"lander", "boundary", "solver", "solver.inner"}
    if extra:
        raise ConfigurationError(f"unknown sections: {', '.join(sorted(extra))}")

    lan = _require(parser, "lander", _LANDER_KEYS, _LANDER_KEYS)
    lander = derive_params(_vector(lan, "a_g"), _number(lan, "isp"), _number(lan, "g0"),
                           _number(lan, "t_bar"), _number(lan, "n_engines", int),
                           math.radians(_number(lan, "cant_deg")))

    bnd = _require(parser, "boundary", {"r0", "v0", "m0"}, _BOUNDARY_KEYS)
    bc = BoundaryConditions(
        _vector(bnd, "r0"), _vector(bnd, "v0"),
        _vector(bnd, "rf") if "rf" in bnd else [0.0, 0.0, 0.0],
        _vector(bnd, "vf") if "vf" in bnd else [0.0, 0.0, 0.0],
        _number(bnd, "m0"))

    kw = {}
    sol = _require(parser, "solver", set(), _SOLVER_KEYS)
    if sol is not None:
        if "profile" in sol:
            try:
                kw["profile_mode"] = ProfileMode(sol["profile"].strip())
            except ValueError:
                raise ConfigurationError(f"[solver] profile: unknown mode {sol['profile']!r}") from None
        for key in ("n_basis", "n_nodes", "max_iterations"):
            if key in sol:
                kw[key] = _number(sol, key, int)
        for key in ("time_tolerance", "residual_tolerance", "collapse_tolerance", "fd_step"):
            if key in sol:
                kw[key] = _number(sol, key)
        if "costate_guess" in sol:
            guess = sol["costate_guess"].strip()
            if guess not in COSTATE_GUESSES:
                raise ConfigurationError(f"[solver] costate_guess must be one of {COSTATE_GUESSES}")
            kw["costate_guess"] = guess
        times = {k: _number(sol, k) for k in ("t1", "t2", "tf") if k in sol}
        if times:
            kw["initial_times"] = initial_times(**times)
    inn = _require(parser, "solver.inner", set(), _INNER_KEYS)
    if inn is not None:
        ikw = {}
        for f in fields(InnerSettings):
            if f.name in inn:
                kind = {"int": int, "bool": None}.get(f.type, float)
                ikw[f.name] = inn.getboolean(f.name) if kind is None else _number(inn, f.name, kind)
        kw["inner"] = InnerSettings(**ikw)
    return RunConfig(name, lander, bc, OuterSettings(**kw))


def initial_times(t1=None, tf=None, t2=None) -> SegmentTimes:
    if t1 is None or tf is None:
        raise ConfigurationError("initial times need at least t1 and tf")
    return SegmentTimes(0.0, t1, tf, t2)


def load_config(path) -> RunConfig:
    """Read a config file; a bare bundled name such as ``test1_minmax`` also works."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, name=p.stem)


def with_overrides(cfg: RunConfig, *, profile=None, n_basis=None, n_nodes=None,
                   t1=None, t2=None, tf=None) -> RunConfig:
    kw = {}
    if profile is not None:
        kw["profile_mode"] = ProfileMode(profile)
    if n_basis is not None:
        kw["n_basis"] = n_basis
    if n_nodes is not None:
        kw["n_nodes"] = n_nodes
    if any(v is not None for v in (t1, t2, tf)):
        kw["initial_times"] = initial_times(t1=t1, tf=tf, t2=t2)
    if not kw:
        return cfg
    return replace(cfg, settings=replace(cfg.settings, **kw))
