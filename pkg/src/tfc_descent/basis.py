"""Chebyshev basis, collocation nodes, and the affine time <-> z map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateSegmentError

Z_START = -1.0
Z_END = 1.0


@dataclass(frozen=True)
class TimeMap:
    t_start: float
    t_end: float
    z_start: float = Z_START
    z_end: float = Z_END

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise DegenerateSegmentError(
                f"segment end {self.t_end!r} must exceed start {self.t_start!r}"
            )

    @property
    def c(self) -> float:
        """dz/dt of the map."""
        return (self.z_end - self.z_start) / (self.t_end - self.t_start)

    def to_z(self, t):
        return self.z_start + self.c * (np.asarray(t, dtype=float) - self.t_start)

    def to_t(self, z):
        z = np.asarray(z, dtype=float)
        t = self.t_start + (z - self.z_start) / self.c
        # pin the endpoints so boundary nodes land exactly on the segment ends
        t = np.where(z == self.z_start, self.t_start, t)
        return np.where(z == self.z_end, self.t_end, t)


def time_map(t_start: float, t_end: float) -> TimeMap:
    return TimeMap(float(t_start), float(t_end))


@dataclass(frozen=True)
class CollocationGrid:
    n_points: int
    nodes_z: np.ndarray

    def nodes_t(self, tmap: TimeMap) -> np.ndarray:
        return tmap.to_t(self.nodes_z)

    @property
    def size(self) -> int:
        return self.nodes_z.size


def collocation_grid(n_points: int) -> CollocationGrid:
    """Chebyshev-Gauss-Lobatto nodes ``z_k = -cos(k*pi/N)`` for k = 0..N."""
    if int(n_points) != n_points or n_points < 2:
        raise ConfigurationError(f"need at least 2 collocation intervals, got {n_points!r}")
    n_points = int(n_points)
    k = np.arange(n_points + 1)
    z = -np.cos(k * np.pi / n_points)
    # antisymmetrize: exact endpoints, exact zero, node[k] == -node[N-k]
    z = 0.5 * (z - z[::-1])
    z.setflags(write=False)
    return CollocationGrid(n_points, z)


@dataclass(frozen=True)
class BasisEval:
    n_basis: int
    degree_offset: int
    H0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    h_start: np.ndarray
    h_end: np.ndarray
    dh_start: np.ndarray
    dh_end: np.ndarray


def chebyshev_table(z, degree: int):
    """Values and first two z-derivatives of T_0..T_degree at points ``z``.

    Returns three arrays of shape (len(z), degree + 1), built with the
    three-term recurrence and its differentiated forms.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = z.size
    T = np.zeros((n, degree + 1))
    dT = np.zeros_like(T)
    d2T = np.zeros_like(T)
    T[:, 0] = 1.0
    if degree >= 1:
        T[:, 1] = z
        dT[:, 1] = 1.0
    for k in range(1, degree):
        T[:, k + 1] = 2.0 * z * T[:, k] - T[:, k - 1]
        dT[:, k + 1] = 2.0 * T[:, k] + 2.0 * z * dT[:, k] - dT[:, k - 1]
        d2T[:, k + 1] = 4.0 * dT[:, k] + 2.0 * z * d2T[:, k] - d2T[:, k - 1]
    return T, dT, d2T


def chebyshev_eval(grid: CollocationGrid | np.ndarray, n_basis: int, degree_offset: int = 0) -> BasisEval:
    if n_basis < 1:
        raise ConfigurationError("n_basis must be at least 1")
    if degree_offset < 0:
        raise ConfigurationError("degree_offset must be non-negative")
    z = grid.nodes_z if isinstance(grid, CollocationGrid) else np.asarray(grid, dtype=float)
    top = degree_offset + n_basis - 1
    cols = slice(degree_offset, top + 1)
    T, dT, d2T = chebyshev_table(z, top)
    Tb, dTb, _ = chebyshev_table([Z_START, Z_END], top)
    return BasisEval(
        n_basis=n_basis,
        degree_offset=degree_offset,
        H0=T[:, cols],
        H1=dT[:, cols],
        H2=d2T[:, cols],
        h_start=Tb[0, cols],
        h_end=Tb[1, cols],
        dh_start=dTb[0, cols],
        dh_end=dTb[1, cols],
    )
