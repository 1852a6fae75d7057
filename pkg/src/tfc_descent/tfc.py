"""Constrained expressions for two-point (value + slope) boundary data.

Each trajectory segment carries its own expression

    r(t) = (h - W1 h0 - W2 hf - W3 dh0 - W4 dhf)^T xi
           + W1 r_start + W2 r_end + W3 v_start + W4 v_end

where W1..W4 are the cubic Hermite switching functions of the segment, so
the boundary data are met for every coefficient vector ``xi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisEval, CollocationGrid, TimeMap, chebyshev_eval, time_map
from .errors import DegenerateSegmentError

# Hermite-cubic null space: degrees 0..3 are annihilated by the projection.
STATE_DEGREE_OFFSET = 4


@dataclass(frozen=True)
class OmegaSet:
    """Switching functions and their t-derivatives at a set of nodes.

    ``value``, ``d1`` and ``d2`` have shape (n_nodes, 4); column k holds
    Omega_{k+1} (initial value, final value, initial slope, final slope).
    """

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    t_star: np.ndarray
    dt: float


def omega_set(t_nodes, t_start: float, t_end: float) -> OmegaSet:
    dt = float(t_end) - float(t_start)
    if not dt > 0.0:
        raise DegenerateSegmentError(f"degenerate segment [{t_start}, {t_end}]")
    s = np.atleast_1d(np.asarray(t_nodes, dtype=float)) - t_start
    s2, s3 = s * s, s * s * s
    dt2, dt3 = dt * dt, dt * dt * dt

    value = np.column_stack([
        1.0 + 2.0 * s3 / dt3 - 3.0 * s2 / dt2,
        -2.0 * s3 / dt3 + 3.0 * s2 / dt2,
        s + s3 / dt2 - 2.0 * s2 / dt,
        s3 / dt2 - s2 / dt,
    ])
    d1 = np.column_stack([
        6.0 * s2 / dt3 - 6.0 * s / dt2,
        -6.0 * s2 / dt3 + 6.0 * s / dt2,
        1.0 + 3.0 * s2 / dt2 - 4.0 * s / dt,
        3.0 * s2 / dt2 - 2.0 * s / dt,
    ])
    d2 = np.column_stack([
        12.0 * s / dt3 - 6.0 / dt2,
        -12.0 * s / dt3 + 6.0 / dt2,
        6.0 * s / dt2 - 4.0 / dt,
        6.0 * s / dt2 - 2.0 / dt,
    ])
    return OmegaSet(value, d1, d2, s, dt)


@dataclass(frozen=True)
class SegmentExpression:
    """Projected basis rows and boundary weights for one segment.

    P0/P1/P2 multiply the per-axis coefficients to give the free-function
    part of r, v, a. W0/W1/W2 (n x 4) multiply the boundary data stacked as
    (r_start, r_end, v_start, v_end).
    """

    tmap: TimeMap
    t_nodes: np.ndarray
    basis: BasisEval
    omega: OmegaSet
    P0: np.ndarray
    P1: np.ndarray
    P2: np.ndarray

    @property
    def W0(self):
        return self.omega.value

    @property
    def W1(self):
        return self.omega.d1

    @property
    def W2(self):
        return self.omega.d2

    @property
    def n_basis(self) -> int:
        return self.basis.n_basis


def segment_expression(grid: CollocationGrid, t_start: float, t_end: float,
                       n_basis: int, degree_offset: int = STATE_DEGREE_OFFSET) -> SegmentExpression:
    tmap = time_map(t_start, t_end)
    t_nodes = grid.nodes_t(tmap)
    basis = chebyshev_eval(grid, n_basis, degree_offset)
    om = omega_set(t_nodes, t_start, t_end)
    c = tmap.c
    # boundary rows of g and dg/dt: (4, n_basis)
    bnd = np.vstack([basis.h_start, basis.h_end, c * basis.dh_start, c * basis.dh_end])
    P0 = basis.H0 - om.value @ bnd
    P1 = c * basis.H1 - om.d1 @ bnd
    P2 = c * c * basis.H2 - om.d2 @ bnd
    return SegmentExpression(tmap, t_nodes, basis, om, P0, P1, P2)


def eval_segment_states(expr: SegmentExpression, xi, start_state, end_state):
    """Position, velocity and acceleration at the segment nodes.

    ``xi`` is (3, n_basis); ``start_state``/``end_state`` are (r, v) pairs of
    3-vectors. Returns three (n_nodes, 3) arrays.
    """
    xi = np.asarray(xi, dtype=float).reshape(3, expr.n_basis)
    r0, v0 = (np.asarray(x, dtype=float) for x in start_state)
    rf, vf = (np.asarray(x, dtype=float) for x in end_state)
    data = np.vstack([r0, rf, v0, vf])  # (4, 3)
    r = expr.P0 @ xi.T + expr.W0 @ data
    v = expr.P1 @ xi.T + expr.W1 @ data
    a = expr.P2 @ xi.T + expr.W2 @ data
    return r, v, a


@dataclass(frozen=True)
class CostateExpression:
    """Velocity costate affine in global z: lambda_v = a0 + a1 z."""

    a0: np.ndarray
    a1: np.ndarray
    tmap: TimeMap

    @property
    def lambda_r(self) -> np.ndarray:
        return -self.a1 * self.tmap.c

    @classmethod
    def from_coefficients(cls, xi_lambda, tmap: TimeMap) -> "CostateExpression":
        """``xi_lambda`` is laid out per axis as (a0_1, a1_1, a0_2, a1_2, a0_3, a1_3)."""
        xl = np.asarray(xi_lambda, dtype=float).reshape(3, 2)
        return cls(xl[:, 0].copy(), xl[:, 1].copy(), tmap)


def costate_rows(tmap: TimeMap, t_nodes) -> np.ndarray:
    """h_lambda = [1, z(t)] at each node, shape (n, 2)."""
    z = tmap.to_z(t_nodes)
    return np.column_stack([np.ones_like(z), z])


def eval_costate(ce: CostateExpression, t_nodes):
    hl = costate_rows(ce.tmap, t_nodes)
    lam_v = hl[:, :1] * ce.a0 + hl[:, 1:] * ce.a1
    return lam_v, ce.lambda_r
