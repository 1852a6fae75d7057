"""Augmented residual vector and analytic Jacobian of the collocated TPBVP.

Unknown layout (S segments): for each segment its coefficients (axis-major,
n_basis each), followed by the junction state (r, v) shared with the next
segment; the six costate coefficients (a0_i, a1_i per axis) come last.
Residual rows are segment-major, axis-major, node-major, with the
transversality residual as the final row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .basis import collocation_grid, time_map
from .model import (
    BoundaryConditions, LanderConfig, ThrustProfile, _costate_norm, hamiltonian_loss,
    segment_start_masses,
)
from .tfc import costate_rows, segment_expression


@dataclass(frozen=True)
class Layout:
    n_segments: int
    n_basis: int

    @property
    def seg_block(self) -> int:
        return 3 * self.n_basis

    def xi_slice(self, s: int) -> slice:
        start = s * (self.seg_block + 6)
        return slice(start, start + self.seg_block)

    def junction_slice(self, j: int) -> slice:
        """Junction j sits between segment j and j + 1."""
        start = j * (self.seg_block + 6) + self.seg_block
        return slice(start, start + 6)

    @property
    def costate_slice(self) -> slice:
        start = self.n_segments * self.seg_block + 6 * (self.n_segments - 1)
        return slice(start, start + 6)

    @property
    def size(self) -> int:
        return self.n_segments * self.seg_block + 6 * (self.n_segments - 1) + 6


@dataclass(frozen=True)
class UnknownVector:
    xi: np.ndarray          # (S, 3, n_basis)
    junctions: np.ndarray   # (S - 1, 2, 3): rows r, v
    xi_lambda: np.ndarray   # (6,)

    def pack(self) -> np.ndarray:
        layout = Layout(self.xi.shape[0], self.xi.shape[2])
        out = np.empty(layout.size)
        for s in range(layout.n_segments):
            out[layout.xi_slice(s)] = self.xi[s].ravel()
        for j in range(layout.n_segments - 1):
            out[layout.junction_slice(j)] = self.junctions[j].ravel()
        out[layout.costate_slice] = self.xi_lambda
        return out

    @classmethod
    def unpack(cls, vec, layout: Layout) -> "UnknownVector":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (layout.size,):
            raise ValueError(f"unknown vector has shape {vec.shape}, expected ({layout.size},)")
        S, nb = layout.n_segments, layout.n_basis
        xi = np.stack([vec[layout.xi_slice(s)].reshape(3, nb) for s in range(S)])
        junc = np.stack([vec[layout.junction_slice(j)].reshape(2, 3) for j in range(S - 1)]) \
            if S > 1 else np.zeros((0, 2, 3))
        return cls(xi, junc, vec[layout.costate_slice].copy())


@dataclass
class ResidualSystem:
    L: np.ndarray
    J: np.ndarray
    blocks: dict = field(default_factory=dict)


def partial_xi(expr) -> np.ndarray:
    """Block-diagonal (3n x 3 n_basis) derivative of a segment's residuals."""
    return np.kron(np.eye(3), expr.P2)


def partial_junction(expr, side: str) -> np.ndarray:
    """(3n x 6) derivative w.r.t. the (r, v) junction at the segment ``start`` or ``end``."""
    col_r, col_v = (0, 2) if side == "start" else (1, 3)
    eye = np.eye(3)
    return np.hstack([np.kron(eye, expr.W2[:, [col_r]]), np.kron(eye, expr.W2[:, [col_v]])])


def partial_costate(dloss, h_lambda) -> np.ndarray:
    """(3n x 6) block from per-node ``dloss[k, i, j]`` and rows ``h_lambda`` (n x 2)."""
    n = h_lambda.shape[0]
    block = dloss[:, :, :, None] * h_lambda[:, None, None, :]   # (n, i, j, p)
    return block.transpose(1, 0, 2, 3).reshape(3 * n, 6)


def partial_hamiltonian(lam_v_f, beta_f: float, h_lambda_f, a_g) -> np.ndarray:
    lam_v_f = np.asarray(lam_v_f, dtype=float)
    norm = float(_costate_norm(lam_v_f))
    coef = np.asarray(a_g, dtype=float) - beta_f * lam_v_f / norm
    return (coef[:, None] * np.asarray(h_lambda_f, dtype=float)[None, :]).ravel()


class CollocatedProblem:
    """Discretized TPBVP for one thrust profile at fixed switching times."""

    def __init__(self, profile: ThrustProfile, bc: BoundaryConditions, lander: LanderConfig,
                 n_basis: int = 16, n_nodes: int = 60, backend=None):
        self.profile, self.bc, self.lander = profile, bc, lander
        self.kernels = _backend.get_backend(backend)
        self.n_basis, self.n_nodes = n_basis, n_nodes
        self.grid = collocation_grid(n_nodes)
        b = profile.times.boundaries
        self.S = profile.n_segments
        self.layout = Layout(self.S, n_basis)
        self.global_map = time_map(b[0], b[-1])
        self.segments = [segment_expression(self.grid, b[s], b[s + 1], n_basis) for s in range(self.S)]
        self.hl = [costate_rows(self.global_map, e.t_nodes) for e in self.segments]
        starts = segment_start_masses(profile, bc.m0, lander.alpha)
        self.mass = [starts[s] - lander.alpha * profile.levels[s] * (e.t_nodes - b[s])
                     for s, e in enumerate(self.segments)]
        self.beta = [profile.levels[s] / self.mass[s] for s in range(self.S)]
        self.thrust_f = profile.levels[-1]
        self.beta_f = self.thrust_f / starts[-1]
        self.n_seg_rows = 3 * self.grid.size

    @property
    def n_rows(self) -> int:
        return self.S * self.n_seg_rows + 1

    def boundary_states(self, u: UnknownVector, s: int):
        start = (self.bc.r0, self.bc.v0) if s == 0 else tuple(u.junctions[s - 1])
        end = (self.bc.rf, self.bc.vf) if s == self.S - 1 else tuple(u.junctions[s])
        return start, end

    def segment_states(self, u: UnknownVector, s: int):
        e = self.segments[s]
        start, end = self.boundary_states(u, s)
        data = np.vstack([start[0], end[0], start[1], end[1]])
        xi_t = u.xi[s].T
        return (e.P0 @ xi_t + e.W0 @ data, e.P1 @ xi_t + e.W1 @ data, e.P2 @ xi_t + e.W2 @ data)

    def costate(self, u: UnknownVector, s: int):
        xl = u.xi_lambda.reshape(3, 2)
        return self.hl[s] @ xl.T

    def lambda_v_final(self, u: UnknownVector):
        xl = u.xi_lambda.reshape(3, 2)
        return xl[:, 0] + xl[:, 1]

    def residual(self, vec) -> np.ndarray:
        return self._evaluate(vec, jacobian=False).L

    def system(self, vec) -> ResidualSystem:
        return self._evaluate(vec, jacobian=True)

    def _evaluate(self, vec, jacobian: bool) -> ResidualSystem:
        u = UnknownVector.unpack(vec, self.layout)
        lay, nr = self.layout, self.n_seg_rows
        L = np.empty(self.n_rows)
        J = np.zeros((self.n_rows, lay.size)) if jacobian else None
        blocks = {}
        a_g = self.lander.a_g
        for s, e in enumerate(self.segments):
            rows = slice(s * nr, (s + 1) * nr)
            _, _, acc = self.segment_states(u, s)
            lam_v = self.costate(u, s)
            loss, dloss = self.kernels.loss_and_costate_jacobian(acc, lam_v, self.beta[s], a_g)
            L[rows] = loss.T.ravel()
            if not jacobian:
                continue
            J[rows, lay.xi_slice(s)] = partial_xi(e)
            blocks[f"J_xi[{s}]"] = (rows, lay.xi_slice(s))
            if s > 0:
                cols = lay.junction_slice(s - 1)
                J[rows, cols] = partial_junction(e, "start")
                blocks[f"J_junction[{s},{s - 1}]"] = (rows, cols)
            if s < self.S - 1:
                cols = lay.junction_slice(s)
                J[rows, cols] = partial_junction(e, "end")
                blocks[f"J_junction[{s},{s}]"] = (rows, cols)
            J[rows, lay.costate_slice] = partial_costate(dloss, self.hl[s])
            blocks[f"J_lambda[{s}]"] = (rows, lay.costate_slice)
        lam_f = self.lambda_v_final(u)
        L[-1] = hamiltonian_loss(lam_f, self.beta_f, self.thrust_f, self.lander)
        if jacobian:
            J[-1, lay.costate_slice] = partial_hamiltonian(lam_f, self.beta_f, [1.0, 1.0], a_g)
            blocks["J_H"] = (slice(self.n_rows - 1, self.n_rows), lay.costate_slice)
        return ResidualSystem(L, J, blocks)


def assemble(problem: CollocatedProblem, vec) -> ResidualSystem:
    return problem.system(vec)
