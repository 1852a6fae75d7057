"""Backward segment-by-segment solve of the mass costate.

On each segment ``lambda_m = (h - h_f)^T xi + lambda_m(t_end)``, which pins
the end value, and the coefficients follow from the linear collocation
system ``c dh^T xi = -(T / m^2) ||lambda_v||``. Segments are solved from
the last to the first so every end value is the next segment's start value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import chebyshev_eval, time_map
from .errors import RankDeficiencyError

MASS_COSTATE_DEGREE_OFFSET = 1


@dataclass(frozen=True)
class MassCostateSolution:
    xi: tuple           # per-segment coefficient vectors
    values: tuple       # per-segment lambda_m at the segment nodes
    residuals: tuple    # per-segment collocation residuals

    @property
    def initial_value(self) -> float:
        return float(self.values[0][0])

    @property
    def max_residual(self) -> float:
        return max(float(np.max(np.abs(r))) for r in self.residuals)


def solve_lambda_m(grid, boundaries, thrust_levels, masses, lam_v_norms, n_basis: int = 16,
                   final_value: float = 0.0) -> MassCostateSolution:
    """``masses`` and ``lam_v_norms`` are per-segment arrays on ``grid``'s nodes."""
    basis = chebyshev_eval(grid, n_basis, MASS_COSTATE_DEGREE_OFFSET)
    P0 = basis.H0 - basis.h_end[None, :]
    S = len(thrust_levels)
    xis, vals, resid = [None] * S, [None] * S, [None] * S
    end_value = float(final_value)
    for s in reversed(range(S)):
        c = time_map(boundaries[s], boundaries[s + 1]).c
        A = c * basis.H1
        rhs = -thrust_levels[s] / masses[s] ** 2 * lam_v_norms[s]
        xi, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
        if rank < n_basis:
            raise RankDeficiencyError(f"mass-costate system rank {rank} < {n_basis} on segment {s}")
        xis[s] = xi
        vals[s] = P0 @ xi + end_value
        resid[s] = A @ xi - rhs
        end_value = float(vals[s][0])
    return MassCostateSolution(tuple(xis), tuple(vals), tuple(resid))
