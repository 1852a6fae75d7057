"""Pure-Python reference kernels (fallback when the extension is not built).

State layout for propagation (14 entries):
    r[0:3], v[3:6], m[6], lambda_r[7:10], lambda_v[10:13], lambda_m[13]
"""

import math

import numpy as np

from .errors import PropagationError, SingularCostateError

LAMBDA_FLOOR = 1e-12

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# fifth-order minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def loss_and_costate_jacobian(acc, lam_v, beta, a_g):
    """Dynamics residual and its lambda_v-derivative at every node.

    Returns ``loss`` (n, 3) and ``dloss`` (n, 3, 3) with
    ``dloss[k, i, j] = beta_k (delta_ij / |lam| - lam_i lam_j / |lam|^3)``.
    """
    lam_v = np.asarray(lam_v, dtype=float)
    norm = np.sqrt(np.einsum("ij,ij->i", lam_v, lam_v))
    if np.any(norm < LAMBDA_FLOOR):
        raise SingularCostateError(f"||lambda_v|| = {norm.min():.3e} below floor")
    beta = np.asarray(beta, dtype=float)
    inv = 1.0 / norm
    unit = lam_v * inv[:, None]
    loss = np.asarray(acc, dtype=float) - np.asarray(a_g, dtype=float) + (beta * inv)[:, None] * lam_v
    dloss = (beta * inv)[:, None, None] * (np.eye(3)[None] - unit[:, :, None] * unit[:, None, :])
    return loss, dloss


def _rhs(y, thrust, alpha, a_g):
    lam_v = y[10:13]
    nl = math.sqrt(lam_v[0] * lam_v[0] + lam_v[1] * lam_v[1] + lam_v[2] * lam_v[2])
    if nl < LAMBDA_FLOOR:
        raise SingularCostateError("||lambda_v|| below floor during propagation")
    m = y[6]
    if m <= 0.0:
        raise PropagationError(f"mass became non-positive ({m})")
    b = thrust / m
    dy = np.empty(14)
    dy[0:3] = y[3:6]
    dy[3:6] = a_g - (b / nl) * lam_v
    dy[6] = -alpha * thrust
    dy[7:10] = 0.0
    dy[10:13] = -y[7:10]
    dy[13] = -b / m * nl
    return dy


def propagate_arc(y0, t_start, t_end, thrust, alpha, a_g, rtol, atol, h0=0.0, max_steps=1_000_000):
    """Adaptive DOPRI5 over one constant-thrust arc, landing exactly on ``t_end``.

    Returns ``(y_end, n_accepted, n_rejected, h_next)``.
    """
    y = np.array(y0, dtype=float)
    a_g = np.asarray(a_g, dtype=float)
    t = float(t_start)
    span = float(t_end) - t
    if span <= 0.0:
        return y, 0, 0, h0
    h = h0 if h0 > 0.0 else min(span, 1e-3 * span + 1e-6)
    k = [None] * 7
    n_acc = n_rej = 0
    k[0] = _rhs(y, thrust, alpha, a_g)
    while t < t_end:
        if n_acc + n_rej >= max_steps:
            raise PropagationError(f"step budget exhausted at t={t}")
        last = t + h >= t_end
        if last:
            h = t_end - t
        for s in range(1, 7):
            ys = y.copy()
            for j, aij in enumerate(_A[s]):
                if aij != 0.0:
                    ys += h * aij * k[j]
            k[s] = _rhs(ys, thrust, alpha, a_g)
        y_new = y.copy()
        err = np.zeros(14)
        for j in range(7):
            if _B[j] != 0.0:
                y_new += h * _B[j] * k[j]
            if _E[j] != 0.0:
                err += h * _E[j] * k[j]
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = math.sqrt(float(np.mean((err / scale) ** 2)))
        if en <= 1.0:
            t = t_end if last else t + h
            y = y_new
            k[0] = k[6]
            n_acc += 1
            fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        else:
            n_rej += 1
            fac = max(0.2, 0.9 * en ** -0.2)
        h *= fac
        if h < 1e-14 * max(1.0, abs(t)):
            raise PropagationError(f"step size underflow at t={t}")
    return y, n_acc, n_rej, h
