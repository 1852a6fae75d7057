# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring ``_kernels_py``: same signatures, same results."""

import numpy as np
cimport cython
from libc.math cimport sqrt, fabs, pow

from .errors import PropagationError, SingularCostateError

cdef double LAMBDA_FLOOR = 1e-12

cdef double C_A[7][6]
cdef double C_B[7]
cdef double C_E[7]

C_A[1][:1] = [1.0 / 5]
C_A[2][:2] = [3.0 / 40, 9.0 / 40]
C_A[3][:3] = [44.0 / 45, -56.0 / 15, 32.0 / 9]
C_A[4][:4] = [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729]
C_A[5][:5] = [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656]
C_A[6][:6] = [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84]
C_B[:] = [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0]
C_E[:] = [71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525, -1.0 / 40]


def loss_and_costate_jacobian(acc, lam_v, beta, a_g):
    cdef const double[:, ::1] A = np.ascontiguousarray(acc, dtype=np.float64)
    cdef const double[:, ::1] L = np.ascontiguousarray(lam_v, dtype=np.float64)
    cdef const double[::1] B = np.ascontiguousarray(beta, dtype=np.float64)
    cdef const double[::1] G = np.ascontiguousarray(a_g, dtype=np.float64)
    cdef Py_ssize_t n = L.shape[0], k, i, j
    loss_arr = np.empty((n, 3))
    dloss_arr = np.empty((n, 3, 3))
    cdef double[:, ::1] out = loss_arr
    cdef double[:, :, ::1] dout = dloss_arr
    cdef double nl, inv, bi, u[3]
    for k in range(n):
        nl = sqrt(L[k, 0] * L[k, 0] + L[k, 1] * L[k, 1] + L[k, 2] * L[k, 2])
        if nl < LAMBDA_FLOOR:
            raise SingularCostateError(f"||lambda_v|| = {nl:.3e} below floor")
        inv = 1.0 / nl
        bi = B[k] * inv
        for i in range(3):
            u[i] = L[k, i] * inv
            out[k, i] = A[k, i] - G[i] + bi * L[k, i]
        for i in range(3):
            for j in range(3):
                dout[k, i, j] = bi * ((1.0 if i == j else 0.0) - u[i] * u[j])
    return loss_arr, dloss_arr


cdef int _rhs(double* y, double thrust, double alpha, double* g, double* dy) noexcept nogil:
    cdef double nl = sqrt(y[10] * y[10] + y[11] * y[11] + y[12] * y[12])
    cdef double m = y[6], b
    cdef int i
    if nl < LAMBDA_FLOOR:
        return 1
    if m <= 0.0:
        return 2
    b = thrust / m
    for i in range(3):
        dy[i] = y[3 + i]
        dy[3 + i] = g[i] - (b / nl) * y[10 + i]
        dy[7 + i] = 0.0
        dy[10 + i] = -y[7 + i]
    dy[6] = -alpha * thrust
    dy[13] = -b / m * nl
    return 0


def propagate_arc(y0, double t_start, double t_end, double thrust, double alpha, a_g,
                  double rtol, double atol, double h0=0.0, long max_steps=1000000):
    cdef const double[::1] yin = np.ascontiguousarray(y0, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(a_g, dtype=np.float64)
    cdef double y[14]
    cdef double ys[14]
    cdef double ynew[14]
    cdef double k[7][14]
    cdef double g[3]
    cdef double t = t_start, span = t_end - t_start, h, en, sc, e, acc, fac
    cdef long n_acc = 0, n_rej = 0
    cdef int i, s, j, status = 0, last
    for i in range(14):
        y[i] = yin[i]
    for i in range(3):
        g[i] = gv[i]
    if span <= 0.0:
        return np.array(<double[:14]> y), 0, 0, h0
    h = h0 if h0 > 0.0 else min(span, 1e-3 * span + 1e-6)
    with nogil:
        status = _rhs(y, thrust, alpha, g, k[0])
        while status == 0 and t < t_end:
            if n_acc + n_rej >= max_steps:
                status = 3
                break
            last = t + h >= t_end
            if last:
                h = t_end - t
            for s in range(1, 7):
                for i in range(14):
                    acc = y[i]
                    for j in range(s):
                        acc = acc + h * C_A[s][j] * k[j][i]
                    ys[i] = acc
                status = _rhs(ys, thrust, alpha, g, k[s])
                if status != 0:
                    break
            if status != 0:
                break
            en = 0.0
            for i in range(14):
                acc = y[i]
                e = 0.0
                for j in range(7):
                    acc = acc + h * C_B[j] * k[j][i]
                    e = e + h * C_E[j] * k[j][i]
                ynew[i] = acc
                sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(acc) else fabs(acc))
                en = en + (e / sc) * (e / sc)
            en = sqrt(en / 14.0)
            if en <= 1.0:
                t = t_end if last else t + h
                for i in range(14):
                    y[i] = ynew[i]
                    k[0][i] = k[6][i]
                n_acc += 1
                if en == 0.0:
                    fac = 5.0
                else:
                    fac = 0.9 * pow(en, -0.2)
                    fac = 5.0 if fac > 5.0 else (0.2 if fac < 0.2 else fac)
            else:
                n_rej += 1
                fac = 0.9 * pow(en, -0.2)
                fac = 0.2 if fac < 0.2 else fac
            h = h * fac
            if h < 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                status = 4
                break
    if status == 1:
        raise SingularCostateError("||lambda_v|| below floor during propagation")
    if status == 2:
        raise PropagationError("mass became non-positive")
    if status == 3:
        raise PropagationError(f"step budget exhausted at t={t}")
    if status == 4:
        raise PropagationError(f"step size underflow at t={t}")
    out = np.empty(14)
    for i in range(14):
        out[i] = y[i]
    return out, n_acc, n_rej, h
