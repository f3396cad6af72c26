# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rollout kernel; one sequential C loop per trajectory.

Semantics mirror _ref exactly: target test before the state-set exit test,
inputs clamped to [-1, 1], NaN states neither reach nor leave (they run to
timeout). Summation order differs from the vectorized path, so matching
trajectories agree to rounding, not bit for bit.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"

REACHED, LEFT_X, TIMEOUT = 0, 1, 2


def rollout_batch(x0s, long long T, parent, var, f_coefs, g_coefs, u_coefs,
                  x_ineq, z_ineq, bint record=False):
    """Same contract as the numpy reference kernel."""
    cdef double[:, ::1] x0 = np.ascontiguousarray(x0s, dtype=np.float64)
    cdef cnp.int64_t[::1] par = np.ascontiguousarray(parent, dtype=np.int64)
    cdef cnp.int64_t[::1] vix = np.ascontiguousarray(var, dtype=np.int64)
    cdef double[:, ::1] f_co = np.ascontiguousarray(f_coefs, dtype=np.float64)
    cdef double[:, ::1] g_co = np.ascontiguousarray(g_coefs, dtype=np.float64)
    cdef double[:, ::1] u_co = np.ascontiguousarray(u_coefs, dtype=np.float64)
    cdef double[:, ::1] x_in = np.ascontiguousarray(x_ineq, dtype=np.float64)
    cdef double[:, ::1] z_in = np.ascontiguousarray(z_ineq, dtype=np.float64)

    cdef Py_ssize_t B = x0.shape[0]
    cdef Py_ssize_t n = x0.shape[1]
    cdef Py_ssize_t M = par.shape[0]
    cdef Py_ssize_t m = u_co.shape[1]
    cdef Py_ssize_t kx = x_in.shape[1]
    cdef Py_ssize_t kz = z_in.shape[1]

    out_np = np.empty(B, dtype=np.int64)
    stp_np = np.empty(B, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_np
    cdef cnp.int64_t[::1] stp = stp_np

    mono_np = np.empty(M, dtype=np.float64)
    xcur_np = np.empty(n, dtype=np.float64)
    xnew_np = np.empty(n, dtype=np.float64)
    uval_np = np.empty(m, dtype=np.float64)
    cdef double[::1] mono = mono_np
    cdef double[::1] xcur = xcur_np
    cdef double[::1] xnew = xnew_np
    cdef double[::1] uval = uval_np

    cdef double[:, ::1] sbuf = None
    cdef double[:, ::1] ubuf = None
    states = [] if record else None
    inputs = [] if record else None

    cdef Py_ssize_t b, i, j, k, c
    cdef long long t, used
    cdef long long outcome
    cdef double acc, acc2
    cdef bint hit, inside

    for b in range(B):
        for i in range(n):
            xcur[i] = x0[b, i]
        if record:
            sbuf_np = np.empty((T + 1, n), dtype=np.float64)
            ubuf_np = np.empty((T + 1, m), dtype=np.float64)
            sbuf = sbuf_np
            ubuf = ubuf_np
        outcome = TIMEOUT
        used = T
        for t in range(T + 1):
            mono[0] = 1.0
            for k in range(1, M):
                mono[k] = mono[par[k]] * xcur[vix[k]]
            for j in range(m):
                acc = 0.0
                for k in range(M):
                    acc += mono[k] * u_co[k, j]
                if acc > 1.0:
                    acc = 1.0
                elif acc < -1.0:
                    acc = -1.0
                uval[j] = acc
            if record:
                for i in range(n):
                    sbuf[t, i] = xcur[i]
                for j in range(m):
                    ubuf[t, j] = uval[j]
            hit = True
            for c in range(kz):
                acc = 0.0
                for k in range(M):
                    acc += mono[k] * z_in[k, c]
                if not acc >= 0.0:
                    hit = False
                    break
            if hit:
                outcome = REACHED
                used = t
                break
            inside = True
            for c in range(kx):
                acc = 0.0
                for k in range(M):
                    acc += mono[k] * x_in[k, c]
                if acc < 0.0:
                    inside = False
                    break
            if not inside:
                outcome = LEFT_X
                used = t
                break
            if t == T:
                break
            for i in range(n):
                acc = 0.0
                for k in range(M):
                    acc += mono[k] * f_co[k, i]
                for j in range(m):
                    acc2 = 0.0
                    for k in range(M):
                        acc2 += mono[k] * g_co[k, i * m + j]
                    acc += acc2 * uval[j]
                xnew[i] = acc
            for i in range(n):
                xcur[i] = xnew[i]
        out[b] = outcome
        stp[b] = used
        if record:
            states.append(sbuf_np[:used + 1].copy())
            inputs.append(ubuf_np[:used + 1].copy())
    return out_np, stp_np, states, inputs
