# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. ``ragoose._fallback`` mirrors every function here."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


def rbf_cross(double[:, ::1] X1, double[:, ::1] X2, double[::1] inv_ls,
              double variance):
    """Dense RBF cross-covariance ``variance * exp(-0.5 * |(x - x') / l|^2)``."""
    cdef Py_ssize_t n1 = X1.shape[0], n2 = X2.shape[0], d = X1.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    out = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] K = out
    for i in range(n1):
        for j in range(n2):
            acc = 0.0
            for k in range(d):
                diff = (X1[i, k] - X2[j, k]) * inv_ls[k]
                acc += diff * diff
            K[i, j] = variance * exp(-0.5 * acc)
    return out


def rbf_gram(double[:, ::1] X, double[::1] inv_ls, double variance):
    """Symmetric ``rbf_cross(X, X)``; each off-diagonal exponential is computed once."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, v
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] K = out
    for i in range(n):
        K[i, i] = variance
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = (X[i, k] - X[j, k]) * inv_ls[k]
                acc += diff * diff
            v = variance * exp(-0.5 * acc)
            K[i, j] = v
            K[j, i] = v
    return out


def simulate_loop(double[:, ::1] Ad, double[::1] Bd, double[::1] Cy,
                  double[::1] p_ref, double[::1] v_ref, double[::1] a_ref,
                  double[::1] meas_noise,
                  double kp, double vkp, double vki, double aff, double vff,
                  double fs, int delay, double guard):
    """Run the discrete cascade loop; returns ``(pe, ve, n_done, unstable)``.

    Position errors are in the reference's units. ``delay`` adds one sample
    of computation delay between controller output and plant input.
    """
    cdef Py_ssize_t N = p_ref.shape[0], n = Ad.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double ts = 1.0 / fs
    cdef double y, y_prev = 0.0, v_meas, e, v_cmd, e_v, integ = 0.0
    cdef double u, u_prev = 0.0, u_applied, acc
    pe_arr = np.zeros(N, dtype=np.float64)
    ve_arr = np.zeros(N, dtype=np.float64)
    cdef double[::1] pe = pe_arr
    cdef double[::1] ve = ve_arr
    cdef double[::1] x = np.zeros(n, dtype=np.float64)
    cdef double[::1] xn = np.zeros(n, dtype=np.float64)
    for k in range(N):
        y = meas_noise[k]
        for i in range(n):
            y += Cy[i] * x[i]
        if k > 0:
            v_meas = (y - y_prev) * fs
        else:
            v_meas = 0.0
        y_prev = y
        e = p_ref[k] - y
        v_cmd = kp * e + vff * v_ref[k]
        e_v = v_cmd - v_meas
        integ += e_v * ts
        u = vkp * (e_v + vki * integ) + aff * a_ref[k]
        pe[k] = e
        ve[k] = v_ref[k] - v_meas
        if fabs(e) > guard:
            return pe_arr, ve_arr, k + 1, True
        if delay:
            u_applied = u_prev
        else:
            u_applied = u
        u_prev = u
        for i in range(n):
            acc = Bd[i] * u_applied
            for j in range(n):
                acc += Ad[i, j] * x[j]
            xn[i] = acc
        for i in range(n):
            x[i] = xn[i]
    return pe_arr, ve_arr, N, False
