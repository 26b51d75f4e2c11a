"""Pure-Python/numpy versions of the compiled kernels in ``_core.pyx``."""

import numpy as np


def rbf_cross(X1, X2, inv_ls, variance):
    sq = np.zeros((X1.shape[0], X2.shape[0]))
    for k in range(X1.shape[1]):
        diff = (X1[:, k, None] - X2[None, :, k]) * inv_ls[k]
        sq += diff * diff
    return variance * np.exp(-0.5 * sq)


def rbf_gram(X, inv_ls, variance):
    K = rbf_cross(X, X, inv_ls, variance)
    np.fill_diagonal(K, variance)
    return K


def simulate_loop(Ad, Bd, Cy, p_ref, v_ref, a_ref, meas_noise,
                  kp, vkp, vki, aff, vff, fs, delay, guard):
    N = len(p_ref)
    n = Ad.shape[0]
    ts = 1.0 / fs
    A = Ad.tolist()
    B = list(Bd)
    C = list(Cy)
    p_ref = list(p_ref)
    v_ref = list(v_ref)
    a_ref = list(a_ref)
    noise = list(meas_noise)
    rng_n = range(n)
    pe = np.zeros(N)
    ve = np.zeros(N)
    x = [0.0] * n
    y_prev = 0.0
    integ = 0.0
    u_prev = 0.0
    for k in range(N):
        y = noise[k]
        for i in rng_n:
            y += C[i] * x[i]
        v_meas = (y - y_prev) * fs if k > 0 else 0.0
        y_prev = y
        e = p_ref[k] - y
        e_v = kp * e + vff * v_ref[k] - v_meas
        integ += e_v * ts
        u = vkp * (e_v + vki * integ) + aff * a_ref[k]
        pe[k] = e
        ve[k] = v_ref[k] - v_meas
        if abs(e) > guard:
            return pe, ve, k + 1, True
        u_applied = u_prev if delay else u
        u_prev = u
        x = [B[i] * u_applied + sum(A[i][j] * x[j] for j in rng_n) for i in rng_n]
    return pe, ve, N, False
