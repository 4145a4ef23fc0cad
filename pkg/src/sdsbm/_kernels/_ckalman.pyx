# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled filter/smoother kernels; mirrors ``_pykalman`` step for step."""
from libc.math cimport log, sqrt, M_PI

import numpy as np

from sdsbm.errors import NumericalError


def filter_counts(w, G, h, double n, double q_m, double q_s, double r,
                  double eps_c, init_mean, init_cov):
    """See ``_pykalman.filter_counts``; same contract, C loops, GIL released."""
    w_arr = np.ascontiguousarray(w, dtype=np.float64)
    G_arr = np.ascontiguousarray(G, dtype=np.float64)
    h_arr = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] wv = w_arr
    cdef double[:, ::1] Gv = G_arr
    cdef double[::1] hv = h_arr
    cdef Py_ssize_t T = wv.shape[0]
    cdef Py_ssize_t d = Gv.shape[0]

    pred_mean = np.empty((T, d))
    pred_cov = np.empty((T, d, d))
    filt_mean = np.empty((T, d))
    filt_cov = np.empty((T, d, d))
    innovation = np.empty(T)
    innovation_var = np.empty(T)
    density_est = np.empty(T)
    obs_var = np.empty(T)

    cdef double[:, ::1] pm = pred_mean
    cdef double[:, :, ::1] pc = pred_cov
    cdef double[:, ::1] fm = filt_mean
    cdef double[:, :, ::1] fc = filt_cov
    cdef double[::1] inno = innovation
    cdef double[::1] inno_var = innovation_var
    cdef double[::1] dens = density_est
    cdef double[::1] ovar = obs_var

    mean_arr = np.array(init_mean, dtype=np.float64)
    cov_arr = np.array(init_cov, dtype=np.float64)
    tmp_arr = np.empty((d, d))
    ph_arr = np.empty(d)
    k_arr = np.empty(d)
    cdef double[::1] mean = mean_arr
    cdef double[:, ::1] cov = cov_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[::1] Ph = ph_arr
    cdef double[::1] K = k_arr

    cdef double loglik = 0.0
    cdef double acc, hm, e, R, S, nu, v
    cdef Py_ssize_t t, i, j, k
    cdef Py_ssize_t bad_t = -1

    with nogil:
        for t in range(T):
            # predict: mean <- G mean, cov <- G cov G^T + Q
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += Gv[i, j] * mean[j]
                pm[t, i] = acc
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += Gv[i, k] * cov[k, j]
                    tmp[i, j] = acc
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += tmp[i, k] * Gv[j, k]
                    cov[i, j] = acc
            cov[0, 0] += q_m
            cov[1, 1] += q_s
            for i in range(d):
                for j in range(i + 1, d):
                    v = 0.5 * (cov[i, j] + cov[j, i])
                    cov[i, j] = v
                    cov[j, i] = v
            for i in range(d):
                mean[i] = pm[t, i]
                for j in range(d):
                    pc[t, i, j] = cov[i, j]

            # update against the scalar count observation
            hm = 0.0
            for i in range(d):
                hm += hv[i] * mean[i]
            e = hm / n
            if e < eps_c:
                e = eps_c
            elif e > 1.0 - eps_c:
                e = 1.0 - eps_c
            R = n * e * (1.0 - e) + n * n * r
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += cov[i, j] * hv[j]
                Ph[i] = acc
            S = R
            for i in range(d):
                S += hv[i] * Ph[i]
            if S <= 0.0:
                bad_t = t
                break
            nu = wv[t] - hm
            for i in range(d):
                K[i] = Ph[i] / S
            for i in range(d):
                mean[i] = mean[i] + K[i] * nu
            for i in range(d):
                for j in range(d):
                    cov[i, j] = cov[i, j] - K[i] * Ph[j]
            for i in range(d):
                for j in range(i + 1, d):
                    v = 0.5 * (cov[i, j] + cov[j, i])
                    cov[i, j] = v
                    cov[j, i] = v
            for i in range(d):
                fm[t, i] = mean[i]
                for j in range(d):
                    fc[t, i, j] = cov[i, j]
            inno[t] = nu
            inno_var[t] = S
            dens[t] = e
            ovar[t] = R
            loglik += -0.5 * (log(2.0 * M_PI * S) + nu * nu / S)

    if bad_t >= 0:
        raise NumericalError(f"nonpositive innovation variance at step {bad_t + 1}")

    return (pred_mean, pred_cov, filt_mean, filt_cov, innovation,
            innovation_var, density_est, obs_var, loglik)


cdef int _cholesky(double[:, ::1] A, double[:, ::1] L, Py_ssize_t d) nogil:
    """Lower Cholesky factor of A into L; -1 if not positive definite."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(d):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return -1
                L[i, i] = sqrt(s)
            else:
                L[i, j] = s / L[j, j]
        for j in range(i + 1, d):
            L[i, j] = 0.0
    return 0


cdef void _chol_solve(double[:, ::1] L, double[:, ::1] B, double[:, ::1] X,
                      double[::1] y, Py_ssize_t d) nogil:
    """Solve (L L^T) X = B column by column via two triangular sweeps."""
    cdef Py_ssize_t c, i, k
    cdef double s
    for c in range(d):
        for i in range(d):
            s = B[i, c]
            for k in range(i):
                s -= L[i, k] * y[k]
            y[i] = s / L[i, i]
        for i in range(d - 1, -1, -1):
            s = y[i]
            for k in range(i + 1, d):
                s -= L[k, i] * X[k, c]
            X[i, c] = s / L[i, i]


def smooth_counts(G, filt_mean, filt_cov, pred_mean, pred_cov,
                  double jitter_scale):
    """See ``_pykalman.smooth_counts``; same contract."""
    G_arr = np.ascontiguousarray(G, dtype=np.float64)
    fm_arr = np.ascontiguousarray(filt_mean, dtype=np.float64)
    fc_arr = np.ascontiguousarray(filt_cov, dtype=np.float64)
    pm_arr = np.ascontiguousarray(pred_mean, dtype=np.float64)
    pc_arr = np.ascontiguousarray(pred_cov, dtype=np.float64)
    cdef double[:, ::1] Gv = G_arr
    cdef double[:, ::1] fm = fm_arr
    cdef double[:, :, ::1] fc = fc_arr
    cdef double[:, ::1] pm = pm_arr
    cdef double[:, :, ::1] pc = pc_arr
    cdef Py_ssize_t T = fm.shape[0]
    cdef Py_ssize_t d = fm.shape[1]

    smooth_mean = np.empty((T, d))
    smooth_cov = np.empty((T, d, d))
    lag_one = np.empty((T - 1 if T > 1 else 0, d, d))
    cdef double[:, ::1] sm = smooth_mean
    cdef double[:, :, ::1] sc = smooth_cov
    cdef double[:, :, ::1] lg = lag_one

    A_arr = np.empty((d, d))
    L_arr = np.empty((d, d))
    X_arr = np.empty((d, d))
    J_arr = np.empty((d, d))
    C_arr = np.empty((d, d))
    tmp_arr = np.empty((d, d))
    y_arr = np.empty(d)
    dm_arr = np.empty(d)
    cdef double[:, ::1] Aw = A_arr
    cdef double[:, ::1] Lw = L_arr
    cdef double[:, ::1] Xw = X_arr
    cdef double[:, ::1] Jw = J_arr
    cdef double[:, ::1] Cw = C_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[::1] yw = y_arr
    cdef double[::1] dm = dm_arr

    cdef double acc, jitter, tr, v
    cdef Py_ssize_t t, i, j, k
    cdef Py_ssize_t bad_t = -1
    cdef int ok

    with nogil:
        for i in range(d):
            sm[T - 1, i] = fm[T - 1, i]
            for j in range(d):
                sc[T - 1, i, j] = fc[T - 1, i, j]

        for t in range(T - 2, -1, -1):
            # GP = G @ filt_cov[t]
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += Gv[i, k] * fc[t, k, j]
                    Aw[i, j] = acc
            # factor pred_cov[t+1], with one jitter retry
            for i in range(d):
                for j in range(d):
                    Cw[i, j] = pc[t + 1, i, j]
            ok = _cholesky(Cw, Lw, d)
            if ok != 0:
                tr = 0.0
                for i in range(d):
                    tr += pc[t + 1, i, i]
                jitter = jitter_scale * tr / d
                for i in range(d):
                    for j in range(d):
                        Cw[i, j] = pc[t + 1, i, j]
                    Cw[i, i] += jitter
                ok = _cholesky(Cw, Lw, d)
                if ok != 0:
                    bad_t = t + 2
                    break
            # J = (pred_cov[t+1]^-1 GP)^T
            _chol_solve(Lw, Aw, Xw, yw, d)
            for i in range(d):
                for j in range(d):
                    Jw[i, j] = Xw[j, i]
            for i in range(d):
                dm[i] = sm[t + 1, i] - pm[t + 1, i]
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += Jw[i, j] * dm[j]
                sm[t, i] = fm[t, i] + acc
            # smooth_cov[t] = filt_cov[t] + J (smooth_cov[t+1] - pred_cov[t+1]) J^T
            for i in range(d):
                for j in range(d):
                    Cw[i, j] = sc[t + 1, i, j] - pc[t + 1, i, j]
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += Jw[i, k] * Cw[k, j]
                    tmp[i, j] = acc
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += tmp[i, k] * Jw[j, k]
                    sc[t, i, j] = fc[t, i, j] + acc
            for i in range(d):
                for j in range(i + 1, d):
                    v = 0.5 * (sc[t, i, j] + sc[t, j, i])
                    sc[t, i, j] = v
                    sc[t, j, i] = v
            # lag_one[t] = smooth_cov[t+1] @ J^T
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += sc[t + 1, i, k] * Jw[j, k]
                    lg[t, i, j] = acc

    if bad_t >= 0:
        raise NumericalError(f"singular one-step covariance at step {bad_t}")

    return smooth_mean, smooth_cov, lag_one
