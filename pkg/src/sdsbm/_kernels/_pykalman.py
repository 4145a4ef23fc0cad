"""Reference numpy implementation of the filter/smoother kernels.

The compiled extension in ``_ckalman.pyx`` mirrors these loops step for
step; keep the two in sync when touching either.
"""
from __future__ import annotations

import math

import numpy as np

from sdsbm.errors import NumericalError


def filter_counts(w, G, h, n, q_m, q_s, r, eps_c, init_mean, init_cov):
    """Forward Kalman pass over one block's count series.

    Per step: linear-Gaussian predict through ``G`` with process variances
    (q_m, q_s) on the first two diagonal slots; density estimate from the
    predicted state, clamped to [eps_c, 1 - eps_c]; observation variance
    ``n*e*(1-e) + n^2*r``; scalar measurement update against ``h``.

    Returns (pred_mean, pred_cov, filt_mean, filt_cov, innovation,
    innovation_var, density_est, obs_var, loglik).
    """
    w = np.asarray(w, dtype=float)
    T = w.shape[0]
    d = G.shape[0]

    pred_mean = np.empty((T, d))
    pred_cov = np.empty((T, d, d))
    filt_mean = np.empty((T, d))
    filt_cov = np.empty((T, d, d))
    innovation = np.empty(T)
    innovation_var = np.empty(T)
    density_est = np.empty(T)
    obs_var = np.empty(T)

    mean = np.array(init_mean, dtype=float)
    cov = np.array(init_cov, dtype=float)
    loglik = 0.0

    for t in range(T):
        mean = G @ mean
        cov = G @ cov @ G.T
        cov[0, 0] += q_m
        cov[1, 1] += q_s
        cov = 0.5 * (cov + cov.T)
        pred_mean[t] = mean
        pred_cov[t] = cov

        hm = float(h @ mean)
        e = min(1.0 - eps_c, max(eps_c, hm / n))
        R = n * e * (1.0 - e) + n * n * r
        Ph = cov @ h
        S = float(h @ Ph) + R
        if S <= 0.0:
            raise NumericalError(f"nonpositive innovation variance at step {t + 1}")
        nu = w[t] - hm
        K = Ph / S
        mean = mean + K * nu
        cov = cov - np.outer(K, Ph)
        cov = 0.5 * (cov + cov.T)

        filt_mean[t] = mean
        filt_cov[t] = cov
        innovation[t] = nu
        innovation_var[t] = S
        density_est[t] = e
        obs_var[t] = R
        loglik += -0.5 * (math.log(2.0 * math.pi * S) + nu * nu / S)

    return (pred_mean, pred_cov, filt_mean, filt_cov, innovation,
            innovation_var, density_est, obs_var, loglik)


def smooth_counts(G, filt_mean, filt_cov, pred_mean, pred_cov, jitter_scale):
    """Backward (fixed-interval) smoothing pass.

    Returns (smooth_mean, smooth_cov, lag_one_cov) where ``lag_one_cov[i]``
    is the smoothed cross covariance between steps ``i + 1`` and ``i``
    (0-based), i.e. one entry per transition.
    """
    T, d = filt_mean.shape
    smooth_mean = np.empty_like(filt_mean)
    smooth_cov = np.empty_like(filt_cov)
    lag_one = np.empty((max(T - 1, 0), d, d))

    smooth_mean[T - 1] = filt_mean[T - 1]
    smooth_cov[T - 1] = filt_cov[T - 1]

    for t in range(T - 2, -1, -1):
        Pp = pred_cov[t + 1]
        GP = G @ filt_cov[t]
        J = _psd_solve(Pp, GP, d, jitter_scale, t + 2).T
        smooth_mean[t] = filt_mean[t] + J @ (smooth_mean[t + 1] - pred_mean[t + 1])
        C = smooth_cov[t + 1] - Pp
        cov = filt_cov[t] + J @ C @ J.T
        smooth_cov[t] = 0.5 * (cov + cov.T)
        lag_one[t] = smooth_cov[t + 1] @ J.T

    return smooth_mean, smooth_cov, lag_one


def _psd_solve(A, B, d, jitter_scale, step):
    """Solve A X = B for symmetric PSD A, adding jitter once if needed."""
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        A = A + np.eye(d) * (jitter_scale * np.trace(A) / d)
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise NumericalError(
                f"singular one-step covariance at step {step}"
            ) from None
    return np.linalg.solve(A, B)
