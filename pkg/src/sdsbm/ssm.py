"""State-space form of the seasonal block process, filtering and smoothing.

The hidden state stacks the bias and the d-1 most recent seasonal offsets.
The transition matrix advances the bias, rolls the offsets, and rebuilds
the leading offset from the zero-sum constraint; the observation row maps
the state to an expected edge count for a block with ``n`` possible edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError

# Density clamp applied before forming the observation variance; keeps the
# innovation variance strictly positive even with r = 0.
EPS_CLAMP = 1e-6

# Diagonal jitter scale (relative to mean diagonal) for the smoother solve.
JITTER_SCALE = 1e-10


def build_G(d: int) -> np.ndarray:
    """Transition matrix: keep bias, refresh the leading offset from the
    zero-sum constraint, shift the remaining offsets down a slot."""
    if d < 2:
        raise ValidationError(f"d must be >= 2, got {d}")
    G = np.zeros((d, d))
    G[0, 0] = 1.0
    G[1, 1:] = -1.0
    for i in range(2, d):
        G[i, i - 1] = 1.0
    return G


def build_H(n: int, d: int) -> np.ndarray:
    """Observation row (n, n, 0, ..., 0): expected count is n*(bias + offset)."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if d < 2:
        raise ValidationError(f"d must be >= 2, got {d}")
    h = np.zeros(d)
    h[0] = h[1] = float(n)
    return h


def obs_variance(n: int, E: float, r: float) -> float:
    """Count variance: binomial part n*E*(1-E) plus density noise n^2*r."""
    return n * E * (1.0 - E) + n * n * r


@dataclass(frozen=True)
class SsmParams:
    """Parameter set for one block: dimensions plus noise variances.

    ``G`` and ``H`` are derived from (d, n); ``Q`` is diagonal with q_m and
    q_s in the first two slots and zeros elsewhere.
    """

    d: int
    n: int
    q_m: float
    q_s: float
    r: float
    G: np.ndarray = field(init=False, repr=False, compare=False)
    H: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("q_m", "q_s", "r"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value}")
        object.__setattr__(self, "G", build_G(self.d))
        object.__setattr__(self, "H", build_H(self.n, self.d))

    @property
    def Q(self) -> np.ndarray:
        Q = np.zeros((self.d, self.d))
        Q[0, 0] = self.q_m
        Q[1, 1] = self.q_s
        return Q


class GaussianBelief:
    """Mean vector and symmetric covariance of a state posterior."""

    __slots__ = ("mean", "cov")

    def __init__(self, mean, cov):
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValidationError(
                f"belief dimensions mismatch: mean {mean.shape}, cov {cov.shape}"
            )
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValidationError("belief entries must be finite")
        self.mean = mean.copy()
        self.cov = 0.5 * (cov + cov.T)

    @property
    def d(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class FilterOutput:
    """Per-step filter quantities for one block (arrays indexed t-1)."""

    pred_means: np.ndarray       # (T, d) state mean given counts up to t-1
    pred_covs: np.ndarray        # (T, d, d)
    filt_means: np.ndarray       # (T, d) state mean given counts up to t
    filt_covs: np.ndarray        # (T, d, d)
    innovations: np.ndarray      # (T,) count minus predicted count
    innovation_vars: np.ndarray  # (T,)
    density_ests: np.ndarray     # (T,) clamped one-step-ahead density
    obs_vars: np.ndarray         # (T,) observation variance used per step
    loglik: float

    @property
    def T(self) -> int:
        return self.innovations.size


@dataclass(frozen=True)
class SmootherOutput:
    """Full-series posteriors plus lag-one cross covariances.

    ``lag_one_covs[i]`` is Cov(x at step i+2, x at step i+1 | all counts)
    in 1-based step numbering: one entry per transition.
    """

    means: np.ndarray         # (T, d)
    covs: np.ndarray          # (T, d, d)
    lag_one_covs: np.ndarray  # (T-1, d, d)


def predict(belief: GaussianBelief, params: SsmParams) -> GaussianBelief:
    """One-step prediction through the transition model."""
    mean = params.G @ belief.mean
    cov = params.G @ belief.cov @ params.G.T
    cov[0, 0] += params.q_m
    cov[1, 1] += params.q_s
    return GaussianBelief(mean, cov)


def update(pred: GaussianBelief, w: float, params: SsmParams, R_t: float):
    """Measurement update against one observed count.

    Returns (posterior, loglik_term, innovation, innovation_variance).
    """
    h = params.H
    Ph = pred.cov @ h
    S = float(h @ Ph) + R_t
    if S <= 0.0:
        raise NumericalError(f"nonpositive innovation variance S={S}")
    nu = float(w) - float(h @ pred.mean)
    K = Ph / S
    mean = pred.mean + K * nu
    cov = pred.cov - np.outer(K, Ph)
    loglik_term = -0.5 * (math.log(2.0 * math.pi * S) + nu * nu / S)
    return GaussianBelief(mean, cov), loglik_term, nu, S


def default_init_belief(w_series, n: int, d: int) -> GaussianBelief:
    """Data-driven prior: bias at the mean observed density over the first
    period, zero offsets, identity covariance."""
    w = np.asarray(w_series, dtype=float)
    mean = np.zeros(d)
    mean[0] = float(w[: min(d, w.size)].mean()) / n
    return GaussianBelief(mean, np.eye(d))


def literal_init_belief(d: int) -> GaussianBelief:
    """All-ones prior mean with identity covariance (flat default)."""
    return GaussianBelief(np.ones(d), np.eye(d))


def run_filter(w_series, params: SsmParams, init: GaussianBelief,
               backend: str | None = None) -> FilterOutput:
    """Kalman-filter one block's count series.

    Each step predicts, estimates the density from the predicted state
    (clamped to [EPS_CLAMP, 1 - EPS_CLAMP]), forms the observation
    variance via :func:`obs_variance`, and updates. The total
    log-likelihood is the sum of the per-step innovation terms.
    """
    w = np.asarray(w_series, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValidationError(f"count series must be 1-d and nonempty, got {w.shape}")
    if init.d != params.d:
        raise ValidationError(f"init belief is {init.d}-d, params are {params.d}-d")
    kern = _kernels.get_backend(backend)
    out = kern.filter_counts(w, params.G, params.H, float(params.n),
                             params.q_m, params.q_s, params.r, EPS_CLAMP,
                             init.mean, init.cov)
    return FilterOutput(*out[:8], loglik=float(out[8]))


def rts_smooth(fo: FilterOutput, params: SsmParams,
               backend: str | None = None) -> SmootherOutput:
    """Backward smoothing pass over a filter output."""
    kern = _kernels.get_backend(backend)
    means, covs, lag_one = kern.smooth_counts(
        params.G, fo.filt_means, fo.filt_covs, fo.pred_means, fo.pred_covs,
        JITTER_SCALE)
    return SmootherOutput(means=means, covs=covs, lag_one_covs=lag_one)
