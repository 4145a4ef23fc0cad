"""EM learning of the noise variances for one block or a whole network.

Each iteration smooths with the current parameters (E-step), then updates
the process variances in closed form from smoothed second moments and the
measurement variance ``r`` by a scalar search on the expected
complete-data log-likelihood (M-step). The observation variance couples
``r`` with the per-step density estimate, so the routine is EM-like rather
than exact EM: the recorded log-likelihood trace is monotone only up to a
small tolerance.
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._parallel import resolve_threads
from .errors import NumericalError, ValidationError
from .netgen import DynamicNetwork
from .ssm import (
    GaussianBelief,
    SmootherOutput,
    SsmParams,
    default_init_belief,
    literal_init_belief,
    rts_smooth,
    run_filter,
)

VARIANCE_FLOOR = 1e-12
FIT_SCHEMA_VERSION = 1

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FitConfig:
    """EM settings for one block fit.

    ``n`` may be left unset when fitting a whole network (each block then
    uses its own size). Initial guesses default to 1, which is flat enough
    to converge from on the synthetic regimes; ``literal_init`` forces the
    all-ones initial state mean instead of the data-driven bias estimate.
    """

    d: int
    n: int | None = None
    init_mean: np.ndarray | None = None
    init_cov: np.ndarray | None = None
    init_q_m: float = 1.0
    init_q_s: float = 1.0
    init_r: float = 1.0
    max_iters: int = 200
    loglik_rel_tol: float = 1e-6
    r_bracket: tuple[float, float] = (1e-12, 1.0)
    literal_init: bool = False
    backend: str | None = None

    def __post_init__(self):
        if self.d < 2:
            raise ValidationError(f"d must be >= 2, got {self.d}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        lo, hi = self.r_bracket
        if not (0.0 < lo < hi):
            raise ValidationError(f"r bracket must satisfy 0 < lo < hi, got {self.r_bracket}")
        for name in ("init_q_m", "init_q_s", "init_r"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")
        if self.loglik_rel_tol <= 0:
            raise ValidationError(f"loglik_rel_tol must be > 0, got {self.loglik_rel_tol}")


@dataclass(frozen=True)
class FitResult:
    """Learned parameters plus the final state estimates for one block."""

    q_m: float
    q_s: float
    r: float
    trace: np.ndarray            # (iters, 4): q_m, q_s, r, loglik per E-step
    smoothed_means: np.ndarray   # (T, d)
    smoothed_covs: np.ndarray    # (T, d, d)
    density_estimates: np.ndarray  # (T,)
    converged: bool
    iters: int

    @property
    def loglik_trace(self) -> np.ndarray:
        return self.trace[:, 3]


@dataclass(frozen=True)
class SufficientStats:
    """Smoothed first/second moments the M-step consumes."""

    means: np.ndarray             # (T, d)
    second_moments: np.ndarray    # (T, d, d) E[x_t x_t^T]
    lag_one_moments: np.ndarray   # (T-1, d, d) E[x_{t+1} x_t^T], entry per transition


def expected_sufficient_stats(smoothed: SmootherOutput) -> SufficientStats:
    """Second moments from smoothed means, covariances, lag-one covariances."""
    means = smoothed.means
    second = smoothed.covs + means[:, :, None] * means[:, None, :]
    lag_one = smoothed.lag_one_covs + means[1:, :, None] * means[:-1, None, :]
    return SufficientStats(means=means, second_moments=second, lag_one_moments=lag_one)


def update_Q(stats: SufficientStats, G: np.ndarray) -> tuple[float, float]:
    """Closed-form process-variance update from transition residual moments.

    Averages the (0,0) and (1,1) entries of
    E[(x_t - G x_{t-1})(x_t - G x_{t-1})^T] over the T-1 transitions;
    off-diagonal entries are discarded (the process covariance is diagonal
    by model definition). Results are floored to keep later filters
    nondegenerate.
    """
    T = stats.means.shape[0]
    if T < 2:
        raise ValidationError(f"process-variance update needs T >= 2, got {T}")
    Exx = stats.second_moments
    Exx1 = stats.lag_one_moments
    cross = Exx1 @ G.T
    M = Exx[1:] - cross - cross.transpose(0, 2, 1) + G @ Exx[:-1] @ G.T
    q_m = float(M[:, 0, 0].mean())
    q_s = float(M[:, 1, 1].mean())
    return max(q_m, VARIANCE_FLOOR), max(q_s, VARIANCE_FLOOR)


class ROptResult(NamedTuple):
    r: float
    at_boundary: bool


def optimize_r(stats: SufficientStats, w_series, n: int, density_ests,
               bracket: tuple[float, float], grid_points: int = 17,
               ln_tol: float = 1e-10) -> ROptResult:
    """Measurement-variance update: scalar maximization on a log scale.

    Maximizes the expected complete-data log-likelihood of the counts,
    sum_t [-0.5*ln(2*pi*R_t(r)) - u_t / (2*R_t(r))] with
    R_t(r) = n*e_t*(1-e_t) + n^2*r and u_t the smoothed expected squared
    observation residual. A coarse log-grid scan brackets the maximum and
    golden-section refines it; a maximum on the bracket edge is returned
    as-is and flagged.
    """
    w = np.asarray(w_series, dtype=float)
    e = np.asarray(density_ests, dtype=float)
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise ValidationError("density estimates must lie strictly inside (0, 1)")
    d = stats.means.shape[1]
    h = np.zeros(d)
    h[0] = h[1] = float(n)
    hm = stats.means @ h
    hEh = (stats.second_moments @ h) @ h
    u = (w - hm) ** 2 + np.maximum(hEh - hm**2, 0.0)
    binom = n * e * (1.0 - e)
    n2 = float(n) * float(n)
    T = w.size
    base = -0.5 * T * math.log(2.0 * math.pi)
    R = np.empty_like(binom)
    scratch = np.empty_like(binom)

    def objective(z: float) -> float:
        np.add(binom, n2 * math.exp(z), out=R)
        np.log(R, out=scratch)
        total = scratch.sum()
        np.divide(u, R, out=scratch)
        return base - 0.5 * (total + scratch.sum())

    lo, hi = bracket
    if not (0.0 < lo < hi):
        raise ValidationError(f"r bracket must satisfy 0 < lo < hi, got {bracket}")
    zs = np.linspace(math.log(lo), math.log(hi), grid_points)
    values = np.array([objective(z) for z in zs])
    if not np.any(np.isfinite(values)):
        raise NumericalError("measurement-variance objective non-finite on the whole bracket")
    values[~np.isfinite(values)] = -np.inf
    best = int(np.argmax(values))
    if best == 0:
        return ROptResult(lo, True)
    if best == grid_points - 1:
        return ROptResult(hi, True)

    a, b = zs[best - 1], zs[best + 1]
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = objective(x1), objective(x2)
    while b - a > ln_tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = objective(x2)
    return ROptResult(math.exp(0.5 * (a + b)), False)


def _initial_belief(config: FitConfig, w: np.ndarray, n: int) -> GaussianBelief:
    if config.init_mean is not None or config.init_cov is not None:
        mean = config.init_mean
        cov = config.init_cov
        base = literal_init_belief(config.d) if config.literal_init \
            else default_init_belief(w, n, config.d)
        return GaussianBelief(
            base.mean if mean is None else mean,
            base.cov if cov is None else cov,
        )
    if config.literal_init:
        return literal_init_belief(config.d)
    return default_init_belief(w, n, config.d)


def em_fit(w_series, config: FitConfig) -> FitResult:
    """Fit one block's noise parameters by iterated smoothing.

    Each iteration filters and smooths at the current parameters (also
    recording the observed-data log-likelihood), then refreshes q_m, q_s,
    and r. Stops when the log-likelihood change falls below the relative
    tolerance; the reported parameters are the ones the final smoothing
    pass actually used, so states and parameters stay consistent.
    """
    w = np.asarray(w_series, dtype=float)
    if w.ndim != 1:
        raise ValidationError(f"count series must be 1-d, got shape {w.shape}")
    T = w.size
    if T < 2:
        raise ValidationError(f"EM needs at least 2 observations, got {T}")
    if config.n is None:
        raise ValidationError("FitConfig.n is required for a single-block fit")
    n = config.n
    if T < 2 * config.d:
        warnings.warn(
            f"only {T} observations for period {config.d}; "
            "recovery is unreliable below two full periods",
            stacklevel=2,
        )

    init = _initial_belief(config, w, n)
    params = SsmParams(d=config.d, n=n, q_m=config.init_q_m,
                       q_s=config.init_q_s, r=config.init_r)
    trace = []
    prev_ll = None
    converged = False
    fo = so = None

    for it in range(1, config.max_iters + 1):
        try:
            fo = run_filter(w, params, init, backend=config.backend)
            so = rts_smooth(fo, params, backend=config.backend)
        except NumericalError as exc:
            raise NumericalError(f"EM iteration {it}: {exc}") from exc
        ll = fo.loglik
        trace.append((params.q_m, params.q_s, params.r, ll))
        if prev_ll is not None and abs(ll - prev_ll) < config.loglik_rel_tol * max(1.0, abs(ll)):
            converged = True
            break
        prev_ll = ll
        if it == config.max_iters:
            break
        try:
            stats = expected_sufficient_stats(so)
            q_m, q_s = update_Q(stats, params.G)
            ropt = optimize_r(stats, w, n, fo.density_ests, config.r_bracket)
        except NumericalError as exc:
            raise NumericalError(f"EM iteration {it}: {exc}") from exc
        params = SsmParams(d=config.d, n=n, q_m=q_m, q_s=q_s, r=ropt.r)

    return FitResult(
        q_m=params.q_m, q_s=params.q_s, r=params.r,
        trace=np.array(trace), smoothed_means=so.means, smoothed_covs=so.covs,
        density_estimates=fo.density_ests, converged=converged, iters=len(trace),
    )


@dataclass
class NetworkFitResult:
    """Per-block fits, with failures isolated instead of aborting the run."""

    results: dict[tuple[int, int], FitResult] = field(default_factory=dict)
    failures: dict[tuple[int, int], str] = field(default_factory=dict)


def fit_network(net: DynamicNetwork, config: FitConfig,
                threads: int | None = None) -> NetworkFitResult:
    """Fit every block of a network independently (optionally in parallel)."""
    out = NetworkFitResult()

    def job(block):
        return em_fit(block.counts, replace(config, n=block.n))

    workers = min(resolve_threads(threads), max(len(net.blocks), 1))
    if workers <= 1:
        items = [(b, _call(job, b)) for b in net.blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(b, pool.submit(_call, job, b)) for b in net.blocks]
            items = [(b, f.result()) for b, f in futures]

    for block, (result, error) in items:
        key = (block.type_a, block.type_b)
        if error is not None:
            out.failures[key] = error
        else:
            out.results[key] = result
    return out


def _call(fn, block):
    try:
        return fn(block), None
    except (ValidationError, NumericalError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def write_fit_results(netfit: NetworkFitResult, path) -> None:
    """Serialize per-block fits to the versioned JSON fit format."""
    entries = []
    for (a, b), fr in sorted(netfit.results.items()):
        entries.append({
            "type_a": a, "type_b": b,
            "q_m": fr.q_m, "q_s": fr.q_s, "r": fr.r,
            "loglik_trace": [float(v) for v in fr.loglik_trace],
            "converged": fr.converged, "iters": fr.iters,
            "smoothed_means": [[float(x) for x in row] for row in fr.smoothed_means],
            "density_estimates": [float(v) for v in fr.density_estimates],
        })
    doc = {"schema_version": FIT_SCHEMA_VERSION, "blocks": entries}
    if netfit.failures:
        doc["failures"] = [
            {"type_a": a, "type_b": b, "error": msg}
            for (a, b), msg in sorted(netfit.failures.items())
        ]
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def read_fit_results(path):
    """Parse a fit file into plain dicts keyed by block pair."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"fit file: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if doc.get("schema_version") != FIT_SCHEMA_VERSION:
        raise ValidationError(
            f"fit file: schema_version {doc.get('schema_version')} unsupported "
            f"(expected {FIT_SCHEMA_VERSION})"
        )
    blocks = {}
    for entry in doc.get("blocks", []):
        key = (int(entry["type_a"]), int(entry["type_b"]))
        blocks[key] = entry
    return blocks
