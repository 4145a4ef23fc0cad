"""Seeded synthetic experiments with CSV output.

Three harnesses: a single-network recovery trace (truth, counts, filtered
estimate, 95% band), an observation-length sweep, and a measurement-noise
sweep, both reporting per-block state MSE against the generation record.
The fitting path consumes counts only; ground truth enters metric
computation alone.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._parallel import resolve_threads
from .em import FitConfig, em_fit, fit_network
from .errors import ValidationError
from .netgen import NetworkConfig, generate
from .seasonal import PRESET_OFFSETS, NoiseParams
from .ssm import SsmParams, run_filter

DEFAULT_NOISE_GRID = (5e-4, 1e-3, 5e-3, 1e-2, 5e-2)
DEFAULT_PERIOD_MULTIPLES = tuple(range(2, 11))

RECOVERY_HEADER = ("t", "truth", "observed", "estimate", "lo95", "hi95")
SWEEP_HEADER = ("block_a", "block_b", "sweep_value", "seed", "mse")


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment run: generator settings, seeds, sweep, output path."""

    kind: str                     # recovery | periods | noise
    seeds: tuple[int, ...] = (0,)
    sweep_values: tuple[float, ...] | None = None
    out_path: str | None = None
    k: int = 3
    d: int = 8
    block_n: int = 1000
    m0: float = 0.5
    offsets: tuple[float, ...] = PRESET_OFFSETS["paper-d8"]
    q_m: float = 1e-8
    q_s: float = 1e-8
    r: float = 5.5e-3
    periods: int = 10             # observation length in periods (T = periods*d)
    block: tuple[int, int] = (0, 1)
    fit: FitConfig | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.kind not in ("recovery", "periods", "noise"):
            raise ValidationError(f"unknown experiment kind {self.kind!r}")
        if len(self.seeds) < 1:
            raise ValidationError("need at least one seed")
        if self.sweep_values is not None:
            vals = self.sweep_values
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValidationError("sweep values must be strictly increasing")

    def fit_config(self, d: int | None = None) -> FitConfig:
        if self.fit is not None:
            return self.fit
        return FitConfig(d=d if d is not None else self.d)

    def network_config(self, T: int, seed: int, r: float | None = None) -> NetworkConfig:
        noise = NoiseParams(q_m=self.q_m, q_s=self.q_s,
                            r=self.r if r is None else r)
        return NetworkConfig.uniform(
            k=self.k, d=self.d, T=T, seed=seed, m0=self.m0,
            period_offsets=self.offsets, noise=noise, block_n=self.block_n,
        )


def mse_states(truth: np.ndarray, est: np.ndarray) -> float:
    """Mean squared error over all steps and all state components."""
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise ValidationError(
            f"state series shapes differ: {truth.shape} vs {est.shape}"
        )
    return float(np.mean((truth - est) ** 2))


def run_recovery(spec: ExperimentSpec) -> list[tuple]:
    """Generate one network, fit one block, trace estimate vs truth.

    Rows are (t, n*c_t from the truth record, observed count, filtered
    count estimate, 95% band bounds), using the filter rerun at the fitted
    parameters.
    """
    seed = spec.seeds[0]
    config = spec.network_config(T=spec.periods * spec.d, seed=seed)
    net = generate(config)
    a, b = spec.block
    series = net.block(a, b)
    tb = net.truth_block(a, b)

    fit = em_fit(series.counts, replace(spec.fit_config(), n=series.n))
    params = SsmParams(d=spec.d, n=series.n, q_m=fit.q_m, q_s=fit.q_s, r=fit.r)
    init = _fit_init(spec.fit_config(), series.counts, series.n)
    fo = run_filter(series.counts, params, init)

    h = params.H
    rows = []
    for i in range(net.T):
        truth = series.n * float(tb.states[i][0] + tb.states[i][1])
        est = float(h @ fo.filt_means[i])
        band = 1.96 * float(np.sqrt(h @ fo.filt_covs[i] @ h))
        rows.append((i + 1, truth, int(series.counts[i]), est, est - band, est + band))
    if spec.out_path is not None:
        _write_csv(spec.out_path, RECOVERY_HEADER, rows)
    return rows


def recovery_coverage(rows, d: int) -> float:
    """Fraction of steps after the first period with truth inside the band."""
    tail = [r for r in rows if r[0] > d]
    hits = sum(1 for r in tail if r[4] <= r[1] <= r[5])
    return hits / len(tail)


def run_period_sweep(spec: ExperimentSpec) -> list[tuple]:
    """MSE of fitted states vs truth as the observed length grows.

    Sweep values are period counts; each (multiple, seed) cell generates a
    fresh network with T = multiple*d and fits every block. Seed-averaged
    rows are appended with seed='avg'.
    """
    multiples = spec.sweep_values or DEFAULT_PERIOD_MULTIPLES
    cells = [(int(m), s) for m in multiples for s in spec.seeds]

    def cell(mult_seed):
        mult, seed = mult_seed
        net = generate(spec.network_config(T=mult * spec.d, seed=seed))
        return _block_mses(net, spec.fit_config())

    results = _run_cells(cells, cell, spec.threads)
    return _sweep_rows(spec, cells, results)


def run_noise_sweep(spec: ExperimentSpec) -> list[tuple]:
    """MSE of fitted states vs truth as measurement noise grows.

    Sweep values are generation-time measurement variances; T is fixed at
    ``spec.periods`` periods.
    """
    grid = spec.sweep_values or DEFAULT_NOISE_GRID
    cells = [(float(r), s) for r in grid for s in spec.seeds]

    def cell(r_seed):
        r, seed = r_seed
        net = generate(spec.network_config(T=spec.periods * spec.d, seed=seed, r=r))
        return _block_mses(net, spec.fit_config())

    results = _run_cells(cells, cell, spec.threads)
    return _sweep_rows(spec, cells, results)


def _fit_init(config: FitConfig, counts, n):
    from .em import _initial_belief

    return _initial_belief(config, np.asarray(counts, dtype=float), n)


def _block_mses(net, fit_config: FitConfig) -> dict[tuple[int, int], float]:
    netfit = fit_network(net, fit_config, threads=1)
    if netfit.failures:
        pair, msg = next(iter(sorted(netfit.failures.items())))
        raise ValidationError(f"fit failed for block {pair}: {msg}")
    mses = {}
    for pair, fr in netfit.results.items():
        tb = net.truth_block(*pair)
        mses[pair] = mse_states(tb.states, fr.smoothed_means)
    return mses


def _run_cells(cells, fn, threads):
    workers = min(resolve_threads(threads), max(len(cells), 1))
    if workers <= 1:
        return {c: fn(c) for c in cells}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {c: pool.submit(fn, c) for c in cells}
        return {c: f.result() for c, f in futures.items()}


def _sweep_rows(spec: ExperimentSpec, cells, results) -> list[tuple]:
    rows = []
    for (value, seed), mses in results.items():
        for (a, b), mse in mses.items():
            rows.append((a, b, value, seed, mse))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))

    averages = []
    pairs = sorted({(r[0], r[1]) for r in rows})
    values = sorted({r[2] for r in rows})
    for a, b in pairs:
        for v in values:
            cell_mses = [r[4] for r in rows if (r[0], r[1], r[2]) == (a, b, v)]
            averages.append((a, b, v, "avg", float(np.mean(cell_mses))))
    out = rows + averages
    if spec.out_path is not None:
        _write_csv(spec.out_path, SWEEP_HEADER, out)
    return out


def sweep_averages(rows) -> dict[tuple[int, int], list[tuple[float, float]]]:
    """Seed-averaged (sweep_value, mse) curve per block, from sweep rows."""
    curves: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for a, b, value, seed, mse in rows:
        if seed == "avg":
            curves.setdefault((a, b), []).append((float(value), float(mse)))
    for curve in curves.values():
        curve.sort()
    return curves


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".10g")


def _write_csv(path, header, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
