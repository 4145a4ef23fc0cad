"""Latent seasonal process for one block pair.

The process is a slowly drifting bias (Gaussian random walk) plus a
periodic offset sequence constrained to sum to zero over one period of
length ``d``. The state carries the bias and the ``d - 1`` most recent
offsets (most recent first); the d-th offset is implied by the zero-sum
constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import RngStream

ZERO_SUM_TOL = 1e-9

# Rounded 8-step sine offsets (amplitude 0.3), listed most-recent-first
# starting at the value for time 0.
PRESET_OFFSETS: dict[str, tuple[float, ...]] = {
    "paper-d8": (0.2, 0.3, 0.2, 0.0, -0.2, -0.3, -0.2, 0.0),
}


@dataclass(frozen=True)
class SeasonalState:
    """Bias plus the d-1 most recent seasonal offsets (most recent first)."""

    bias: float
    offsets: tuple[float, ...]
    period: int

    def __post_init__(self):
        if self.period < 2:
            raise ValidationError(f"period must be >= 2, got {self.period}")
        if len(self.offsets) != self.period - 1:
            raise ValidationError(
                f"state needs {self.period - 1} offsets for period "
                f"{self.period}, got {len(self.offsets)}"
            )
        if not math.isfinite(self.bias) or not all(map(math.isfinite, self.offsets)):
            raise ValidationError("state entries must be finite")


@dataclass(frozen=True)
class NoiseParams:
    """Process variances (bias, seasonal) and density measurement variance."""

    q_m: float
    q_s: float
    r: float

    def __post_init__(self):
        for name in ("q_m", "q_s", "r"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value}")


def init_state(m0: float, period_offsets) -> SeasonalState:
    """Build the time-0 state from a full zero-sum period of offsets.

    ``period_offsets[0]`` is the offset in effect at time 0,
    ``period_offsets[1]`` the one before it, and so on; the last entry is
    implied afterwards by the zero-sum constraint and is only used to
    verify it.
    """
    offsets = tuple(float(v) for v in period_offsets)
    if len(offsets) < 2:
        raise ValidationError(f"need at least 2 period offsets, got {len(offsets)}")
    residual = math.fsum(offsets)
    if abs(residual) > ZERO_SUM_TOL:
        raise ValidationError(
            f"period offsets must sum to zero, got residual {residual:.3e}"
        )
    return SeasonalState(bias=float(m0), offsets=offsets[:-1], period=len(offsets))


def step_state(state: SeasonalState, noise: NoiseParams, rng: RngStream) -> SeasonalState:
    """Advance one time step.

    The bias takes a Gaussian increment (variance ``q_m``); the new leading
    offset is minus the sum of the stored ones plus a Gaussian increment
    (variance ``q_s``); older offsets shift back one slot. Draw order is
    fixed (bias first) so equal-seed streams replay identically.
    """
    bias = state.bias + rng.normal(0.0, math.sqrt(noise.q_m))
    lead = -sum(state.offsets) + rng.normal(0.0, math.sqrt(noise.q_s))
    return SeasonalState(
        bias=bias, offsets=(lead,) + state.offsets[:-1], period=state.period
    )


def process_value(state: SeasonalState) -> float:
    """Current noiseless density level: bias plus the leading offset."""
    return state.bias + state.offsets[0]


def sample_density(c: float, r: float, rng: RngStream) -> float:
    """Observed density: ``c`` plus Gaussian noise of variance ``r``.

    The draw is clamped to [0, 1] so it can parameterize edge sampling;
    this slightly biases densities near the boundaries.
    """
    if r < 0:
        raise ValidationError(f"r must be >= 0, got {r}")
    return float(min(1.0, max(0.0, c + rng.normal(0.0, math.sqrt(r)))))


def sine_offsets(d: int, amplitude: float) -> tuple[float, ...]:
    """One period of sine-wave offsets, projected to sum exactly to zero.

    Entry ``i`` is ``amplitude * sin(2*pi*i/d)`` minus the mean of the raw
    values, so the result is zero-sum to float precision.
    """
    if d < 2:
        raise ValidationError(f"d must be >= 2, got {d}")
    if amplitude < 0:
        raise ValidationError(f"amplitude must be >= 0, got {amplitude}")
    raw = amplitude * np.sin(2.0 * np.pi * np.arange(d) / d)
    raw -= raw.mean()
    return tuple(float(v) for v in raw)


def state_vector(state: SeasonalState) -> np.ndarray:
    """State as the length-d vector (bias, offsets...) used by inference."""
    return np.array((state.bias,) + state.offsets, dtype=float)
