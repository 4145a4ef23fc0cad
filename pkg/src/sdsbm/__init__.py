"""Seasonal dynamic stochastic block models.

Generation of block-structured dynamic networks whose edge densities
follow latent seasonal processes, exact Kalman/RTS inference of those
processes from edge counts, EM learning of the noise variances, and a
seeded experiment harness.
"""
from ._kernels import available_backends, default_backend_name
from .em import (
    FitConfig,
    FitResult,
    NetworkFitResult,
    em_fit,
    expected_sufficient_stats,
    fit_network,
    optimize_r,
    read_fit_results,
    update_Q,
    write_fit_results,
)
from .errors import NumericalError, ValidationError
from .experiments import (
    ExperimentSpec,
    mse_states,
    run_noise_sweep,
    run_period_sweep,
    run_recovery,
)
from .netgen import (
    BlockSpec,
    DynamicNetwork,
    NetworkConfig,
    block_counts_from_adjacency,
    enumerate_block_pairs,
    generate,
    possible_edges,
    read_network,
    sample_block_adjacency,
    sample_block_count,
    write_network,
)
from .rng import RngStream, block_stream, master_stream
from .seasonal import (
    PRESET_OFFSETS,
    NoiseParams,
    SeasonalState,
    init_state,
    process_value,
    sample_density,
    sine_offsets,
    state_vector,
    step_state,
)
from .ssm import (
    EPS_CLAMP,
    FilterOutput,
    GaussianBelief,
    SmootherOutput,
    SsmParams,
    build_G,
    build_H,
    obs_variance,
    predict,
    rts_smooth,
    run_filter,
    update,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
