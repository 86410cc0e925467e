"""Continuous-time system identification with state-variable filters.

The package covers the full loop: simulate a noisy closed-loop plant exactly
on a fine grid, decimate to a sampling interval h, identify a continuous
model by filtered least squares (with a discrete ARX baseline for contrast),
and score the result with the nu-gap metric and parameter-error statistics
whose variance shrinks like O(h) as sampling accelerates.
"""

from .lti import (
    DiscreteStateSpace,
    MatrixFraction,
    Polynomial,
    RationalTransfer,
    StateSpace,
    c2d_zoh,
    closed_loop_assemble,
    frequency_response,
    h2_norm_ct,
    h2_norm_dt,
    realize,
    rhp_pole_count,
    tf,
)
from .simulate import (
    ExcitationSpec,
    FineRecord,
    NoiseSpec,
    SampledRecord,
    SimulationConfig,
    decimate,
    simulate_closed_loop,
    square_wave,
)
from .svf import (
    Estimate,
    FilterBank,
    InsufficientExcitationError,
    RegressionData,
    SvfFilter,
    build_filter_bank,
    filtered_derivatives,
    identify_svf,
    model_from_theta,
    pack_theta,
    solve_ls,
)
from .arx import ArxModel, arx_frequency_response, fit_arx
from .metrics import (
    FrequencyGrid,
    GapResult,
    chordal_distance,
    loglog_slope,
    normalized_param_error,
    nu_gap,
)
from .presets import make_filter, preset_catalog

__version__ = "0.1.0"

__all__ = [
    "ArxModel",
    "DiscreteStateSpace",
    "Estimate",
    "ExcitationSpec",
    "FilterBank",
    "FineRecord",
    "FrequencyGrid",
    "GapResult",
    "InsufficientExcitationError",
    "MatrixFraction",
    "NoiseSpec",
    "Polynomial",
    "RationalTransfer",
    "RegressionData",
    "SampledRecord",
    "SimulationConfig",
    "StateSpace",
    "SvfFilter",
    "arx_frequency_response",
    "build_filter_bank",
    "c2d_zoh",
    "chordal_distance",
    "closed_loop_assemble",
    "decimate",
    "filtered_derivatives",
    "fit_arx",
    "frequency_response",
    "h2_norm_ct",
    "h2_norm_dt",
    "identify_svf",
    "loglog_slope",
    "make_filter",
    "model_from_theta",
    "normalized_param_error",
    "nu_gap",
    "pack_theta",
    "preset_catalog",
    "realize",
    "rhp_pole_count",
    "simulate_closed_loop",
    "solve_ls",
    "square_wave",
    "tf",
]
