"""Two-step sieve estimation of outcome equations under multi-category sample selection."""

__version__ = "0.1.0"

from .basis import KnotVector, SieveSpec, basis_matrix, bspline_row, place_knots, tensor_row
from .decompose import GroupStats, decompose
from .first_stage import (
    MnlFit,
    OrderedFit,
    ThresholdFit,
    elementary_symmetric,
    fit_mnl,
    fit_ordered,
    fit_thresholds,
    inclusive_value,
    predict_probs,
    rearrange,
    truncated_correction,
)
from .kernels import BACKEND
from .second_stage import ControlSpec, FitResult, build_controls, fit_outcome
from .simulate import generate, generate_multinomial, generate_ordered, oracle_controls
from .study import MetricsTable, SimConfig, bootstrap_se, run_study

__all__ = [
    "BACKEND", "ControlSpec", "FitResult", "GroupStats", "KnotVector", "MetricsTable",
    "MnlFit", "OrderedFit", "SieveSpec", "SimConfig", "ThresholdFit", "basis_matrix",
    "bootstrap_se", "bspline_row", "build_controls", "decompose", "elementary_symmetric",
    "fit_mnl", "fit_ordered", "fit_outcome", "fit_thresholds", "generate",
    "generate_multinomial", "generate_ordered", "inclusive_value", "oracle_controls",
    "place_knots", "predict_probs", "rearrange", "run_study", "tensor_row",
    "truncated_correction",
]
