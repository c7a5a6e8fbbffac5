"""Stochastic gradient methods for smooth loss + non-smooth non-convex regularizer.

Two solvers are provided: a mini-batch method (``mbsga_run``) for general
stochastic objectives and a variance-reduced method (``vrsga_run``) for
finite sums. Both step along the gradient of a smooth majorant of
``f + e_lambda g`` built from the proximal point of the regularizer.
"""

from .data import SparseDataset, parse_libsvm, parse_mnist_idx, load_dataset
from .losses import ErmObjective, lorenz_value, lorenz_deriv, dc_parts
from .regularizers import LogSumRegularizer, ProxResult
from .envelope import (
    EnvelopeAnchor,
    make_anchor,
    envelope_majorant_value,
    envelope_gradient,
    aux_objective,
    stationarity_bound,
)
from .optimizers import (
    DivergenceError,
    MbsgaConfig,
    VrsgaConfig,
    RunTrace,
    mbsga_derive_params,
    mbsga_run,
    vrsga_run,
    estimate_sigma,
    variance_bound_check,
)

__version__ = "0.1.0"

__all__ = [
    "SparseDataset", "parse_libsvm", "parse_mnist_idx", "load_dataset",
    "ErmObjective", "lorenz_value", "lorenz_deriv", "dc_parts",
    "LogSumRegularizer", "ProxResult",
    "EnvelopeAnchor", "make_anchor", "envelope_majorant_value",
    "envelope_gradient", "aux_objective", "stationarity_bound",
    "DivergenceError", "MbsgaConfig", "VrsgaConfig", "RunTrace",
    "mbsga_derive_params", "mbsga_run", "vrsga_run", "estimate_sigma",
    "variance_bound_check",
]
