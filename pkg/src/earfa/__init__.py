"""Entropy-attention super-resolution toolkit on a minimal NumPy autograd core."""

import os as _os

# Cap internal parallelism before NumPy (and its BLAS) initializes.
_threads = _os.environ.get("EARFA_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from . import blocks, data, entropy, metrics, ops, training, weights
from .errors import (ConfigError, DimensionError, EarfaError, NumericError,
                     UsageError, ValidationError, WeightLoadError)
from .model import (EARFA, ModelConfig, count_multiadds, count_params,
                    geometric_self_ensemble, load_config, receptive_field_radius,
                    slka_receptive_field, super_resolve)
from .tensor import Tensor, no_grad

__version__ = "0.1.0"

__all__ = [
    "EARFA", "ModelConfig", "Tensor", "no_grad",
    "count_params", "count_multiadds", "super_resolve",
    "geometric_self_ensemble", "load_config",
    "receptive_field_radius", "slka_receptive_field",
    "blocks", "data", "entropy", "metrics", "ops", "training", "weights",
    "EarfaError", "DimensionError", "ConfigError", "ValidationError",
    "UsageError", "WeightLoadError", "NumericError",
]
