"""Minimal dense-tensor engine with reverse-mode gradients."""

from . import functional
from .checkpoint import CheckpointError, VersionMismatchError, load_checkpoint, save_checkpoint
from .functional import activation, conv2d, dropout, linear, normalize, pool
from .gradcheck import GradCheckResult, check_gradients, projected
from .nn import BatchNorm, Conv2d, Dropout, LayerNorm, Linear, Module, count_parameters, parameter
from .optim import SGD, Adam, MissingGradientError, StepDecay, make_optimizer
from .tensor import (
    ConfigurationError,
    DimensionError,
    NonFiniteError,
    NumericsError,
    TapeError,
    Tensor,
    checked,
    concat,
    default_dtype,
    get_default_dtype,
    mse,
    no_grad,
    relu,
    set_default_dtype,
    sigmoid,
    softmax,
    stack,
)

__all__ = [
    "Adam",
    "BatchNorm",
    "CheckpointError",
    "ConfigurationError",
    "Conv2d",
    "DimensionError",
    "Dropout",
    "GradCheckResult",
    "LayerNorm",
    "Linear",
    "MissingGradientError",
    "Module",
    "NonFiniteError",
    "NumericsError",
    "SGD",
    "StepDecay",
    "TapeError",
    "Tensor",
    "VersionMismatchError",
    "activation",
    "check_gradients",
    "checked",
    "concat",
    "conv2d",
    "count_parameters",
    "default_dtype",
    "dropout",
    "functional",
    "get_default_dtype",
    "linear",
    "load_checkpoint",
    "make_optimizer",
    "mse",
    "no_grad",
    "normalize",
    "parameter",
    "pool",
    "projected",
    "relu",
    "save_checkpoint",
    "set_default_dtype",
    "sigmoid",
    "softmax",
    "stack",
]
