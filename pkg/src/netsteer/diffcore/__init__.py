"""Numeric foundation: tensors, reverse-mode gradients, ODE integration."""

from .ode import (
    EVAL_CONFIG,
    TRAIN_CONFIG,
    DivergenceError,
    OdeSolverConfig,
    integrate_ode,
)
from .optim import Adam
from .tensor import (
    ContractViolation,
    NumericFault,
    Tensor,
    absolute,
    add,
    check_gradient,
    clamp_max,
    div,
    exp,
    grad,
    log,
    matmul,
    maximum,
    minimum,
    mul,
    neg,
    power,
    reduce_sum,
    sigmoid,
    softplus,
    sub,
    tanh,
    transpose,
    val,
)

__all__ = [
    "Tensor",
    "ContractViolation",
    "NumericFault",
    "DivergenceError",
    "OdeSolverConfig",
    "TRAIN_CONFIG",
    "EVAL_CONFIG",
    "integrate_ode",
    "Adam",
    "grad",
    "check_gradient",
    "val",
    "add",
    "sub",
    "neg",
    "mul",
    "div",
    "matmul",
    "power",
    "exp",
    "log",
    "tanh",
    "sigmoid",
    "softplus",
    "reduce_sum",
    "maximum",
    "minimum",
    "absolute",
    "clamp_max",
    "transpose",
]
