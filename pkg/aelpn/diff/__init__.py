"""
Differentiation engine

Tape-based reverse mode over numpy arrays with differentiable backward
sweeps, the potential/gradient evaluators built on it, and finite-difference
checks.
"""

from .checks import GradCheckReport, finite_difference_check, parameter_gradient_check
from .engine import (
    Var,
    const,
    grad,
    no_grad,
    pairwise_max,
    rectify_square,
    recording,
    relu,
    softplus,
    sortpool,
    variable,
)
from .programs import (
    Batch,
    LossGradient,
    Program,
    batch_loss,
    loss_parameter_gradient,
    potential_and_gradient,
    stack_pairs,
)

__all__ = [
    "Var",
    "const",
    "variable",
    "grad",
    "recording",
    "no_grad",
    "pairwise_max",
    "sortpool",
    "softplus",
    "relu",
    "rectify_square",
    "Program",
    "Batch",
    "LossGradient",
    "potential_and_gradient",
    "loss_parameter_gradient",
    "batch_loss",
    "stack_pairs",
    "GradCheckReport",
    "finite_difference_check",
    "parameter_gradient_check",
]
