"""
AE-LPN: Affine-Equivariant Learned Proximal Networks

Learned proximal operators that are gradients of convex potentials and
commute with x -> a x + b 1 for every a > 0.
"""

__version__ = "0.1.0"

from .analysis import (
    AuditReport,
    InversionSettings,
    invert_prox,
    regularizer_eval,
    solve_inverse,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import (
    AelpnError,
    CheckpointError,
    ConfigError,
    DataFormatError,
    IncompatibleVariantError,
    InversionError,
    NonFiniteLossError,
    NumericalError,
    ShapeError,
)
from .icnn import Activation, IcnnConfig, IcnnParams
from .losses import LossKind, LossSpec, prox_matching_loss
from .potential import (
    PotentialVariant,
    ProxModel,
    VariantKind,
    build_model,
    potential_value,
    prox_apply,
)
from .training import TrainConfig, TrainHistory, train

__all__ = [
    # Models
    "Activation",
    "IcnnConfig",
    "IcnnParams",
    "PotentialVariant",
    "ProxModel",
    "VariantKind",
    "build_model",
    "potential_value",
    "prox_apply",
    # Training
    "LossKind",
    "LossSpec",
    "prox_matching_loss",
    "TrainConfig",
    "TrainHistory",
    "train",
    # Analysis
    "AuditReport",
    "InversionSettings",
    "invert_prox",
    "regularizer_eval",
    "solve_inverse",
    # Persistence
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    # Errors
    "AelpnError",
    "ConfigError",
    "IncompatibleVariantError",
    "ShapeError",
    "NumericalError",
    "NonFiniteLossError",
    "InversionError",
    "DataFormatError",
    "CheckpointError",
]
