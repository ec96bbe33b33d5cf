"""
Core signal math

Vector operations on signals, the scalar-affine group action, PSNR, seeded
random streams, and the split normal distribution with its closed-form prox.
"""

from .rng import Rng, as_rng
from .signal import (
    PSNR_CAP_DB,
    affine_transform,
    as_signal,
    center,
    gaussian_corrupt,
    mean_project,
    mse,
    psnr,
    psnr_batch,
)
from .splitnormal import (
    SplitNormalParams,
    split_normal_neglogpdf,
    split_normal_prox_oracle,
    split_normal_sample,
)

__all__ = [
    "Rng",
    "as_rng",
    "PSNR_CAP_DB",
    "as_signal",
    "mean_project",
    "center",
    "affine_transform",
    "mse",
    "psnr",
    "psnr_batch",
    "gaussian_corrupt",
    "SplitNormalParams",
    "split_normal_sample",
    "split_normal_prox_oracle",
    "split_normal_neglogpdf",
]
