"""
Denoising losses

Each loss compares a batch of estimates x_hat = f_theta(y) with the clean
signals x and averages over the batch. The same definitions exist twice: as
numpy functions for reporting, and as tape graphs (``LossSpec.graph``) for
parameter gradients.

Proximal matching:

    d_gamma(x_hat, x) = 1 - (pi gamma^2)^(-n/2) exp(-||x_hat - x||^2 / gamma^2)

The normalising factor is applied in log space. ``normalized=False`` drops it,
giving 1 - exp(-||x_hat - x||^2 / gamma^2); for a fixed gamma the two differ by
a positive affine map of the loss value and share their minimisers.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .diff.engine import Var, absolute, exp, mul, squared_norm, sub, total
from .errors import ConfigError, ShapeError


class LossKind(str, Enum):
    """Supported denoising losses"""
    L1 = "l1"
    L2 = "l2"
    PROX_MATCHING = "prox_matching"


def _log_normalizer(n: int, gamma: float) -> float:
    return -0.5 * n * math.log(math.pi * gamma**2)


def _check_gamma(gamma: Optional[float]) -> float:
    if gamma is None or not gamma > 0:
        raise ConfigError(f"Proximal matching needs gamma > 0, got {gamma}")
    return float(gamma)


def _pair(x_hat, x):
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x_hat.shape != x.shape:
        raise ShapeError(f"Estimate and target differ in shape: {x_hat.shape} vs {x.shape}")
    return x_hat, x


def l1_loss(x_hat, x) -> float:
    """Mean absolute error over entries"""
    x_hat, x = _pair(x_hat, x)
    return float(np.mean(np.abs(x_hat - x)))


def l2_loss(x_hat, x) -> float:
    """Half mean squared error over entries"""
    x_hat, x = _pair(x_hat, x)
    return float(0.5 * np.mean((x_hat - x) ** 2))


def prox_matching_loss(x_hat, x, gamma: float, normalized: bool = True) -> float:
    """Proximal matching loss, averaged over the rows of a batch"""
    gamma = _check_gamma(gamma)
    x_hat, x = _pair(x_hat, x)
    n = x.shape[-1]
    log_c = _log_normalizer(n, gamma) if normalized else 0.0
    r2 = np.sum((x_hat - x) ** 2, axis=-1)
    return float(np.mean(1.0 - np.exp(log_c - r2 / gamma**2)))


@dataclass(frozen=True)
class LossSpec:
    """A loss kind plus its hyperparameters"""
    kind: LossKind
    gamma: Optional[float] = None
    normalized: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", LossKind(self.kind))
        except ValueError as e:
            raise ConfigError(f"Unknown loss: {self.kind!r}") from e
        if self.kind is LossKind.PROX_MATCHING:
            _check_gamma(self.gamma)

    def __call__(self, x_hat, x) -> float:
        if self.kind is LossKind.L1:
            return l1_loss(x_hat, x)
        if self.kind is LossKind.L2:
            return l2_loss(x_hat, x)
        return prox_matching_loss(x_hat, x, self.gamma, self.normalized)

    def graph(self, x_hat: Var, x: Var) -> Var:
        """Build the mean batch loss on the tape"""
        if x_hat.shape != x.shape:
            raise ShapeError(f"Estimate and target differ in shape: {x_hat.shape} vs {x.shape}")
        residual = sub(x_hat, x)
        count = float(np.prod(x.shape))
        if self.kind is LossKind.L1:
            return mul(total(absolute(residual)), 1.0 / count)
        if self.kind is LossKind.L2:
            return mul(total(mul(residual, residual)), 0.5 / count)
        batch, n = x.shape
        log_c = _log_normalizer(n, self.gamma) if self.normalized else 0.0
        scaled = sub(log_c, mul(squared_norm(residual), 1.0 / self.gamma**2))
        return sub(1.0, mul(total(exp(scaled)), 1.0 / batch))


def as_loss(loss: Union[LossSpec, LossKind, str]) -> LossSpec:
    """Accept a LossSpec or the name of a gamma-free loss"""
    if isinstance(loss, LossSpec):
        return loss
    try:
        kind = LossKind(loss)
    except ValueError as e:
        raise ConfigError(f"Unknown loss: {loss!r}") from e
    return LossSpec(kind)
