"""
Split normal distribution

A two-sided Gaussian with scale sigma1 left of the mode mu and sigma2 right of
it. Its negative log-density is piecewise quadratic, so the proximal operator
of -lambda log p is piecewise linear and known in closed form; that oracle is
the ground truth for the one-dimensional experiments.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError
from .rng import Rng

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class SplitNormalParams:
    """Location mu and left/right scales sigma1, sigma2"""
    mu: float = 0.0
    sigma1: float = 1.0
    sigma2: float = 2.0

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ConfigError(
                f"Split normal scales must be positive, got {self.sigma1}, {self.sigma2}"
            )

    @property
    def left_mass(self) -> float:
        return self.sigma1 / (self.sigma1 + self.sigma2)


def split_normal_sample(
    p: SplitNormalParams, rng: Rng, size: Optional[Union[int, Tuple[int, ...]]] = None
) -> ArrayLike:
    """
    Draw from the split normal

    Picks the left branch with probability sigma1 / (sigma1 + sigma2), then
    places a half-normal draw on that side of mu.
    """
    left = rng.uniform(size=size) < p.left_mass
    magnitude = np.abs(rng.normal(size))
    draw = np.where(left, p.mu - p.sigma1 * magnitude, p.mu + p.sigma2 * magnitude)
    return float(draw) if size is None else draw


def split_normal_prox_oracle(x: ArrayLike, lam: float, p: SplitNormalParams) -> ArrayLike:
    """prox of -lam log p: (lam mu + sigma_i^2 x) / (lam + sigma_i^2) on each side of mu"""
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    x_arr = np.asarray(x, dtype=np.float64)
    s2 = np.where(x_arr < p.mu, p.sigma1**2, p.sigma2**2)
    out = (lam * p.mu + s2 * x_arr) / (lam + s2)
    return float(out) if out.ndim == 0 else out


def split_normal_neglogpdf(x: ArrayLike, p: SplitNormalParams) -> ArrayLike:
    """-log p(x) for the split normal density"""
    x_arr = np.asarray(x, dtype=np.float64)
    s = np.where(x_arr < p.mu, p.sigma1, p.sigma2)
    log_norm = 0.5 * math.log(2.0 / math.pi) - math.log(p.sigma1 + p.sigma2)
    out = (x_arr - p.mu) ** 2 / (2.0 * s**2) - log_norm
    return float(out) if out.ndim == 0 else out
