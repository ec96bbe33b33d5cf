"""
Signal arithmetic

A signal is a 1-D array of 64-bit reals. Every function here also accepts a
stack of signals shaped ``(batch, n)`` and acts row by row, which is how the
training loop and the audits evaluate many signals at once.
"""

import numpy as np

from ..errors import ConfigError, ShapeError
from .rng import Rng

# Reported when two signals are identical
PSNR_CAP_DB = 200.0


def as_signal(x) -> np.ndarray:
    """Convert to a float64 signal (or stack of signals), rejecting NaN/Inf"""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 2 or arr.shape[-1] < 1:
        raise ShapeError(f"Expected a signal or a stack of signals, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("Signal contains NaN or infinite entries")
    return arr


def mean_project(x) -> np.ndarray:
    """Px with P = (1/n) 1 1^T: every entry replaced by the signal mean"""
    x = as_signal(x)
    return np.broadcast_to(x.mean(axis=-1, keepdims=True), x.shape).copy()


def center(x) -> np.ndarray:
    """(I - P)x: the mean-free part of the signal"""
    x = as_signal(x)
    return x - x.mean(axis=-1, keepdims=True)


def affine_transform(x, a: float, b: float) -> np.ndarray:
    """Group action g(x) = a x + b 1 for a > 0"""
    if not a > 0:
        raise ConfigError(f"Scale must be positive, got {a}")
    return as_signal(x) * a + b


def mse(x, y) -> np.ndarray:
    x, y = as_signal(x), as_signal(y)
    if x.shape != y.shape:
        raise ShapeError(f"Signal shapes differ: {x.shape} vs {y.shape}")
    return np.mean((x - y) ** 2, axis=-1)


def psnr_batch(x, y, peak: float = 1.0) -> np.ndarray:
    """Row-wise PSNR in dB, capped at PSNR_CAP_DB"""
    if not peak > 0:
        raise ConfigError(f"Peak must be positive, got {peak}")
    err = np.atleast_1d(mse(x, y))
    out = np.full(err.shape, PSNR_CAP_DB)
    nonzero = err > 0
    out[nonzero] = np.minimum(10.0 * np.log10(peak**2 / err[nonzero]), PSNR_CAP_DB)
    return out


def psnr(x, y, peak: float = 1.0) -> float:
    """
    Peak signal-to-noise ratio 10 log10(peak^2 / MSE)

    Identical signals give PSNR_CAP_DB, which also bounds every other value.
    """
    x, y = as_signal(x), as_signal(y)
    if x.shape != y.shape:
        raise ShapeError(f"Signal shapes differ: {x.shape} vs {y.shape}")
    return float(psnr_batch(x.reshape(1, -1), y.reshape(1, -1), peak)[0])


def gaussian_corrupt(x, sigma: float, rng: Rng) -> np.ndarray:
    """y = x + sigma z with z ~ N(0, I), one draw per entry"""
    if not (np.isfinite(sigma) and sigma >= 0):
        raise ConfigError(f"Noise level must be a nonnegative number, got {sigma}")
    x = as_signal(x)
    z = rng.normal(x.shape)
    return x + sigma * z
