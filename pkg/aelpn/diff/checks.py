"""
Finite-difference gradient checks

Central differences against analytic gradients, reported as the largest
relative error ``|analytic - numeric| / max(1, |analytic|)`` together with
the coordinate where it occurs.
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Mapping, Tuple

import numpy as np

from ..errors import ConfigError
from .programs import Batch, Program, batch_loss, loss_parameter_gradient


@dataclass
class GradCheckReport:
    """Outcome of a finite-difference comparison"""
    max_rel_error: float
    worst_index: Any
    analytic: np.ndarray
    numeric: np.ndarray

    def passed(self, tol: float) -> bool:
        return self.max_rel_error <= tol

    def __repr__(self) -> str:
        return f"GradCheckReport(max_rel_error={self.max_rel_error:.3e}, worst_index={self.worst_index})"


def _relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))


def finite_difference_check(
    fun: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    point,
    step: float = 1e-5,
) -> GradCheckReport:
    """
    Compare the gradient returned by ``fun`` with central differences of its value

    Args:
        fun: Maps a point to (value, gradient)
        point: Where to check
        step: Central-difference step

    Returns:
        GradCheckReport; worst_index is the flat coordinate index
    """
    if not step > 0:
        raise ConfigError(f"Finite-difference step must be positive, got {step}")
    x0 = np.array(point, dtype=np.float64)
    _, analytic = fun(x0)
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    numeric = np.empty_like(analytic)
    flat = x0.reshape(-1)
    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += step
        down[i] -= step
        f_up, _ = fun(up.reshape(x0.shape))
        f_down, _ = fun(down.reshape(x0.shape))
        numeric[i] = (f_up - f_down) / (2.0 * step)
    errors = _relative_errors(analytic, numeric)
    worst = int(np.argmax(errors))
    return GradCheckReport(float(errors[worst]), worst, analytic, numeric)


def parameter_gradient_check(
    program: Program,
    theta: Mapping[str, np.ndarray],
    batch: Batch,
    loss,
    step: float = 1e-6,
) -> GradCheckReport:
    """
    Check loss_parameter_gradient against per-parameter central differences

    worst_index is a (parameter name, flat index) pair.
    """
    if not step > 0:
        raise ConfigError(f"Finite-difference step must be positive, got {step}")
    result = loss_parameter_gradient(program, theta, batch, loss)
    analytic_parts, numeric_parts, labels = [], [], []
    for name, value in theta.items():
        flat = np.array(value, dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            shifted: Dict[str, np.ndarray] = dict(theta)
            up, down = flat.copy(), flat.copy()
            up[i] += step
            down[i] -= step
            shifted[name] = up.reshape(np.shape(value))
            f_up = batch_loss(program, shifted, batch, loss)
            shifted[name] = down.reshape(np.shape(value))
            f_down = batch_loss(program, shifted, batch, loss)
            numeric_parts.append((f_up - f_down) / (2.0 * step))
            labels.append((name, i))
        analytic_parts.append(np.asarray(result.grads[name]).reshape(-1))
    analytic = np.concatenate(analytic_parts) if analytic_parts else np.zeros(0)
    numeric = np.asarray(numeric_parts, dtype=np.float64)
    if analytic.size == 0:
        return GradCheckReport(0.0, None, analytic, numeric)
    errors = _relative_errors(analytic, numeric)
    worst = int(np.argmax(errors))
    return GradCheckReport(float(errors[worst]), labels[worst], analytic, numeric)
