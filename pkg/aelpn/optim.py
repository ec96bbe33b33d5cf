"""Adam with projection onto nonnegative z-path weights"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .icnn import IcnnParams, project_weights


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators per parameter and the step count"""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: IcnnParams, **hyper) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in params.arrays.items()},
            v={name: np.zeros_like(arr) for name, arr in params.arrays.items()},
            **hyper,
        )


def adam_step(
    params: IcnnParams,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> Tuple[IcnnParams, AdamState]:
    """
    One bias-corrected Adam update followed by project_weights

    Args:
        params: Current parameters
        grads: Gradient per parameter name
        state: Moments from the previous step (AdamState.init for the first)
        lr: Learning rate

    Returns:
        (updated parameters, updated state); the inputs are not modified
    """
    if not lr > 0:
        raise ConfigError(f"Learning rate must be positive, got {lr}")
    if set(grads) != set(params.arrays):
        raise ShapeError(f"Gradients for {sorted(grads)} do not match parameters {sorted(params.arrays)}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m, v, updated = {}, {}, {}
    for name, theta in params.arrays.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != theta.shape:
            raise ShapeError(f"Gradient for {name} has shape {g.shape}, expected {theta.shape}")
        m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m[name] / (1.0 - b1**t)
        v_hat = v[name] / (1.0 - b2**t)
        updated[name] = theta - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, b1, b2, state.eps)
    return project_weights(params.replace(updated)), new_state
