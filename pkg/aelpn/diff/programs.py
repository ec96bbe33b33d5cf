"""
Potentials as programs

A *program* is a callable ``program(theta, x) -> psi`` that builds the
potential on the tape from a mapping of named parameter Vars and a batch of
inputs ``x`` shaped ``(batch, n)``, returning one value per row. ICNN
potentials and their equivariant wrappers are programs; so are the small
closed-form potentials used in tests.
"""

from typing import Callable, Dict, Mapping, NamedTuple, Sequence, Tuple, Union

import numpy as np

from ..core.signal import as_signal
from ..errors import ConfigError, ShapeError
from .engine import Var, const, grad, recording, total, variable

Program = Callable[[Mapping[str, Var], Var], Var]
Batch = Tuple[np.ndarray, np.ndarray]


class LossGradient(NamedTuple):
    """Mean batch loss and its gradient with respect to every parameter"""
    value: float
    grads: Dict[str, np.ndarray]


def stack_pairs(pairs: Sequence[Tuple[np.ndarray, np.ndarray]]) -> Batch:
    """Turn a list of (y, x) signal pairs into stacked (Y, X) arrays"""
    if not pairs:
        raise ConfigError("Batch must contain at least one (y, x) pair")
    ys = np.stack([as_signal(y) for y, _ in pairs])
    xs = np.stack([as_signal(x) for _, x in pairs])
    return ys, xs


def _check_batch(batch: Batch) -> Batch:
    y, x = (np.atleast_2d(as_signal(a)) for a in batch)
    if y.shape != x.shape:
        raise ShapeError(f"Noisy and clean batches differ in shape: {y.shape} vs {x.shape}")
    if y.shape[0] == 0:
        raise ConfigError("Batch must contain at least one (y, x) pair")
    return y, x


def _constants(theta: Mapping[str, np.ndarray]) -> Dict[str, Var]:
    return {name: const(value) for name, value in theta.items()}


def potential_and_gradient(
    program: Program, theta: Mapping[str, np.ndarray], x
) -> Tuple[Union[float, np.ndarray], np.ndarray]:
    """
    Evaluate psi_theta(x) and its exact input gradient

    Args:
        program: Potential program
        theta: Named parameter arrays
        x: One signal of shape (n,) or a stack of shape (batch, n)

    Returns:
        (value, gradient); for a stack, values has shape (batch,) and the
        gradient shape (batch, n)
    """
    arr = as_signal(x)
    single = arr.ndim == 1
    with recording(True):
        xv = variable(np.atleast_2d(arr))
        psi = program(_constants(theta), xv)
        (g,) = grad(total(psi), [xv])
    values = psi.value.reshape(-1)
    if single:
        return float(values[0]), g.value[0]
    return values, g.value


def _resolve_loss(loss):
    from ..losses import as_loss

    return as_loss(loss)


def loss_parameter_gradient(
    program: Program, theta: Mapping[str, np.ndarray], batch: Batch, loss
) -> LossGradient:
    """
    Gradient of the mean batch loss d(grad_x psi_theta(y), x) with respect to theta

    The input gradient is built with a recorded backward sweep, then the loss
    on top of it is differentiated with respect to the parameters.

    Args:
        program: Potential program
        theta: Named parameter arrays
        batch: (Y, X) noisy and clean signals, each shaped (batch, n)
        loss: A LossSpec or loss name ("l1", "l2")

    Returns:
        LossGradient with the loss value and one gradient array per parameter
    """
    spec = _resolve_loss(loss)
    y, x = _check_batch(batch)
    with recording(True):
        params = {name: variable(value) for name, value in theta.items()}
        yv = variable(y)
        psi = program(params, yv)
        (x_hat,) = grad(total(psi), [yv], create_graph=True)
        value = spec.graph(x_hat, const(x))
        names = list(params)
        grads = grad(value, [params[name] for name in names])
    return LossGradient(value.item(), {name: g.value for name, g in zip(names, grads)})


def batch_loss(program: Program, theta: Mapping[str, np.ndarray], batch: Batch, loss) -> float:
    """Mean batch loss without parameter gradients"""
    spec = _resolve_loss(loss)
    y, x = _check_batch(batch)
    _, x_hat = potential_and_gradient(program, theta, y)
    return spec(x_hat, x)
