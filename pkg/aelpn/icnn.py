"""
Input-convex neural potentials

Layer recurrence, for hidden layers k = 0 .. L-1:

    z_1     = act(Wx_0 x + b_0)
    z_{k+1} = act(Wz_k z_k + Wx_k x + b_k)

followed by a scalar head Psi = Wz_out z_L + Wx_out x + b_out. Convexity in x
holds because every Wz is entrywise nonnegative and the activation is convex
and nondecreasing. Two presets matter:

- plain: softplus activation, biases, bare scalar head.
- equivariant: no biases anywhere, 1-homogeneous pairing activation
  (pairwise max by default, sortpool behind a flag), so Psi(a x) = a Psi(x)
  for a > 0; the head is then rectified and squared, h = max(Psi, 0)^2,
  which is convex and homogeneous of degree two.

The sortpool activation keeps the min of each pair as a channel. The min is
concave, so convexity under sortpool is not guaranteed and is audited
empirically instead.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from .core.rng import Rng
from .core.signal import as_signal
from .diff.engine import (
    Var,
    add,
    const,
    matmul,
    no_grad,
    pair_mask,
    pairwise_max as _pairwise_max,
    rectify_square,
    softplus,
    sortpool as _sortpool,
    transpose,
)
from .errors import ConfigError, ShapeError


class Activation(str, Enum):
    """Hidden-layer activations"""
    SOFTPLUS = "softplus"
    PAIRWISE_MAX = "pairwise-max"
    SORTPOOL = "sortpool"

    @property
    def pairs(self) -> bool:
        return self is not Activation.SOFTPLUS


@dataclass(frozen=True)
class IcnnConfig:
    """Architecture of a fully connected ICNN"""
    input_dim: int
    hidden_widths: Tuple[int, ...]
    activation: Activation = Activation.SOFTPLUS
    softplus_beta: float = 1.0
    use_bias: bool = True
    x_skip: bool = True
    final_rectify_square: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        try:
            object.__setattr__(self, "activation", Activation(self.activation))
        except ValueError as e:
            raise ConfigError(f"Unknown activation: {self.activation!r}") from e
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if not self.hidden_widths:
            raise ConfigError("An ICNN needs at least one hidden layer")
        for width in self.hidden_widths:
            if width < 1:
                raise ConfigError(f"Hidden widths must be positive, got {self.hidden_widths}")
            if self.activation.pairs and width % 2:
                raise ConfigError(
                    f"Activation {self.activation.value} pairs adjacent units; "
                    f"width {width} is odd"
                )
        if not self.softplus_beta > 0:
            raise ConfigError(f"softplus_beta must be positive, got {self.softplus_beta}")

    @classmethod
    def plain(cls, input_dim: int, hidden_widths, softplus_beta: float = 1.0) -> "IcnnConfig":
        """Preset of the plain LPN: softplus, biases, bare scalar output"""
        return cls(
            input_dim=input_dim,
            hidden_widths=tuple(hidden_widths),
            activation=Activation.SOFTPLUS,
            softplus_beta=softplus_beta,
            use_bias=True,
            x_skip=True,
            final_rectify_square=False,
        )

    @classmethod
    def equivariant(
        cls, input_dim: int, hidden_widths, activation: Activation = Activation.PAIRWISE_MAX
    ) -> "IcnnConfig":
        """Bias-free, 1-homogeneous preset with a rectified, squared output"""
        activation = Activation(activation)
        if not activation.pairs:
            raise ConfigError("The equivariant preset needs a pairing activation")
        return cls(
            input_dim=input_dim,
            hidden_widths=tuple(hidden_widths),
            activation=activation,
            use_bias=False,
            x_skip=True,
            final_rectify_square=True,
        )

    @property
    def is_homogeneous(self) -> bool:
        """True when h = max(Psi, 0)^2 is 2-homogeneous by construction"""
        return not self.use_bias and self.activation.pairs and self.final_rectify_square

    def state_width(self, k: int) -> int:
        """Width of z_{k+1}, the output of hidden layer k"""
        width = self.hidden_widths[k]
        return width // 2 if self.activation is Activation.PAIRWISE_MAX else width

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """Names and shapes of every parameter, in evaluation order"""
        shapes: Dict[str, Tuple[int, ...]] = {}
        for k, width in enumerate(self.hidden_widths):
            if k > 0:
                shapes[f"wz.{k}"] = (width, self.state_width(k - 1))
            if k == 0 or self.x_skip:
                shapes[f"wx.{k}"] = (width, self.input_dim)
            if self.use_bias:
                shapes[f"b.{k}"] = (width,)
        last = self.state_width(len(self.hidden_widths) - 1)
        shapes["wz.out"] = (1, last)
        if self.x_skip:
            shapes["wx.out"] = (1, self.input_dim)
        if self.use_bias:
            shapes["b.out"] = (1,)
        return shapes

    def to_dict(self) -> Dict:
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "activation": self.activation.value,
            "softplus_beta": self.softplus_beta,
            "use_bias": self.use_bias,
            "x_skip": self.x_skip,
            "final_rectify_square": self.final_rectify_square,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "IcnnConfig":
        return cls(
            input_dim=int(data["input_dim"]),
            hidden_widths=tuple(data["hidden_widths"]),
            activation=Activation(data.get("activation", Activation.SOFTPLUS)),
            softplus_beta=float(data.get("softplus_beta", 1.0)),
            use_bias=bool(data.get("use_bias", True)),
            x_skip=bool(data.get("x_skip", True)),
            final_rectify_square=bool(data.get("final_rectify_square", False)),
        )


def is_z_path(name: str) -> bool:
    """Hidden-to-hidden weights, the ones constrained to be nonnegative"""
    return name.startswith("wz.")


@dataclass
class IcnnParams:
    """Named parameter arrays (theta) for one IcnnConfig"""
    config: IcnnConfig
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        expected = self.config.parameter_shapes()
        if list(self.arrays) != list(expected):
            raise ShapeError(
                f"Parameter names {list(self.arrays)} do not match config {list(expected)}"
            )
        for name, shape in expected.items():
            arr = np.asarray(self.arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError(f"Parameter {name} has shape {arr.shape}, expected {shape}")
            self.arrays[name] = arr

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def replace(self, arrays: Mapping[str, np.ndarray]) -> "IcnnParams":
        """Copy with some arrays substituted"""
        merged = {name: np.array(arrays.get(name, value)) for name, value in self.arrays.items()}
        return IcnnParams(self.config, merged)

    def z_path_names(self) -> List[str]:
        return [name for name in self.arrays if is_z_path(name)]

    def min_z_weight(self) -> float:
        return min(float(self.arrays[name].min()) for name in self.z_path_names())

    @property
    def size(self) -> int:
        return int(sum(arr.size for arr in self.arrays.values()))


def init(config: IcnnConfig, rng: Rng) -> IcnnParams:
    """
    Random initialisation

    Wx ~ U(-s, s) with s = 1/sqrt(fan_in); Wz ~ U(0, 2/fan_in), nonnegative by
    construction; biases start at zero.
    """
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in config.parameter_shapes().items():
        fan_in = shape[1] if len(shape) == 2 else 1
        if name.startswith("b."):
            arrays[name] = np.zeros(shape)
        elif is_z_path(name):
            arrays[name] = rng.uniform(0.0, 2.0 / fan_in, shape)
        else:
            bound = 1.0 / math.sqrt(fan_in)
            arrays[name] = rng.uniform(-bound, bound, shape)
    return IcnnParams(config, arrays)


def zeros(config: IcnnConfig) -> IcnnParams:
    """All-zero parameters"""
    return IcnnParams(config, {n: np.zeros(s) for n, s in config.parameter_shapes().items()})


def project_weights(params: IcnnParams) -> IcnnParams:
    """Clamp every z-path weight at zero; all other parameters untouched"""
    return IcnnParams(
        params.config,
        {
            name: np.maximum(arr, 0.0) if is_z_path(name) else arr.copy()
            for name, arr in params.arrays.items()
        },
    )


def _activate(config: IcnnConfig, pre: Var) -> Var:
    if config.activation is Activation.SOFTPLUS:
        return softplus(pre, config.softplus_beta)
    if config.activation is Activation.PAIRWISE_MAX:
        return _pairwise_max(pre)
    return _sortpool(pre)


def _affine(inputs: Var, weight: Var) -> Var:
    return matmul(inputs, transpose(weight))


def _hidden_layers(config: IcnnConfig, theta: Mapping[str, Var], x: Var) -> Iterator[Var]:
    z: Optional[Var] = None
    for k in range(len(config.hidden_widths)):
        pre = _affine(x, theta[f"wx.{k}"]) if (k == 0 or config.x_skip) else None
        if z is not None:
            path = _affine(z, theta[f"wz.{k}"])
            pre = path if pre is None else add(pre, path)
        if config.use_bias:
            pre = add(pre, theta[f"b.{k}"])
        yield pre
        z = _activate(config, pre)
    yield z


def forward_graph(config: IcnnConfig, theta: Mapping[str, Var], x: Var, rectify: bool = True) -> Var:
    """Build the potential on the tape; returns shape (batch, 1)"""
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise ShapeError(f"ICNN expects inputs of width {config.input_dim}, got shape {x.shape}")
    *_, z = _hidden_layers(config, theta, x)
    out = _affine(z, theta["wz.out"])
    if config.x_skip:
        out = add(out, _affine(x, theta["wx.out"]))
    if config.use_bias:
        out = add(out, theta["b.out"])
    if rectify and config.final_rectify_square:
        out = rectify_square(out)
    return out


def forward(params: IcnnParams, x, rectify: bool = True):
    """
    Evaluate the ICNN

    Args:
        params: Parameters
        x: Signal (n,) or stack (batch, n)
        rectify: Apply the rectify-square head when the config has one; False
            returns the raw Psi

    Returns:
        A float for one signal, an array of shape (batch,) for a stack
    """
    arr = as_signal(x)
    with no_grad():
        theta = {name: const(value) for name, value in params.arrays.items()}
        out = forward_graph(params.config, theta, const(np.atleast_2d(arr)), rectify).value
    out = out.reshape(-1)
    return float(out[0]) if arr.ndim == 1 else out


def activation_margin(params: IcnnParams, x) -> np.ndarray:
    """
    Smallest |v[2j] - v[2j+1]| over all pairing activations, per input row

    Points with a small margin sit near a kink of the potential's gradient.
    Returns +inf for softplus networks.
    """
    arr = np.atleast_2d(as_signal(x))
    config = params.config
    margin = np.full(arr.shape[0], np.inf)
    if not config.activation.pairs:
        return margin
    with no_grad():
        theta = {name: const(value) for name, value in params.arrays.items()}
        layers = list(_hidden_layers(config, theta, const(arr)))
    for pre in layers[:-1]:
        gap = np.abs(pre.value[:, 0::2] - pre.value[:, 1::2])
        margin = np.minimum(margin, gap.min(axis=1))
    return margin


def pairwise_max(v) -> np.ndarray:
    """max of each adjacent pair, halving the length; ties pick the lower index"""
    with no_grad():
        return _pairwise_max(const(np.asarray(v, dtype=np.float64))).value


def sortpool(v) -> np.ndarray:
    """Each adjacent pair replaced by (max, min)"""
    with no_grad():
        return _sortpool(const(np.asarray(v, dtype=np.float64))).value


def winning_index(v) -> np.ndarray:
    """For each pair, the index (0 or 1 within the pair) that pairwise_max selects"""
    return 1 - pair_mask(const(np.asarray(v, dtype=np.float64))).astype(np.int64)
