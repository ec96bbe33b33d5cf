"""
Potential variants built on ICNNs

Every variant is a convex potential psi whose gradient f = grad psi is the
learned prox. With P the mean projection and u = (I - P)x:

    lpn    psi(x) = Psi(x) + (alpha/2)|x|^2
    scale  psi(x) = h(x) + (alpha/2)|x|^2                      h = max(Psi, 0)^2
    shift  psi(x) = Psi(u) + 1/2 |Px|^2 + (alpha/2)|u|^2
    ae     psi(x) = h(u) + 1/2 |Px|^2 + (alpha/2)|u|^2

so that for the affine-equivariant variant

    f(x) = (I - P) grad h(u) + alpha u + Px

which commutes with x -> a x + b 1 for every a > 0. The normalization trick
wraps a plain model as std(x) f((x - mean)/std) + mean; it is equivariant
but not a gradient field, so it has no potential.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core.rng import Rng
from .core.signal import as_signal
from .diff.engine import Var, add, broadcast_to, mul, row_sum, squared_norm, sub
from .diff.programs import Program, potential_and_gradient
from .errors import ConfigError, IncompatibleVariantError, ShapeError
from .icnn import Activation, IcnnConfig, IcnnParams, forward_graph, init, zeros

logger = logging.getLogger(__name__)

# Signals with a smaller standard deviation pass through the normalization trick unchanged
NORM_TRICK_STD_FLOOR = 1e-12


class VariantKind(str, Enum):
    """Potential constructions"""
    PLAIN = "lpn"
    SCALE = "scale"
    SHIFT = "shift"
    AFFINE = "ae"
    NORM_TRICK = "normtrick"

    @property
    def centered(self) -> bool:
        """Variants that feed the mean-free part of x to the ICNN"""
        return self in (VariantKind.SHIFT, VariantKind.AFFINE)

    @property
    def needs_homogeneous(self) -> bool:
        return self in (VariantKind.SCALE, VariantKind.AFFINE)

    @property
    def scale_equivariant(self) -> bool:
        return self in (VariantKind.SCALE, VariantKind.AFFINE, VariantKind.NORM_TRICK)

    @property
    def shift_equivariant(self) -> bool:
        return self in (VariantKind.SHIFT, VariantKind.AFFINE, VariantKind.NORM_TRICK)


def parse_variant(kind: Union[str, VariantKind]) -> VariantKind:
    try:
        return VariantKind(kind)
    except ValueError as e:
        choices = ", ".join(k.value for k in VariantKind)
        raise ConfigError(f"Unknown variant {kind!r} (choose from {choices})") from e


@dataclass(frozen=True)
class PotentialVariant:
    """Which construction wraps the ICNN, plus the strong-convexity weight alpha"""
    kind: VariantKind = VariantKind.PLAIN
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_variant(self.kind))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.alpha >= 0 or not np.isfinite(self.alpha):
            raise ConfigError(f"alpha must be a nonnegative real, got {self.alpha}")


def check_compatible(variant: PotentialVariant, config: IcnnConfig) -> None:
    """Raise IncompatibleVariantError when the ICNN preset cannot carry the variant"""
    if variant.kind.needs_homogeneous and not config.is_homogeneous:
        raise IncompatibleVariantError(
            f"Variant {variant.kind.value!r} needs the equivariant ICNN preset "
            f"(no biases, pairing activation, rectify-square head)"
        )


def _mean_rows(x: Var) -> Var:
    return mul(row_sum(x), 1.0 / x.shape[-1])


def variant_program(variant: PotentialVariant, config: IcnnConfig) -> Program:
    """
    Build the tape program psi(theta, x) for a variant

    The returned program maps a (batch, n) Var to a (batch, 1) Var.
    """
    check_compatible(variant, config)
    if variant.kind is VariantKind.NORM_TRICK:
        raise IncompatibleVariantError("The normalization trick has no potential")
    alpha = variant.alpha
    centered = variant.kind.centered

    def program(theta: Mapping[str, Var], x: Var) -> Var:
        if centered:
            px = broadcast_to(_mean_rows(x), x.shape)
            u = sub(x, px)
            psi = add(forward_graph(config, theta, u), mul(squared_norm(px), 0.5))
        else:
            u = x
            psi = forward_graph(config, theta, u)
        if alpha:
            psi = add(psi, mul(squared_norm(u), 0.5 * alpha))
        return psi

    return program


@dataclass(frozen=True)
class ProxModel:
    """
    A learned prox: variant, ICNN architecture and parameters

    Example:
        >>> model = build_model("ae", 16, (32, 32), Rng(0))
        >>> x_hat = model.prox_apply(noisy)
    """
    variant: PotentialVariant
    config: IcnnConfig
    params: IcnnParams

    def __post_init__(self):
        if self.params.config != self.config:
            raise ShapeError("Parameters were built for a different ICNN config")
        check_compatible(self.variant, self.config)

    @property
    def kind(self) -> VariantKind:
        return self.variant.kind

    @property
    def alpha(self) -> float:
        return self.variant.alpha

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    @property
    def theta(self) -> Dict[str, np.ndarray]:
        return self.params.arrays

    @property
    def program(self) -> Program:
        return variant_program(self.variant, self.config)

    @property
    def base(self) -> "ProxModel":
        """The plain model a normalization-trick wrapper evaluates"""
        if self.kind is not VariantKind.NORM_TRICK:
            return self
        return replace(self, variant=PotentialVariant(VariantKind.PLAIN, self.alpha))

    def with_params(self, params: IcnnParams) -> "ProxModel":
        return replace(self, params=params)

    def with_alpha(self, alpha: float) -> "ProxModel":
        """Same theta with a different strong-convexity weight"""
        return replace(self, variant=PotentialVariant(self.kind, alpha))

    def as_norm_trick(self) -> "ProxModel":
        """Wrap this model's plain potential with the normalization trick"""
        if self.kind is not VariantKind.PLAIN:
            raise IncompatibleVariantError("The normalization trick wraps plain LPN models")
        return replace(self, variant=PotentialVariant(VariantKind.NORM_TRICK, self.alpha))

    def _check_dim(self, x) -> np.ndarray:
        arr = as_signal(x)
        if arr.shape[-1] != self.input_dim:
            raise ShapeError(f"Model expects signals of length {self.input_dim}, got {arr.shape[-1]}")
        return arr

    def value_and_grad(self, x):
        """(psi(x), grad psi(x)) for one signal or a stack"""
        return potential_and_gradient(self.program, self.theta, self._check_dim(x))

    def potential_value(self, x):
        return self.value_and_grad(x)[0]

    def prox_apply(self, x) -> np.ndarray:
        arr = self._check_dim(x)
        if self.kind is VariantKind.NORM_TRICK:
            return norm_trick_apply(self.base, arr)
        return potential_and_gradient(self.program, self.theta, arr)[1]

    def to_dict(self) -> Dict:
        return {"variant": self.kind.value, "alpha": self.alpha, "icnn": self.config.to_dict()}


def potential_value(model: ProxModel, x):
    """psi(x); a float for one signal, an array for a stack"""
    return model.potential_value(x)


def prox_apply(model: ProxModel, x) -> np.ndarray:
    """f(x) = grad psi(x), or the wrapped map for the normalization trick"""
    return model.prox_apply(x)


def norm_trick_apply(base: ProxModel, x) -> np.ndarray:
    """
    std(x) f((x - mean(x)) / std(x)) + mean(x), row by row

    Rows whose standard deviation is below NORM_TRICK_STD_FLOOR are returned
    unchanged.
    """
    arr = as_signal(x)
    rows = np.atleast_2d(arr)
    mean = rows.mean(axis=-1, keepdims=True)
    std = rows.std(axis=-1, keepdims=True)
    out = rows.copy()
    live = std[:, 0] >= NORM_TRICK_STD_FLOOR
    if np.any(live):
        normalized = (rows[live] - mean[live]) / std[live]
        out[live] = std[live] * base.prox_apply(normalized) + mean[live]
    return out[0] if arr.ndim == 1 else out


def preset_for(
    kind: VariantKind,
    input_dim: int,
    hidden_widths: Sequence[int],
    activation: Activation = Activation.PAIRWISE_MAX,
) -> IcnnConfig:
    """ICNN preset that each variant is built on"""
    if kind.needs_homogeneous:
        return IcnnConfig.equivariant(input_dim, hidden_widths, activation)
    return IcnnConfig.plain(input_dim, hidden_widths)


def build_model(
    kind: Union[str, VariantKind],
    input_dim: int,
    hidden_widths: Sequence[int],
    rng: Rng,
    alpha: float = 0.0,
    activation: Activation = Activation.PAIRWISE_MAX,
) -> ProxModel:
    """
    Freshly initialised model of the given variant

    Args:
        kind: Variant name ("lpn", "scale", "shift", "ae", "normtrick")
        input_dim: Signal length n
        hidden_widths: ICNN hidden widths
        rng: Stream used for weight initialisation
        alpha: Strong-convexity weight
        activation: Pairing activation for the equivariant preset

    Returns:
        ProxModel with nonnegative z-path weights
    """
    variant = PotentialVariant(parse_variant(kind), alpha)
    config = preset_for(variant.kind, input_dim, hidden_widths, Activation(activation))
    logger.debug("Building %s model: n=%d widths=%s", variant.kind.value, input_dim, config.hidden_widths)
    return ProxModel(variant, config, init(config, rng))


def quadratic_model(input_dim: int, alpha: float, hidden_widths: Tuple[int, ...] = (2,)) -> ProxModel:
    """
    psi(x) = (alpha/2)|x|^2 as a plain model with all-zero ICNN parameters

    alpha = 1 gives the identity prox; alpha = 1/2 gives f(y) = y/2.
    """
    config = IcnnConfig.plain(input_dim, hidden_widths)
    return ProxModel(PotentialVariant(VariantKind.PLAIN, alpha), config, zeros(config))


def model_from_dict(data: Mapping, params: Optional[Mapping[str, np.ndarray]] = None) -> ProxModel:
    """Rebuild a model from ``ProxModel.to_dict()`` output and parameter arrays"""
    config = IcnnConfig.from_dict(data["icnn"])
    variant = PotentialVariant(data["variant"], data.get("alpha", 0.0))
    arrays = zeros(config) if params is None else IcnnParams(config, dict(params))
    return ProxModel(variant, config, arrays)
