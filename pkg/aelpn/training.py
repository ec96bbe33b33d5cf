"""
Two-phase training of learned proximal networks

Every step draws fresh clean samples from the data source, corrupts them
with Gaussian noise, and fits f_theta(y) = grad psi_theta(y) to the clean
signal. The first ``pretrain_steps`` use an l1 (or l2) loss; the remaining
``match_steps`` use proximal matching with the gamma schedule. Adam updates
are followed by a projection keeping every z-path weight nonnegative.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional, Protocol, Tuple, Union

import numpy as np

from .config import TRAIN_CONFIG_SCHEMA, load_yaml, validate_document
from .core.rng import MAX_SEED, Rng
from .core.signal import gaussian_corrupt, psnr_batch
from .diff.programs import loss_parameter_gradient
from .errors import ConfigError, NonFiniteLossError
from .icnn import project_weights
from .losses import LossKind, LossSpec
from .optim import AdamState, adam_step
from .potential import ProxModel, VariantKind, parse_variant

logger = logging.getLogger(__name__)

PRETRAIN = "pretrain"
MATCH = "match"


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters of a training run

    ``gamma_halve_every = None`` holds gamma at gamma0 for the whole matching
    phase. ``normalize_matching`` selects the exact normalised proximal
    matching loss; without it the loss is 1 - exp(-|r|^2 / gamma^2).
    """
    sigma_noise: float = 1.0
    batch_size: int = 256
    pretrain_steps: int = 10000
    match_steps: int = 10000
    lr_pretrain: float = 1e-3
    lr_match: float = 1e-4
    gamma0: float = 0.1
    gamma_halve_every: Optional[int] = None
    gamma_min: float = 1e-4
    seed: int = 0
    loss_pretrain: LossKind = LossKind.L1
    normalize_matching: bool = True
    log_every: int = 500

    def __post_init__(self):
        try:
            object.__setattr__(self, "loss_pretrain", LossKind(self.loss_pretrain))
        except ValueError as e:
            raise ConfigError(f"Unknown pretraining loss: {self.loss_pretrain!r}") from e
        if self.loss_pretrain is LossKind.PROX_MATCHING:
            raise ConfigError("Pretraining uses l1 or l2")
        if not self.sigma_noise >= 0:
            raise ConfigError(f"sigma_noise must be nonnegative, got {self.sigma_noise}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.pretrain_steps < 0 or self.match_steps < 0:
            raise ConfigError("Step counts must be nonnegative")
        if not (self.lr_pretrain > 0 and self.lr_match > 0):
            raise ConfigError("Learning rates must be positive")
        if not self.gamma0 > 0 or not self.gamma_min > 0:
            raise ConfigError("gamma0 and gamma_min must be positive")
        if self.gamma_min > self.gamma0:
            raise ConfigError(f"gamma_min {self.gamma_min} exceeds gamma0 {self.gamma0}")
        if self.gamma_halve_every is not None and self.gamma_halve_every < 1:
            raise ConfigError(f"gamma_halve_every must be positive, got {self.gamma_halve_every}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.log_every < 1:
            raise ConfigError(f"log_every must be positive, got {self.log_every}")

    @property
    def total_steps(self) -> int:
        return self.pretrain_steps + self.match_steps

    @classmethod
    def split_normal(cls, **overrides) -> "TrainConfig":
        """l1 pretraining at 1e-3, then proximal matching at 1e-4 with gamma fixed at 0.1"""
        return cls(**overrides)

    @classmethod
    def denoiser(cls, input_dim: int, kind: Union[str, VariantKind] = VariantKind.PLAIN, **overrides) -> "TrainConfig":
        """
        Patch-denoiser preset

        sigma = 0.1, batch 32, 5k + 5k steps, gamma0 = 0.64 sqrt(n) halved every
        1250 steps. Plain models train at 1e-3 then 1e-4; equivariant ones at 1e-5.
        """
        kind = parse_variant(kind)
        plain = kind in (VariantKind.PLAIN, VariantKind.NORM_TRICK)
        gamma0 = 0.64 * math.sqrt(input_dim)
        values: Dict[str, Any] = dict(
            sigma_noise=0.1,
            batch_size=32,
            pretrain_steps=5000,
            match_steps=5000,
            lr_pretrain=1e-3 if plain else 1e-5,
            lr_match=1e-4 if plain else 1e-5,
            gamma0=gamma0,
            gamma_halve_every=1250,
            gamma_min=1e-3 * gamma0,
            normalize_matching=False,
            log_every=250,
        )
        values.update(overrides)
        return cls(**values)

    def override(self, **changes) -> "TrainConfig":
        """Copy with every non-None keyword applied"""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["loss_pretrain"] = self.loss_pretrain.value
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base: Optional["TrainConfig"] = None) -> "TrainConfig":
        """Build from a mapping, filling absent keys from ``base`` (or the defaults)"""
        validate_document(dict(data), TRAIN_CONFIG_SCHEMA)
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in data.items() if k in known}
        return replace(base, **values) if base is not None else cls(**values)

    @classmethod
    def from_yaml(cls, path, base: Optional["TrainConfig"] = None) -> "TrainConfig":
        return cls.from_dict(load_yaml(path, TRAIN_CONFIG_SCHEMA), base)


def gamma_at(step: int, cfg: TrainConfig) -> float:
    """
    Proximal-matching gamma at a step of the matching phase

    max(gamma0 * 2^-floor(step / halve_every), gamma_min)

    Example:
        >>> cfg = TrainConfig(gamma0=8.0, gamma_halve_every=5000, gamma_min=0.01)
        >>> gamma_at(12500, cfg)
        2.0
    """
    if step < 0:
        raise ConfigError(f"step must be nonnegative, got {step}")
    if cfg.gamma_halve_every is None:
        return max(cfg.gamma0, cfg.gamma_min)
    return max(cfg.gamma0 * 2.0 ** -(step // cfg.gamma_halve_every), cfg.gamma_min)


class SampleSource(Protocol):
    """Anything that yields batches of clean signals"""

    @property
    def dim(self) -> int: ...

    def batch(self, size: int) -> np.ndarray: ...


@dataclass(frozen=True)
class HistoryEntry:
    """Mean loss over one logging interval ending at ``step`` completed steps"""
    step: int
    phase: str
    loss: float
    lr: float
    gamma: Optional[float] = None
    eval_psnr: Optional[float] = None


@dataclass
class TrainHistory:
    entries: List[HistoryEntry] = field(default_factory=list)
    step_losses: List[float] = field(default_factory=list)

    def record(self, entry: HistoryEntry) -> None:
        if self.entries and entry.step <= self.entries[-1].step:
            raise ValueError(f"History steps must increase: {entry.step} after {self.entries[-1].step}")
        self.entries.append(entry)

    def phase_losses(self, phase: str, pretrain_steps: int) -> np.ndarray:
        losses = np.asarray(self.step_losses)
        return losses[:pretrain_steps] if phase == PRETRAIN else losses[pretrain_steps:]

    def to_dict(self) -> Dict[str, Any]:
        return {"entries": [asdict(e) for e in self.entries]}

    @classmethod
    def from_dict(cls, data: Optional[Mapping[str, Any]]) -> "TrainHistory":
        if not data:
            return cls()
        return cls([HistoryEntry(**e) for e in data.get("entries", [])])


@dataclass
class EvalSet:
    """Fixed clean/noisy pairs scored by PSNR during training"""
    clean: np.ndarray
    noisy: np.ndarray
    peak: float = 1.0

    @classmethod
    def draw(cls, source: SampleSource, size: int, sigma: float, rng: Rng) -> "EvalSet":
        clean = source.batch(size)
        return cls(clean, gaussian_corrupt(clean, sigma, rng))

    def score(self, model: ProxModel) -> float:
        return float(np.mean(psnr_batch(model.prox_apply(self.noisy), self.clean, self.peak)))


def _loss_for(step: int, cfg: TrainConfig) -> Tuple[str, LossSpec, float, Optional[float]]:
    if step < cfg.pretrain_steps:
        return PRETRAIN, LossSpec(cfg.loss_pretrain), cfg.lr_pretrain, None
    gamma = gamma_at(step - cfg.pretrain_steps, cfg)
    spec = LossSpec(LossKind.PROX_MATCHING, gamma, cfg.normalize_matching)
    return MATCH, spec, cfg.lr_match, gamma


def train(
    model: ProxModel,
    data: SampleSource,
    cfg: TrainConfig,
    eval_set: Optional[EvalSet] = None,
) -> Tuple[ProxModel, TrainHistory]:
    """
    Train a model with l1 pretraining followed by proximal matching

    A normalization-trick model trains its plain base and comes back wrapped.

    Args:
        model: Initial model
        data: Source of clean samples with ``dim == model.input_dim``
        cfg: Hyperparameters; ``cfg.seed`` seeds the noise stream
        eval_set: Optional pairs scored at each logging interval

    Returns:
        (trained model, history)

    Raises:
        NonFiniteLossError: When a loss or gradient is NaN or infinite
    """
    if data.dim != model.input_dim:
        raise ConfigError(f"Data dimension {data.dim} does not match model input {model.input_dim}")
    wrapped = model.kind is VariantKind.NORM_TRICK
    current = model.base if wrapped else model
    program = current.program
    noise = Rng(cfg.seed).stream("noise")
    params = project_weights(current.params)
    state = AdamState.init(params)
    history = TrainHistory()
    interval: List[float] = []

    logger.info(
        "Training %s (n=%d): %d pretrain + %d matching steps, batch %d, sigma %g",
        model.kind.value, model.input_dim, cfg.pretrain_steps, cfg.match_steps,
        cfg.batch_size, cfg.sigma_noise,
    )
    for step in range(cfg.total_steps):
        phase, loss, lr, gamma = _loss_for(step, cfg)
        x = data.batch(cfg.batch_size)
        y = gaussian_corrupt(x, cfg.sigma_noise, noise)
        value, grads = loss_parameter_gradient(program, params.arrays, (y, x), loss)
        if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise NonFiniteLossError(step, value)
        params, state = adam_step(params, grads, state, lr)
        history.step_losses.append(value)
        interval.append(value)

        done = step + 1
        phase_end = done in (cfg.pretrain_steps, cfg.total_steps)
        if done % cfg.log_every == 0 or phase_end:
            current = current.with_params(params)
            score = eval_set.score(current) if eval_set is not None else None
            entry = HistoryEntry(done, phase, float(np.mean(interval)), lr, gamma, score)
            history.record(entry)
            interval = []
            logger.info(
                "step %d [%s] loss %.6g lr %.1e%s%s", done, phase, entry.loss, lr,
                "" if gamma is None else f" gamma {gamma:.4g}",
                "" if score is None else f" eval PSNR {score:.2f} dB",
            )

    trained = current.with_params(params)
    return (trained.as_norm_trick() if wrapped else trained), history
