"""Square crops of grayscale images, flattened row-major into signals"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..core.rng import Rng
from ..errors import ConfigError, ShapeError


@dataclass(frozen=True)
class PatchSpec:
    """Patch geometry; values are in [0, 1] and the signal length is height * width * channels"""
    height: int = 16
    width: int = 16
    channels: int = 1

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigError(f"Patch size must be positive, got {self.height}x{self.width}")
        if self.channels != 1:
            raise ConfigError("Only single-channel patches are supported")

    @property
    def dim(self) -> int:
        return self.height * self.width * self.channels

    @classmethod
    def parse(cls, text: str) -> "PatchSpec":
        """Parse "16" or "16x12" (height x width)"""
        try:
            parts = [int(p) for p in text.lower().split("x")]
        except ValueError as e:
            raise ConfigError(f"Invalid patch size {text!r}") from e
        if len(parts) == 1:
            return cls(parts[0], parts[0])
        if len(parts) == 2:
            return cls(parts[0], parts[1])
        raise ConfigError(f"Invalid patch size {text!r}")


def _check_image(image, spec: PatchSpec) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError(f"Expected a 2-D grayscale image, got shape {image.shape}")
    if image.shape[0] < spec.height or image.shape[1] < spec.width:
        raise ShapeError(
            f"Image {image.shape[0]}x{image.shape[1]} is smaller than the "
            f"{spec.height}x{spec.width} patch"
        )
    return image


def sample_patch(image, spec: PatchSpec, rng: Rng) -> np.ndarray:
    """Crop at a uniformly random top-left corner and flatten row-major"""
    image = _check_image(image, spec)
    top = int(rng.integers(0, image.shape[0] - spec.height + 1))
    left = int(rng.integers(0, image.shape[1] - spec.width + 1))
    return image[top:top + spec.height, left:left + spec.width].reshape(-1).copy()


def tile_image(image, spec: PatchSpec) -> Tuple[np.ndarray, Tuple[int, int]]:
    """
    Cut an image into non-overlapping patches, dropping the right/bottom remainder

    Returns:
        (patches of shape (rows * cols, dim), (rows, cols))
    """
    image = _check_image(image, spec)
    rows, cols = image.shape[0] // spec.height, image.shape[1] // spec.width
    cropped = image[:rows * spec.height, :cols * spec.width]
    blocks = cropped.reshape(rows, spec.height, cols, spec.width).transpose(0, 2, 1, 3)
    return blocks.reshape(rows * cols, spec.dim), (rows, cols)


def untile_image(patches: np.ndarray, grid: Tuple[int, int], spec: PatchSpec) -> np.ndarray:
    """Inverse of tile_image"""
    rows, cols = grid
    blocks = np.asarray(patches).reshape(rows, cols, spec.height, spec.width).transpose(0, 2, 1, 3)
    return blocks.reshape(rows * spec.height, cols * spec.width)


def sample_patches(images: List[np.ndarray], spec: PatchSpec, count: int, rng: Rng) -> np.ndarray:
    """``count`` patches, each from an image chosen uniformly at random"""
    if not images:
        raise ConfigError("Cannot sample patches from an empty image list")
    out = np.empty((count, spec.dim))
    for i in range(count):
        which = int(rng.integers(0, len(images))) if len(images) > 1 else 0
        out[i] = sample_patch(images[which], spec, rng)
    return out
