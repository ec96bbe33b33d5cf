"""
Sample sources for training and evaluation

A source owns its random stream and hands out batches of clean signals
shaped (size, dim). Sources are stateful; give each consumer its own.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from ..core.rng import Rng
from ..core.splitnormal import SplitNormalParams, split_normal_sample
from ..errors import ConfigError, DataFormatError
from .patches import PatchSpec, sample_patches
from .pnm import load_pnm
from .synthetic import SyntheticImageSpec, synth_image

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


class SplitNormalSource:
    """Scalar split-normal draws as signals of length one"""

    dim = 1

    def __init__(self, params: SplitNormalParams, rng: Rng):
        self.params = params
        self.rng = rng

    def batch(self, size: int) -> np.ndarray:
        return np.asarray(split_normal_sample(self.params, self.rng, size), dtype=np.float64).reshape(size, 1)


class PatchSource:
    """Random crops from a fixed pool of images"""

    def __init__(self, images: Sequence[np.ndarray], spec: PatchSpec, rng: Rng):
        if not images:
            raise ConfigError("Patch source needs at least one image")
        self.images = [np.asarray(img, dtype=np.float64) for img in images]
        self.spec = spec
        self.rng = rng

    @property
    def dim(self) -> int:
        return self.spec.dim

    def batch(self, size: int) -> np.ndarray:
        return sample_patches(self.images, self.spec, size, self.rng)

    @classmethod
    def synthetic(
        cls,
        spec: PatchSpec,
        rng: Rng,
        count: int = 32,
        image_spec: SyntheticImageSpec = SyntheticImageSpec(),
    ) -> "PatchSource":
        """Pool of ``count`` synthetic images; images and crops use separate child streams"""
        images_rng = rng.stream("images")
        images = [synth_image(image_spec, images_rng) for _ in range(count)]
        return cls(images, spec, rng.stream("crops"))

    @classmethod
    def from_paths(cls, paths: Sequence[Path], spec: PatchSpec, rng: Rng) -> "PatchSource":
        return cls([load_pnm(p) for p in paths], spec, rng)


def image_paths(directory) -> List[Path]:
    """PGM/PPM files directly inside ``directory``, sorted by name"""
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"Not a directory: {root}")
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise DataFormatError(f"No PGM/PPM images found in {root}")
    return paths


def load_image_dir(directory) -> List[Tuple[Path, np.ndarray]]:
    return [(p, load_pnm(p)) for p in image_paths(directory)]


def split_paths(
    paths: Sequence[Path], seed: int, train_fraction: float = 0.8
) -> Tuple[List[Path], List[Path]]:
    """
    Seeded train/test split

    The sorted paths are shuffled with the ``split`` stream of ``seed``; each
    side gets at least one file when there are two or more. A single file is
    used for both sides.
    """
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    ordered = sorted(Path(p) for p in paths)
    if not ordered:
        raise DataFormatError("Cannot split an empty file list")
    if len(ordered) == 1:
        logger.warning("Only one image (%s); using it for training and evaluation", ordered[0])
        return list(ordered), list(ordered)
    order = Rng(seed).stream("split").permutation(len(ordered))
    cut = min(len(ordered) - 1, max(1, int(round(train_fraction * len(ordered)))))
    shuffled = [ordered[i] for i in order]
    return sorted(shuffled[:cut]), sorted(shuffled[cut:])
