"""
Synthetic piecewise-smooth images

A 0.5 gray background plus random linear gradients, rectangles and soft
disks, clipped to [0, 1]. Stands in for natural images when no dataset is
supplied.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..core.rng import Rng
from ..errors import ConfigError

BACKGROUND = 0.5


@dataclass(frozen=True)
class SyntheticImageSpec:
    """Image size and component counts; amplitudes are drawn from +/- the given ranges"""
    height: int = 64
    width: int = 64
    gradients: int = 2
    rectangles: int = 4
    disks: int = 3
    gradient_amplitude: float = 0.3
    rectangle_amplitude: float = 0.4
    disk_amplitude: float = 0.4
    disk_radius: Tuple[float, float] = (0.05, 0.25)
    disk_softness: float = 1.5

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigError("Synthetic image size must be positive")
        if min(self.gradients, self.rectangles, self.disks) < 0:
            raise ConfigError("Component counts must be nonnegative")
        if not 0 < self.disk_radius[0] <= self.disk_radius[1]:
            raise ConfigError(f"Invalid disk radius range {self.disk_radius}")
        if not self.disk_softness > 0:
            raise ConfigError("disk_softness must be positive")


def synth_image(spec: SyntheticImageSpec, rng: Rng) -> np.ndarray:
    """Draw one (height, width) image with values in [0, 1]"""
    h, w = spec.height, spec.width
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    image = np.full((h, w), BACKGROUND)

    for _ in range(spec.gradients):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        amplitude = rng.uniform(-spec.gradient_amplitude, spec.gradient_amplitude)
        ramp = np.cos(angle) * (cols / max(w - 1, 1) - 0.5) + np.sin(angle) * (rows / max(h - 1, 1) - 0.5)
        image += amplitude * ramp

    for _ in range(spec.rectangles):
        top, bottom = np.sort(rng.integers(0, h + 1, 2))
        left, right = np.sort(rng.integers(0, w + 1, 2))
        image[top:bottom, left:right] += rng.uniform(-spec.rectangle_amplitude, spec.rectangle_amplitude)

    scale = min(h, w)
    for _ in range(spec.disks):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        radius = rng.uniform(*spec.disk_radius) * scale
        amplitude = rng.uniform(-spec.disk_amplitude, spec.disk_amplitude)
        dist = np.hypot(rows - cy, cols - cx)
        image += amplitude * 0.5 * (1.0 + np.tanh((radius - dist) / spec.disk_softness))

    return np.clip(image, 0.0, 1.0)
