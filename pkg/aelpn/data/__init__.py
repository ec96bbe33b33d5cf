"""
Data pipeline

PGM/PPM and raw tensor I/O, patch sampling, synthetic images, and the
sample sources the training loop draws from.
"""

from .patches import PatchSpec, sample_patch, sample_patches, tile_image, untile_image
from .pnm import encode_pnm, load_pnm, parse_pnm, write_pnm
from .sources import (
    PatchSource,
    SplitNormalSource,
    image_paths,
    load_image_dir,
    split_paths,
)
from .synthetic import SyntheticImageSpec, synth_image
from .tensors import load_tensor, read_tensor, save_tensor, write_tensor

__all__ = [
    "PatchSpec",
    "sample_patch",
    "sample_patches",
    "tile_image",
    "untile_image",
    "load_pnm",
    "parse_pnm",
    "encode_pnm",
    "write_pnm",
    "PatchSource",
    "SplitNormalSource",
    "image_paths",
    "load_image_dir",
    "split_paths",
    "SyntheticImageSpec",
    "synth_image",
    "read_tensor",
    "write_tensor",
    "load_tensor",
    "save_tensor",
]
