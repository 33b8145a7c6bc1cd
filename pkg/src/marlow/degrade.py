"""Degradation masks: random sampling, text overlays, interpolation grids.

All generators are pure functions of their arguments. Random sampling is
driven by an explicit splitmix64 stream plus a partial Fisher-Yates
shuffle so masks are bit-identical across platforms and runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .image import Image, Mask

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64 generator.

    Update equations (all arithmetic mod 2**64):

        state = state + 0x9E3779B97F4A7C15
        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        output = z ^ (z >> 31)
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform draw from [0, bound) without modulo bias (rejection)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % bound


@dataclass(frozen=True)
class DegradeSpec:
    """One of three degradation modes; only the selected mode's fields are read."""

    mode: str  # "random" | "text" | "grid"
    missing_rate: float = 0.0
    text_mask_path: Optional[str] = None
    factor: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "text", "grid"):
            raise ValueError(f"unknown degradation mode {self.mode!r}")
        if self.mode == "random" and not 0.0 <= self.missing_rate <= 1.0:
            raise ValueError(f"missing_rate must lie in [0, 1], got {self.missing_rate}")
        if self.mode == "grid" and self.factor < 2:
            raise ValueError(f"grid factor must be >= 2, got {self.factor}")


def random_mask(width: int, height: int, missing_rate: float, seed: int) -> Mask:
    """Drop exactly round(missing_rate * width * height) pixels, chosen uniformly.

    Pixels are indexed row-major (index = row * width + col); the missing set
    is the first k entries of a partial Fisher-Yates shuffle of all indices,
    with swap targets drawn from the splitmix64 stream seeded by `seed`.
    """
    if not 0.0 <= missing_rate <= 1.0:
        raise ValueError(f"missing_rate must lie in [0, 1], got {missing_rate}")
    total = width * height
    k = int(np.floor(missing_rate * total + 0.5))
    rng = SplitMix64(seed)
    indices = list(range(total))
    for i in range(k):
        j = i + rng.below(total - i)
        indices[i], indices[j] = indices[j], indices[i]
    known = np.ones(total, dtype=bool)
    known[indices[:k]] = False
    return Mask(known.reshape(height, width))


def text_mask(mask_img: Image) -> Mask:
    """Missing wherever the stroke image is bright (sample > 0.5)."""
    if mask_img.channels != 1:
        raise ValueError("text masks must be grayscale images")
    return Mask(mask_img.data[:, :, 0] <= 0.5)


def grid_mask(width: int, height: int, factor: int) -> Mask:
    """Keep only the lattice pixels (r, c) with r % factor == 0 and c % factor == 0."""
    if factor < 2:
        raise ValueError(f"grid factor must be >= 2, got {factor}")
    rows = (np.arange(height) % factor) == 0
    cols = (np.arange(width) % factor) == 0
    return Mask(np.logical_and.outer(rows, cols))


def make_mask(spec: DegradeSpec, width: int, height: int) -> Mask:
    """Build the mask described by `spec` for a width x height canvas."""
    if spec.mode == "random":
        return random_mask(width, height, spec.missing_rate, spec.seed)
    if spec.mode == "grid":
        return grid_mask(width, height, spec.factor)
    from .image import load_image

    if spec.text_mask_path is None:
        raise ValueError("text mode requires text_mask_path")
    stroke = load_image(spec.text_mask_path)
    if (stroke.height, stroke.width) != (height, width):
        raise ValueError(
            f"text mask is {stroke.height}x{stroke.width}, image is {height}x{width}"
        )
    return text_mask(stroke)
