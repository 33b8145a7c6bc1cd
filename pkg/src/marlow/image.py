"""Image and mask values shared by the whole pipeline.

Samples are float64 in [0, 1], stored as (height, width, channels) with
channels 1 (gray) or 3 (RGB). Masks are boolean (height, width) rasters,
True marking observed pixels. Both types freeze their backing arrays so
instances can be shared between workers without copies.

File formats: 8-bit gray/RGB PNG and binary PGM/PPM (maxval 255). Mask
files are 8-bit grayscale where byte 0 means missing and any nonzero
byte means known.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as _PILImage


@dataclass(frozen=True)
class Image:
    """Dense raster of samples in [0, 1], shape (height, width, channels)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(
                f"expected samples shaped (h, w, 1|3), got {np.shape(self.data)}"
            )
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("empty image")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise ValueError("samples must lie in [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Mask:
    """Boolean raster marking observed pixels (True = known)."""

    known: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.known)
        if arr.ndim != 2 or arr.dtype != np.bool_:
            raise ValueError(f"mask must be a 2-D boolean raster, got {arr.dtype} {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "known", arr)

    @property
    def height(self) -> int:
        return self.known.shape[0]

    @property
    def width(self) -> int:
        return self.known.shape[1]

    @property
    def known_count(self) -> int:
        return int(self.known.sum())

    @property
    def missing_count(self) -> int:
        return self.known.size - self.known_count


def quantize_u8(samples: np.ndarray) -> np.ndarray:
    """Map real samples to bytes: round(s*255) half-up, clamped to [0, 255]."""
    scaled = np.floor(np.asarray(samples, dtype=np.float64) * 255.0 + 0.5)
    return np.clip(scaled, 0.0, 255.0).astype(np.uint8)


def load_image(path) -> Image:
    """Load an 8-bit grayscale or RGB raster, scaling bytes by 1/255."""
    path = Path(path)
    try:
        with _PILImage.open(path) as pil:
            pil.load()
            mode = pil.mode
            if mode not in ("L", "RGB"):
                raise ValueError(
                    f"{path}: unsupported color model or bit depth (mode {mode!r}); "
                    "expected 8-bit grayscale or RGB"
                )
            arr = np.asarray(pil, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"{path}: unreadable image file: {exc}") from exc
    return Image(arr.astype(np.float64) / 255.0)


def save_image(img: Image, path) -> None:
    """Quantize to 8-bit (round half-up, clamped) and write per the file extension."""
    path = Path(path)
    bytes_ = quantize_u8(img.data)
    if img.channels == 1:
        pil = _PILImage.fromarray(bytes_[:, :, 0], mode="L")
    else:
        pil = _PILImage.fromarray(bytes_, mode="RGB")
    pil.save(path)


def load_mask(path) -> Mask:
    """Read a mask raster: byte 0 = missing, any nonzero byte = known."""
    path = Path(path)
    with _PILImage.open(path) as pil:
        pil.load()
        if pil.mode != "L":
            raise ValueError(f"{path}: mask files must be 8-bit grayscale, got mode {pil.mode!r}")
        arr = np.asarray(pil, dtype=np.uint8)
    return Mask(arr > 0)


def save_mask(mask: Mask, path) -> None:
    """Write a mask as 8-bit grayscale: 255 = known, 0 = missing."""
    arr = np.where(mask.known, np.uint8(255), np.uint8(0))
    _PILImage.fromarray(arr, mode="L").save(Path(path))


def apply_mask(img: Image, mask: Mask, fill: float = 0.0) -> Image:
    """Keep known pixels, replace missing ones with `fill` in every channel."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError(
            f"image {img.height}x{img.width} and mask {mask.height}x{mask.width} differ"
        )
    if not 0.0 <= fill <= 1.0:
        raise ValueError(f"fill must lie in [0, 1], got {fill}")
    out = np.where(mask.known[:, :, None], img.data, fill)
    return Image(out)
