"""Patch grouping: reference enumeration, block matching, extraction, aggregation.

A patch group stacks the N patches most similar to a reference patch.
Vectorized as columns they form the (n^2*h) x N patch matrix; stacked as
planes they form the data cube the autoregressive model works on. Both
views share the same ordering: the reference first, then ascending match
cost with raster-order tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import Image


def _samples(img) -> np.ndarray:
    """Accept an Image or a raw (h, w, c) / (h, w) sample array."""
    if isinstance(img, Image):
        return img.data
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected (h, w, c) samples, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PatchGeometry:
    """Patch size n, channels h, reference stride, search radius, group size N."""

    n: int
    h: int
    stride: int
    search_radius: int
    N: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("patch side must be >= 1")
        if self.h not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if not 1 <= self.stride <= self.n:
            raise ValueError(f"stride must lie in [1, n={self.n}], got {self.stride}")
        if self.search_radius < 1:
            raise ValueError("search radius must be >= 1")
        if self.N < 1:
            raise ValueError("group size must be >= 1")


@dataclass(frozen=True)
class PatchGroup:
    """Top-left positions of the grouped patches; coords[0] is the reference."""

    coords: tuple
    n: int
    h: int

    @property
    def size(self) -> int:
        return len(self.coords)


def enumerate_refs(width: int, height: int, geom: PatchGeometry):
    """Reference positions on the stride lattice, plus border-clamped finals.

    Returns (row, col) tuples in row-major order. The last row/column of
    positions is clamped so the final patches touch the image borders,
    which guarantees every pixel is covered by at least one reference patch.
    """
    if width < geom.n or height < geom.n:
        raise ValueError(
            f"image {height}x{width} is smaller than the {geom.n}x{geom.n} patch"
        )

    def axis_positions(extent):
        last = extent - geom.n
        pos = list(range(0, last + 1, geom.stride))
        if pos[-1] != last:
            pos.append(last)
        return pos

    rows = axis_positions(height)
    cols = axis_positions(width)
    return [(r, c) for r in rows for c in cols]


class PatchStack:
    """Per-image cache of all vectorized patches, for matching and extraction.

    vectors[r, c] is the patch at top-left (r, c) flattened channel-major:
    for color, the R block (row-major n^2 samples), then G, then B.
    """

    def __init__(self, img, n: int):
        data = _samples(img)
        h, w, c = data.shape
        if h < n or w < n:
            raise ValueError(f"image {h}x{w} is smaller than the {n}x{n} patch")
        win = sliding_window_view(data, (n, n), axis=(0, 1))  # (Pr, Pc, c, n, n)
        pr, pc = win.shape[:2]
        self.vectors = np.ascontiguousarray(win).reshape(pr, pc, c * n * n)
        self.n = n
        self.channels = c
        self.height = h
        self.width = w

    def match(self, ref, geom: PatchGeometry) -> PatchGroup:
        """Group the N best matches of the reference patch.

        Candidates are every in-bounds patch position within Chebyshev
        distance `geom.search_radius` of the reference, stepped at one
        pixel; cost is the sum of squared sample differences over all
        n*n*channels samples. The reference is first, the rest follow in
        ascending cost with ties broken by raster-scan position. Windows
        holding fewer than N candidates fall back to the whole image.
        """
        pr, pc = self.vectors.shape[:2]
        r0, c0 = ref
        if not (0 <= r0 < pr and 0 <= c0 < pc):
            raise ValueError(f"reference {ref} out of bounds for patch lattice {pr}x{pc}")
        rad = geom.search_radius
        rlo, rhi = max(0, r0 - rad), min(pr, r0 + rad + 1)
        clo, chi = max(0, c0 - rad), min(pc, c0 + rad + 1)
        if (rhi - rlo) * (chi - clo) < geom.N:
            rlo, rhi, clo, chi = 0, pr, 0, pc
        if (rhi - rlo) * (chi - clo) < geom.N:
            raise ValueError(
                f"only {(rhi - rlo) * (chi - clo)} candidate patches for group size {geom.N}"
            )

        refvec = self.vectors[r0, c0]
        diff = self.vectors[rlo:rhi, clo:chi] - refvec
        costs = np.einsum("ijk,ijk->ij", diff, diff).ravel()
        rows, cols = np.meshgrid(
            np.arange(rlo, rhi), np.arange(clo, chi), indexing="ij"
        )
        rows = rows.ravel()
        cols = cols.ravel()

        keep = ~((rows == r0) & (cols == c0))
        order = np.lexsort((cols[keep], rows[keep], costs[keep]))[: geom.N - 1]
        coords = [(r0, c0)] + list(zip(rows[keep][order].tolist(), cols[keep][order].tolist()))
        return PatchGroup(coords=tuple(coords), n=self.n, h=self.channels)

    def columns(self, group: PatchGroup) -> np.ndarray:
        """The (n^2*h) x N patch matrix of the group, one column per patch."""
        rows = np.fromiter((r for r, _ in group.coords), dtype=np.intp)
        cols = np.fromiter((c for _, c in group.coords), dtype=np.intp)
        return self.vectors[rows, cols].T.copy()


def match_patches(img, ref, geom: PatchGeometry) -> PatchGroup:
    """One-shot block matching; see PatchStack.match for the contract."""
    return PatchStack(img, geom.n).match(ref, geom)


def extract_group(img, group: PatchGroup) -> np.ndarray:
    """Stack the group's patches as columns: (n^2*h) x N, channel-major blocks."""
    data = _samples(img)
    h, w, c = data.shape
    n = group.n
    cols = []
    for r, col in group.coords:
        if not (0 <= r <= h - n and 0 <= col <= w - n):
            raise ValueError(f"patch at {(r, col)} out of bounds for {h}x{w} image")
        patch = data[r : r + n, col : col + n, :]
        cols.append(patch.transpose(2, 0, 1).reshape(-1))
    return np.stack(cols, axis=1)


def scatter_group(group: PatchGroup, estimate: np.ndarray, width: int, height: int, channels: int):
    """Adjoint of extract_group: add each column back onto a zero canvas.

    Returns (canvas, coverage) where coverage counts contributing patches
    per pixel (shared across channels).
    """
    n = group.n
    if estimate.shape != (n * n * channels, group.size):
        raise ValueError(
            f"estimate shape {estimate.shape} does not match group "
            f"({n * n * channels} x {group.size})"
        )
    canvas = np.zeros((height, width, channels))
    coverage = np.zeros((height, width))
    blocks = estimate.T.reshape(group.size, channels, n, n).transpose(0, 2, 3, 1)
    for (r, c), block in zip(group.coords, blocks):
        canvas[r : r + n, c : c + n, :] += block
        coverage[r : r + n, c : c + n] += 1.0
    return canvas, coverage


def aggregate(estimates, width: int, height: int, channels: int) -> np.ndarray:
    """Average all per-patch estimates onto the canvas (uniform weights).

    `estimates` is an ordered sequence of (PatchGroup, matrix) pairs; the
    accumulation order is fixed by that sequence so results do not depend
    on how the per-group work was scheduled. Every pixel must be covered.
    """
    canvas = np.zeros((height, width, channels))
    coverage = np.zeros((height, width))
    for group, est in estimates:
        n = group.n
        if est.shape != (n * n * channels, group.size):
            raise ValueError(
                f"estimate shape {est.shape} does not match group "
                f"({n * n * channels} x {group.size})"
            )
        blocks = est.T.reshape(group.size, channels, n, n).transpose(0, 2, 3, 1)
        for (r, c), block in zip(group.coords, blocks):
            canvas[r : r + n, c : c + n, :] += block
            coverage[r : r + n, c : c + n] += 1.0
    if not np.all(coverage > 0):
        missing = int((coverage == 0).sum())
        raise ValueError(f"{missing} pixels left uncovered by the patch estimates")
    return canvas / coverage[:, :, None]
