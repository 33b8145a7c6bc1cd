"""Image completion by alternating autoregression and low-rank shrinkage.

The driver starts from an interpolated guess, then repeats: group similar
patches on the current estimate, fit the multiplanar AR model per group,
fuse the prediction with the observed patch matrix through the nuclear
norm prox, average the overlapping group estimates back onto the image,
and reinsert the known pixels verbatim. Gray images run on one plane;
color images run either per channel (separate) or on channel-stacked
patch matrices with per-channel AR supports (simultaneous).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metrics
from .ar import AROffsets, build_support, predict, solve_ar
from .image import Image, Mask
from .lowrank import joint_update
from .patches import PatchGeometry, PatchStack, aggregate, enumerate_refs

MODES = ("marlow", "lowrank_only", "color_separate", "color_simultaneous")


@dataclass(frozen=True)
class SolverConfig:
    n: int
    h: int
    stride: int
    N: int
    search_radius: int
    alpha: float
    mu: float
    tau: float  # None derives the threshold from mu
    max_iter: int
    offsets: AROffsets
    mode: str
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        # patch geometry fields get their own validation on construction
        PatchGeometry(self.n, self.h, self.stride, self.search_radius, self.N)

    @classmethod
    def gray_defaults(cls, **overrides) -> "SolverConfig":
        """8x8 patches, stride 4, groups of 64, alpha = sqrt(10), mu = 10."""
        base = dict(
            n=8, h=1, stride=4, N=64, search_radius=20,
            alpha=math.sqrt(10.0), mu=10.0, tau=None, max_iter=8,
            offsets=AROffsets.default(), mode="marlow", threads=1,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def color_defaults(cls, **overrides) -> "SolverConfig":
        """5x5 patches, stride 4, groups of 75; channels handled jointly."""
        base = dict(
            n=5, h=3, stride=4, N=75, search_radius=20,
            alpha=math.sqrt(10.0), mu=10.0, tau=None, max_iter=8,
            offsets=AROffsets.default(), mode="color_simultaneous", threads=1,
        )
        base.update(overrides)
        return cls(**base)


@dataclass
class IterationRecord:
    """One outer iteration: PSNR against the reference (if any), the mean
    per-group residual (AR fit residual, or prox displacement when the AR
    step is disabled), and wall time in seconds."""

    psnr_db: float
    mean_residual: float
    seconds: float


def _nearest_filled(idx, axis, extent, before):
    """Per pixel, the coordinate of the nearest filled pixel along `axis`.

    `idx` holds each pixel's own coordinate where filled, else -1. With
    `before` the scan looks toward lower coordinates, otherwise toward
    higher ones; -1 marks positions with no filled pixel on that side.
    """
    if before:
        return np.maximum.accumulate(idx, axis=axis)
    flipped = np.flip(idx, axis=axis)
    flipped = np.where(flipped >= 0, extent - 1 - flipped, -1)
    scanned = np.maximum.accumulate(flipped, axis=axis)
    scanned = np.where(scanned >= 0, extent - 1 - scanned, -1)
    return np.flip(scanned, axis=axis)


def initialize(degraded: Image, mask: Mask) -> Image:
    """Fill missing pixels from the nearest known pixel along each axis.

    Each missing pixel averages the nearest known pixel above, below, left
    and right, weighted by inverse distance; directions with no known pixel
    are skipped. Pixels with no known pixel in their row or column (interior
    of a grid mask, for instance) are filled in later passes, where pixels
    completed earlier act as sources. On a factor-2 grid mask this is exact
    bilinear interpolation.
    """
    data = degraded.data
    h, w, c = data.shape
    if mask.known.shape != (h, w):
        raise ValueError(
            f"mask {mask.known.shape} does not match image {(h, w)}"
        )
    if not mask.known.any():
        raise ValueError("cannot initialize an image with no known pixels")
    if mask.known.all():
        return degraded

    out = data.copy()
    filled = mask.known.copy()
    while not filled.all():
        wsum = np.zeros((h, w))
        vsum = np.zeros((h, w, c))
        for axis, extent in ((1, w), (0, h)):
            coords = np.arange(extent)
            pos = coords[None, :] if axis == 1 else coords[:, None]
            pos = np.broadcast_to(pos, (h, w))
            idx = np.where(filled, pos, -1)
            for before in (True, False):
                near = _nearest_filled(idx, axis, extent, before)
                valid = (near >= 0) & ~filled
                dist = np.where(valid, np.abs(pos - near), 1).astype(np.float64)
                weight = np.where(valid, 1.0 / dist, 0.0)
                gather = np.take_along_axis(
                    out, np.clip(near, 0, None)[:, :, None], axis=axis
                )
                wsum += weight
                vsum += weight[:, :, None] * gather
        ready = ~filled & (wsum > 0)
        if not ready.any():
            raise ValueError("initialization made no progress; mask disconnected")
        fill_vals = vsum[ready] / wsum[ready][:, None]
        out[ready] = fill_vals
        filled |= ready
    return Image(out)


def _sweep(data: np.ndarray, geom: PatchGeometry, cfg: SolverConfig, use_ar: bool):
    """One pass of group → model → shrink → aggregate over the whole image.

    Returns the aggregated (h, w, c) canvas (no known-pixel reinsertion)
    and the mean per-group residual. Results are reduced in reference
    order, so the worker count never changes the output.
    """
    h, w, c = data.shape
    stack = PatchStack(data, geom.n)
    refs = enumerate_refs(w, h, geom)
    n2 = geom.n * geom.n

    def update(ref):
        group = stack.match(ref, geom)
        y2 = stack.columns(group)
        residuals = []
        if use_ar:
            preds = []
            for ch in range(c):
                support = build_support(data[:, :, ch], group, cfg.offsets)
                target = y2[ch * n2 : (ch + 1) * n2].reshape(-1, order="F")
                sol = solve_ar(support, target, cfg.alpha)
                preds.append(
                    predict(support, sol.phi).reshape((n2, group.size), order="F")
                )
                residuals.append(sol.residual_norm)
            y1 = np.concatenate(preds, axis=0)
        else:
            y1 = y2
        m = joint_update(y1, y2, cfg.mu, cfg.tau)
        if not use_ar:
            residuals.append(float(np.linalg.norm(m - y2)))
        return group, m, residuals

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(update, refs))
    else:
        results = [update(ref) for ref in refs]

    canvas = aggregate(((g, m) for g, m, _ in results), w, h, c)
    mean_residual = float(np.mean([r for _, _, rs in results for r in rs]))
    return canvas, mean_residual


def _record(est, reference, mean_residual, seconds) -> IterationRecord:
    psnr_db = None
    if reference is not None:
        psnr_db = metrics.psnr(reference, np.clip(est, 0.0, 1.0))
    return IterationRecord(psnr_db=psnr_db, mean_residual=mean_residual, seconds=seconds)


def _check_inputs(degraded: Image, mask: Mask, cfg: SolverConfig):
    if mask.known.shape != degraded.data.shape[:2]:
        raise ValueError(
            f"mask {mask.known.shape} does not match image "
            f"{degraded.data.shape[:2]}"
        )
    if cfg.h != degraded.channels:
        raise ValueError(
            f"config expects {cfg.h} channel(s) but the image has "
            f"{degraded.channels}"
        )


def complete(degraded: Image, mask: Mask, cfg: SolverConfig, reference=None,
             progress=None):
    """Run the full completion loop; returns (restored image, iteration trace).

    Three-channel inputs are routed to complete_color; mode "marlow" there
    means the channel-joint pipeline. `progress`, if given, is called with
    (iteration number, IterationRecord) after each outer iteration.
    """
    if degraded.channels == 3:
        return complete_color(degraded, mask, cfg, reference, progress)
    if cfg.mode in ("color_separate", "color_simultaneous"):
        raise ValueError(f"mode {cfg.mode!r} needs a 3-channel image")
    _check_inputs(degraded, mask, cfg)

    known = mask.known
    est = initialize(degraded, mask).data.copy()
    geom = PatchGeometry(cfg.n, 1, cfg.stride, cfg.search_radius, cfg.N)
    use_ar = cfg.mode == "marlow"
    trace = []
    for _ in range(cfg.max_iter):
        t0 = time.perf_counter()
        canvas, mean_residual = _sweep(est, geom, cfg, use_ar)
        canvas[known] = degraded.data[known]
        est = canvas
        trace.append(_record(est, reference, mean_residual, time.perf_counter() - t0))
        if progress is not None:
            progress(len(trace), trace[-1])
    return Image(np.clip(est, 0.0, 1.0)), trace


def complete_color(degraded: Image, mask: Mask, cfg: SolverConfig, reference=None,
                   progress=None):
    """Color completion; see SolverConfig.mode for the channel strategy.

    "color_simultaneous" (and "marlow") matches 3-channel patches and
    shrinks the channel-stacked patch matrix, with the AR model solved per
    channel on channel-wise supports. "lowrank_only" is the same without
    the AR step. "color_separate" runs the single-channel pipeline on each
    channel independently (iterations kept in lockstep for the trace).
    """
    if degraded.channels != 3:
        raise ValueError("color completion needs a 3-channel image")
    _check_inputs(degraded, mask, cfg)

    known = mask.known
    est = initialize(degraded, mask).data.copy()
    trace = []

    if cfg.mode == "color_separate":
        geom = PatchGeometry(cfg.n, 1, cfg.stride, cfg.search_radius, cfg.N)
        for _ in range(cfg.max_iter):
            t0 = time.perf_counter()
            planes = []
            residuals = []
            for ch in range(3):
                canvas, res = _sweep(est[:, :, ch : ch + 1], geom, cfg, use_ar=True)
                planes.append(canvas[:, :, 0])
                residuals.append(res)
            canvas = np.stack(planes, axis=2)
            canvas[known] = degraded.data[known]
            est = canvas
            trace.append(
                _record(est, reference, float(np.mean(residuals)),
                        time.perf_counter() - t0)
            )
            if progress is not None:
                progress(len(trace), trace[-1])
        return Image(np.clip(est, 0.0, 1.0)), trace

    geom = PatchGeometry(cfg.n, 3, cfg.stride, cfg.search_radius, cfg.N)
    use_ar = cfg.mode != "lowrank_only"
    for _ in range(cfg.max_iter):
        t0 = time.perf_counter()
        canvas, mean_residual = _sweep(est, geom, cfg, use_ar)
        canvas[known] = degraded.data[known]
        est = canvas
        trace.append(_record(est, reference, mean_residual, time.perf_counter() - t0))
        if progress is not None:
            progress(len(trace), trace[-1])
    return Image(np.clip(est, 0.0, 1.0)), trace
