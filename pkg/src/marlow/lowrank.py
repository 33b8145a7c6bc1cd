"""Singular value thresholding and the fused low-rank update.

The patch matrix of a group of similar patches is approximately low rank;
soft-thresholding its singular values is the proximal operator of the
nuclear norm. The fused update blends the autoregressive prediction with
the current patch matrix before shrinking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ShrinkResult:
    """Shrunk matrix plus the spectrum before and after thresholding."""

    matrix: np.ndarray
    singular_values_before: np.ndarray
    singular_values_after: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.singular_values_after))


def svt(matrix: np.ndarray, tau: float) -> ShrinkResult:
    """Soft-threshold the singular values of `matrix` by `tau`."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {matrix.shape}")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if not np.all(np.isfinite(matrix)):
        raise np.linalg.LinAlgError("non-finite entries in the matrix passed to svt")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    shrunk = np.maximum(s - tau, 0.0)
    rank = int(np.count_nonzero(shrunk))
    out = (u[:, :rank] * shrunk[:rank]) @ vt[:rank]
    return ShrinkResult(
        matrix=out, singular_values_before=s, singular_values_after=shrunk
    )


def fusion_weight(mu: float) -> float:
    """Weight on the observed patch matrix in the fused update: mu / (mu + 1)."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    return mu / (mu + 1.0)


def joint_update(y1: np.ndarray, y2: np.ndarray, mu: float, tau=None) -> np.ndarray:
    """Minimizer of ||M - Y1||_F^2 + mu ||M - Y2||_F^2 + mu ||M||_*.

    Completing the square fuses the two quadratic terms into a single one
    around (1 - lam) Y1 + lam Y2 with lam = mu / (mu + 1), scaled by
    (1 + mu); the nuclear term then shrinks by lam / 2. Passing `tau`
    overrides that derived threshold.
    """
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if y1.shape != y2.shape:
        raise ValueError(f"shape mismatch: {y1.shape} vs {y2.shape}")
    lam = fusion_weight(mu)
    if tau is None:
        tau = lam / 2.0
    blended = (1.0 - lam) * y1 + lam * y2
    return svt(blended, tau).matrix
