"""Multiplanar autoregression over the cross-sections of a patch group.

Each cube pixel (j, k, l) — position (j, k) inside the l-th most similar
patch — is modeled as a linear combination of supporting pixels taken at
planar offsets m (neighboring planes of the cube) and spatial offsets
(p, q) (neighboring image positions). The weights are shared across the
whole cube and fitted by Tikhonov-regularized least squares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .patches import PatchGroup, _samples

# Relative infinity-norm tolerance on the normal-equation residual.
_NORMAL_EQ_TOL = 1e-10


@dataclass(frozen=True)
class AROffsets:
    """Support stencil: planar offsets x spatial offsets, minus the null triple.

    The triple (m, p, q) = (0, 0, 0) is always excluded — a pixel may not
    support itself. Order of the design-matrix columns is planar-major:
    all spatial offsets of planar[0], then of planar[1], and so on.
    """

    planar: tuple
    spatial: tuple

    def __post_init__(self):
        object.__setattr__(self, "planar", tuple(int(m) for m in self.planar))
        object.__setattr__(
            self, "spatial", tuple((int(p), int(q)) for p, q in self.spatial)
        )
        if self.order < 1:
            raise ValueError("offset sets must yield at least one supporting pixel")

    @property
    def triples(self):
        return tuple(
            (m, p, q)
            for m in self.planar
            for (p, q) in self.spatial
            if (m, p, q) != (0, 0, 0)
        )

    @property
    def order(self) -> int:
        return len(self.triples)

    @classmethod
    def default(cls) -> "AROffsets":
        """Same plane + next-most-similar plane, 3x3 spatial window: order 17."""
        spatial = tuple((p, q) for p in (-1, 0, 1) for q in (-1, 0, 1))
        return cls(planar=(0, 1), spatial=spatial)


@dataclass
class ARSolution:
    """Fitted weights and the data-space residual norm ||x - Y_hat @ phi||_2."""

    phi: np.ndarray
    residual_norm: float


def build_support(plane, group: PatchGroup, offsets: AROffsets) -> np.ndarray:
    """Design matrix of supporting pixel values, (n^2 * N) rows x order columns.

    `plane` is one channel of the intermediate image, (h, w) or an Image
    with a single channel. Row l*n^2 + (j*n + k) belongs to cube pixel
    (j, k, l); its entry for offset (m, p, q) is the image value at patch
    (l + m) mod N's top-left plus (j + p, k + q), with the spatial position
    clamped to the image bounds. Plane indices wrap cyclically over the
    group's similarity order.
    """
    data = _samples(plane)
    if data.shape[2] != 1:
        raise ValueError("build_support works on a single channel plane")
    data = data[:, :, 0]
    h, w = data.shape
    n = group.n
    N = group.size
    tlr = np.fromiter((r for r, _ in group.coords), dtype=np.intp)
    tlc = np.fromiter((c for _, c in group.coords), dtype=np.intp)
    jj, kk = np.divmod(np.arange(n * n), n)  # row-major position inside the patch

    cols = np.empty((n * n * N, offsets.order))
    for col_idx, (m, p, q) in enumerate(offsets.triples):
        perm = (np.arange(N) + m) % N
        rows = np.clip(tlr[perm][None, :] + jj[:, None] + p, 0, h - 1)
        ccol = np.clip(tlc[perm][None, :] + kk[:, None] + q, 0, w - 1)
        cols[:, col_idx] = data[rows, ccol].reshape(-1, order="F")
    return cols


def solve_ar(support: np.ndarray, target: np.ndarray, alpha: float) -> ARSolution:
    """Ridge solve of (S^T S + alpha^2 I) phi = S^T x.

    Uses a symmetric positive-definite factorization with one refinement
    step if the normal-equation residual exceeds the solver tolerance.
    A rank-deficient system with alpha = 0 raises.
    """
    support = np.asarray(support, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).ravel()
    if support.shape[0] != target.shape[0]:
        raise ValueError(
            f"target length {target.shape[0]} does not match {support.shape[0]} rows"
        )
    if alpha < 0:
        raise ValueError("alpha must be >= 0")

    gram = support.T @ support + (alpha * alpha) * np.eye(support.shape[1])
    rhs = support.T @ target
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "singular support matrix; pass alpha > 0 to regularize"
        ) from exc
    phi = scipy.linalg.cho_solve(factor, rhs)

    scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
    for _ in range(5):
        resid = rhs - gram @ phi
        if float(np.abs(resid).max(initial=0.0)) <= _NORMAL_EQ_TOL * scale:
            break
        phi = phi + scipy.linalg.cho_solve(factor, resid)

    residual_norm = float(np.linalg.norm(target - support @ phi))
    return ARSolution(phi=phi, residual_norm=residual_norm)


def predict(support: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Modeled cube pixels S @ phi; caller reshapes to the patch-matrix layout."""
    support = np.asarray(support, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64).ravel()
    if support.shape[1] != phi.shape[0]:
        raise ValueError(
            f"phi length {phi.shape[0]} does not match {support.shape[1]} columns"
        )
    return support @ phi
