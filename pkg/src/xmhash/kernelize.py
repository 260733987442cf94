"""RBF anchor kernel feature map.

A kernel model holds q anchor columns sampled from the training matrix and
a width rho; applying it maps a d x n matrix to its q x n kernelized
representation with entries exp(-||x_i - a_j||^2 / (2 rho^2)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import FeatureMatrix

DEFAULT_ANCHORS = 2500
_WIDTH_SUBSAMPLE = 2000


@dataclass(frozen=True)
class KernelModel:
    anchors: np.ndarray  # d x q, actual training columns
    width: float
    modality_id: int = 0

    def __post_init__(self):
        if self.anchors.ndim != 2 or self.anchors.shape[1] < 1:
            raise ValueError("anchors must be a d x q matrix with q >= 1")
        if self.width <= 0:
            raise ValueError("width must be positive")

    @property
    def q(self) -> int:
        return self.anchors.shape[1]


def fit_kernel(X: FeatureMatrix, q: int, seed: int) -> KernelModel:
    """Sample q anchor columns and set the RBF width from the data scale.

    Anchors are drawn uniformly without replacement; the seed stream is
    offset by modality_id so modalities get independent but reproducible
    draws. The width is the mean point-to-anchor Euclidean distance over a
    subsample of at most 2000 training points, falling back to 1.0 when
    that mean is zero (e.g. all points coincide).
    """
    n = X.n
    if not (1 <= q <= n):
        raise ValueError(f"need 1 <= q <= n, got q={q}, n={n}")
    rng = np.random.default_rng([seed, 0xA0 + X.modality_id])
    idx = rng.choice(n, size=q, replace=False)
    anchors = X.values[:, idx].copy()

    if n > _WIDTH_SUBSAMPLE:
        sub = X.values[:, rng.choice(n, size=_WIDTH_SUBSAMPLE, replace=False)]
    else:
        sub = X.values
    rho = float(cdist(sub.T, anchors.T).mean())
    if rho == 0.0:
        rho = 1.0
    return KernelModel(anchors=anchors, width=rho, modality_id=X.modality_id)


def apply_kernel(km: KernelModel, X: FeatureMatrix) -> FeatureMatrix:
    """Map raw features to RBF similarities against the anchors (q x n)."""
    if X.dim != km.anchors.shape[0]:
        raise ValueError(
            f"feature dim {X.dim} does not match anchor dim {km.anchors.shape[0]}"
        )
    sq = cdist(km.anchors.T, X.values.T, "sqeuclidean")
    return FeatureMatrix(np.exp(-sq / (2.0 * km.width**2)), modality_id=X.modality_id)
