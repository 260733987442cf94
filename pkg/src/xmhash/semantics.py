"""Label-derived pairwise similarity in factorized form.

The pairwise similarity matrix is S = 2 L^T L - 1 1^T over label columns.
It is never materialized in the training path: every product against S is
expanded through the c x n label matrix so the cost stays linear in n. The
dense form exists only as a small-scale oracle for tests.
"""

from __future__ import annotations

import numpy as np

from .data import LabelMatrix

DENSE_GUARD = 2000


def dense_similarity(L: LabelMatrix) -> np.ndarray:
    """Materialize S = 2 L^T L - 11^T. Test oracle only; guarded by size."""
    if L.n > DENSE_GUARD:
        raise ValueError(
            f"refusing to materialize {L.n}x{L.n} similarity; use the factorized products"
        )
    Lv = L.values
    return 2.0 * (Lv.T @ Lv) - 1.0


def right_multiply_S(M: np.ndarray, L: LabelMatrix) -> np.ndarray:
    """Compute M @ S without forming S: 2 (M L^T) L - (M 1) 1^T."""
    Lv = L.values
    M = np.asarray(M, dtype=np.float64)
    if M.shape[1] != Lv.shape[1]:
        raise ValueError(f"M has {M.shape[1]} columns, labels have {Lv.shape[1]} instances")
    return 2.0 * ((M @ Lv.T) @ Lv) - M.sum(axis=1, keepdims=True)


def label_gram(L: LabelMatrix, ridge: float = 0.0) -> np.ndarray:
    """L L^T + ridge * I (c x c), positive definite for ridge > 0."""
    Lv = L.values
    G = Lv @ Lv.T
    if ridge:
        G = G + ridge * np.eye(G.shape[0])
    return G


def similarity_sqnorm(L: LabelMatrix) -> float:
    """||S||_F^2 via ||2 L^T L - 11^T||^2 = 4||L L^T||^2 - 4 ||L 1||^2 + n^2."""
    Lv = L.values
    n = Lv.shape[1]
    row_sums = Lv.sum(axis=1)
    return float(4.0 * np.sum((Lv @ Lv.T) ** 2) - 4.0 * row_sums @ row_sums + n * n)


def trace_S_inner(P: np.ndarray, Q: np.ndarray, L: LabelMatrix) -> float:
    """tr(S^T P^T Q) in O(n): 2 tr((L P^T)(Q L^T)) - (P 1) . (Q 1)."""
    Lv = L.values
    lp = Lv @ P.T  # c x k
    lq = Lv @ Q.T
    return float(2.0 * np.sum(lp * lq) - P.sum(axis=1) @ Q.sum(axis=1))
