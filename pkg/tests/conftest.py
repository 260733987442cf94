"""Shared fixtures and dense-matrix oracles for the test suite.

The oracles here deliberately materialize the n x n similarity matrix and
evaluate objectives by brute force; they stay independent of the factorized
production paths they are used to check.
"""

import numpy as np
import pytest

from xmhash.data import LabelMatrix
from xmhash.optimizer import Hyperparams, TrainState, init_state
from xmhash.semantics import dense_similarity


def random_labels(rng, c, n, multi=False) -> LabelMatrix:
    """Single-label (or 1-3-label) matrix covering every class."""
    classes = np.concatenate([np.arange(c), rng.integers(0, c, size=n - c)])
    rng.shuffle(classes)
    L = np.zeros((c, n))
    L[classes, np.arange(n)] = 1.0
    if multi:
        for i in range(n):
            extra = rng.integers(0, 3)
            if extra:
                L[rng.choice(c, size=extra, replace=False), i] = 1.0
    return LabelMatrix(L)


def random_state(rng, n=40, k=8, c=3, q=10, M=2, h=None) -> tuple[TrainState, Hyperparams]:
    """A fully random (non-degenerate) optimizer state for update checks."""
    if h is None:
        h = Hyperparams(k=k, seed=int(rng.integers(0, 2**31)))
    L = random_labels(rng, c, n)
    phiX = [rng.normal(size=(q, n)) for _ in range(M)]
    s = init_state(phiX, L, h)
    # random but valid contents: orthogonal V/K, simplex mu, +-1 B
    s.U = rng.normal(size=(q, n))
    s.C = rng.normal(size=(k, q))
    s.R = rng.normal(size=(k, c))
    s.B = np.where(rng.normal(size=(k, n)) >= 0, 1.0, -1.0)
    for m in range(M):
        s.V[m], _ = np.linalg.qr(rng.normal(size=(q, q)))
        s.K[m], _ = np.linalg.qr(rng.normal(size=(q, q)))
        s.LambdaV[m] = 0.1 * rng.normal(size=(q, q))
    w = rng.uniform(0.2, 1.0, size=M)
    s.mu = w / w.sum()
    return s, h


def dense_objective(s: TrainState, h: Hyperparams) -> float:
    """Brute-force evaluation of the training objective with explicit S."""
    S = dense_similarity(s.L)
    Lv = s.L.values
    P = s.R @ Lv if s.R is not None else s.B
    Q = s.C @ s.U
    total = np.sum((P.T @ Q - h.k * S) ** 2)
    total += h.alpha * np.sum((s.B - Q) ** 2)
    if s.R is not None:
        RL = s.R @ Lv
        total += h.beta * np.sum((RL - s.B) ** 2)
        total += h.eta * np.sum(RL**2)
    total += h.eta * np.sum(s.U**2)
    for m in range(s.n_modalities):
        total += s.mu[m] ** h.zeta * np.sum((s.phiX[m] - s.V[m] @ s.U) ** 2)
    return float(total)


def sub_objective_R(R, s, h, S):
    Lv = s.L.values
    RL = R @ Lv
    Q = s.C @ s.U
    return (
        np.sum((RL.T @ Q - h.k * S) ** 2)
        + h.beta * np.sum((RL - s.B) ** 2)
        + h.eta * np.sum(RL**2)
    )


def sub_objective_C(C, s, h, S):
    P = s.R @ s.L.values if s.R is not None else s.B
    Q = C @ s.U
    return np.sum((P.T @ Q - h.k * S) ** 2) + h.alpha * np.sum((s.B - Q) ** 2)


def sub_objective_U(U, s, h, S):
    P = s.R @ s.L.values if s.R is not None else s.B
    Q = s.C @ U
    total = np.sum((P.T @ Q - h.k * S) ** 2) + h.alpha * np.sum((s.B - Q) ** 2)
    for m in range(s.n_modalities):
        total += s.mu[m] ** h.zeta * np.sum((s.phiX[m] - s.V[m] @ U) ** 2)
    total += h.eta * np.sum(U**2)
    return total


def fd_gradient(f, x, step=1e-5):
    """Central finite-difference gradient of a scalar function of a matrix."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        orig = x[ij]
        x[ij] = orig + step
        fp = f(x)
        x[ij] = orig - step
        fm = f(x)
        x[ij] = orig
        g[ij] = (fp - fm) / (2 * step)
    return g


def gradient_residual(f, x_opt, x_ref, step=1e-5):
    """Relative max-norm of the FD gradient at x_opt.

    Normalized by the FD gradient magnitude at a reference (pre-update)
    point, so the check is scale-free.
    """
    g_opt = fd_gradient(f, np.array(x_opt, dtype=float), step)
    g_ref = fd_gradient(f, np.array(x_ref, dtype=float), step)
    return np.abs(g_opt).max() / (1.0 + np.abs(g_ref).max())


def random_orthogonal(rng, d, q=None):
    if q is None:
        q = d
    Q, _ = np.linalg.qr(rng.normal(size=(d, q)))
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
