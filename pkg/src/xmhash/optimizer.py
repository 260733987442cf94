"""Alternating minimization producing binary codes from kernelized modalities.

One training sweep updates, in order: the adaptive modality weights, the
label projection R, the code-space map C, the binary codes B, the common
space U, and then per modality the orthogonal map V, its auxiliary copy K,
and the dual matrix. R/C/U have closed-form ridge solutions, B is a sign
step, and V/K are orthogonal Procrustes steps via SVD. Every product
against the pairwise similarity matrix goes through the factorized label
form, so a sweep costs O(n) at fixed code length, class count, and kernel
dimension.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, FeatureMatrix, LabelMatrix
from .kernelize import DEFAULT_ANCHORS, KernelModel, apply_kernel, fit_kernel
from .semantics import right_multiply_S, similarity_sqnorm, trace_S_inner

VARIANTS = ("full", "no_kernel", "no_multisemantic", "relaxed_B")


@dataclass
class Hyperparams:
    """Training hyperparameters; defaults follow the reported stable settings."""

    k: int
    alpha: float = 1e-2
    beta: float = 10.0
    eta: float = 1e-3
    lam: float = 1e-4
    omega: float = 1e-2
    zeta: float = 2.0
    T: int = 50
    tol: float = 1e-4
    ridge: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("code length k must be >= 1")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.zeta != 0.0 and self.zeta < 2.0:
            raise ValueError("zeta must be >= 2 (or 0 to disable weight adaptation)")


@dataclass
class TrainState:
    """All optimizer variables for one run. Mutated in place by the updates."""

    mu: np.ndarray  # (M,) simplex weights
    U: np.ndarray  # q x n common space
    V: list[np.ndarray]  # per modality, d_m x q with orthonormal columns
    K: list[np.ndarray]  # auxiliary copies of V
    LambdaV: list[np.ndarray]  # dual matrices
    C: np.ndarray  # k x q
    R: np.ndarray | None  # k x c, absent for the no_multisemantic variant
    B: np.ndarray  # k x n, +-1 (real-valued while iterating the relaxed variant)
    phiX: list[np.ndarray]  # per modality, d_m x n inputs to the association term
    L: LabelMatrix

    @property
    def n_modalities(self) -> int:
        return len(self.phiX)

    def code_target(self) -> np.ndarray:
        """The k x n real factor paired against CU in the asymmetric term."""
        return self.R @ self.L.values if self.R is not None else self.B


@dataclass
class TrainTrace:
    """Per-iteration objective values, weights, and wall-clock seconds."""

    objective: list[float] = field(default_factory=list)
    mu: list[np.ndarray] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    variant: str = "full"

    def normalized(self) -> np.ndarray:
        obj = np.asarray(self.objective)
        lo, hi = obj.min(), obj.max()
        if hi == lo:
            return np.zeros_like(obj)
        return (obj - lo) / (hi - lo)

    def write_csv(self, path) -> None:
        M = len(self.mu[0]) if self.mu else 0
        norm = self.normalized()
        with open(path, "w") as f:
            mu_cols = ",".join(f"mu_{m + 1}" for m in range(M))
            f.write(f"# variant={self.variant}\n")
            f.write(f"iteration,raw_objective,normalized_objective,{mu_cols},seconds\n")
            for i, (raw, mu, sec) in enumerate(zip(self.objective, self.mu, self.seconds)):
                mu_s = ",".join(f"{v:.10g}" for v in mu)
                f.write(f"{i},{raw:.10g},{norm[i]:.10g},{mu_s},{sec:.6g}\n")


def _solve_spd(A: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    """Solve (A + ridge * scale * I) X = rhs for symmetric psd A.

    The ridge is scaled by the mean diagonal of A so a single relative
    setting works across differently scaled subproblems.
    """
    p = A.shape[0]
    scale = np.trace(A) / p
    if scale <= 0:
        scale = 1.0
    return np.linalg.solve(A + ridge * scale * np.eye(p), rhs)


def _solve_right(lhs: np.ndarray, G: np.ndarray, ridge: float) -> np.ndarray:
    """Compute lhs @ inv(G + ridge * scale * I) for symmetric psd G."""
    p = G.shape[0]
    scale = np.trace(G) / p
    if scale <= 0:
        scale = 1.0
    Gr = G + ridge * scale * np.eye(p)
    return np.linalg.solve(Gr, lhs.T).T


def sgn(x: np.ndarray) -> np.ndarray:
    """Elementwise sign with sgn(0) = +1, the project-wide tie-break."""
    return np.where(x >= 0, 1.0, -1.0)


def init_state(phiX: list[np.ndarray], L: LabelMatrix, h: Hyperparams) -> TrainState:
    """Seed-deterministic initialization of all optimizer variables."""
    n = L.n
    for X in phiX:
        if X.shape[1] != n:
            raise ValueError("all modalities must share the label instance count")
    M = len(phiX)
    q = min(X.shape[0] for X in phiX)
    rng = np.random.default_rng([h.seed, 0x11])
    return TrainState(
        mu=np.full(M, 1.0 / M),
        U=0.01 * rng.normal(size=(q, n)),
        V=[np.eye(X.shape[0], q) for X in phiX],
        K=[np.eye(X.shape[0], q) for X in phiX],
        LambdaV=[np.zeros((X.shape[0], q)) for X in phiX],
        C=0.01 * rng.normal(size=(h.k, q)),
        R=0.01 * rng.normal(size=(h.k, L.n_classes)),
        B=sgn(rng.normal(size=(h.k, n))),
        phiX=[np.asarray(X, dtype=np.float64) for X in phiX],
        L=L,
    )


def association_residuals(s: TrainState) -> np.ndarray:
    """Per-modality squared residual ||phi(X_m) - V_m U||_F^2."""
    return np.array(
        [float(np.sum((X - V @ s.U) ** 2)) for X, V in zip(s.phiX, s.V)]
    )


def update_mu(s: TrainState, h: Hyperparams) -> None:
    """Adaptive modality weights: mu_m proportional to Delta_m^(1/(1-zeta)).

    zeta == 0 disables adaptation (weights stay uniform), reproducing the
    degenerate sweep point where modality contributions are ignored.
    """
    if h.zeta == 0.0:
        s.mu[:] = 1.0 / s.n_modalities
        return
    delta = association_residuals(s)
    zero = delta == 0.0
    if zero.any():
        s.mu[:] = np.where(zero, 1.0 / zero.sum(), 0.0)
        return
    w = delta ** (1.0 / (1.0 - h.zeta))
    s.mu[:] = w / w.sum()


def update_R(s: TrainState, h: Hyperparams) -> None:
    """Closed-form label projection from the asymmetric + embedding terms."""
    CU = s.C @ s.U
    A = CU @ CU.T + (h.beta + h.eta) * np.eye(h.k)
    rhs = h.k * (right_multiply_S(CU, s.L) @ s.L.values.T) + h.beta * (s.B @ s.L.values.T)
    left = _solve_spd(A, rhs, h.ridge)
    G = s.L.values @ s.L.values.T
    s.R = _solve_right(left, G, h.ridge)


def update_C(s: TrainState, h: Hyperparams) -> None:
    """Closed-form common-space-to-code map."""
    P = s.code_target()
    A = P @ P.T + h.alpha * np.eye(h.k)
    rhs = h.k * (right_multiply_S(P, s.L) @ s.U.T) + h.alpha * (s.B @ s.U.T)
    left = _solve_spd(A, rhs, h.ridge)
    G = s.U @ s.U.T
    s.C = _solve_right(left, G, h.ridge)


def update_B(s: TrainState, h: Hyperparams, relaxed: bool = False) -> None:
    """Code update maximizing tr((alpha CU + beta RL) B^T) over +-1 matrices.

    The sign of the coefficient matrix is the exact maximizer; the relaxed
    variant keeps the real-valued average instead and quantizes only at the
    end of training. Without the label projection the linear coefficient
    comes from the asymmetric term, alpha CU + k (CU) S.
    """
    CU = s.C @ s.U
    if s.R is not None:
        score = h.alpha * CU + h.beta * (s.R @ s.L.values)
        if relaxed:
            s.B = score / (h.alpha + h.beta)
            return
    else:
        score = h.alpha * CU + h.k * right_multiply_S(CU, s.L)
    s.B = sgn(score)


def update_U(s: TrainState, h: Hyperparams) -> None:
    """Closed-form common space; association terms summed over modalities."""
    P = s.code_target()
    q = s.U.shape[0]
    A = s.C.T @ (P @ P.T) @ s.C + h.alpha * (s.C.T @ s.C) + h.eta * np.eye(q)
    rhs = h.k * right_multiply_S(s.C.T @ P, s.L) + h.alpha * (s.C.T @ s.B)
    for m in range(s.n_modalities):
        w = s.mu[m] ** h.zeta
        A += w * (s.V[m].T @ s.V[m])
        rhs += w * (s.V[m].T @ s.phiX[m])
    s.U = _solve_spd(A, rhs, h.ridge)


def procrustes(O: np.ndarray) -> np.ndarray:
    """argmax_{V^T V = I} tr(O V^T) via the SVD of O."""
    if not np.all(np.isfinite(O)):
        raise ValueError("non-finite entries in Procrustes target")
    P, _, Qt = np.linalg.svd(O, full_matrices=False)
    return P @ Qt


def update_V(s: TrainState, h: Hyperparams, m: int, UUt: np.ndarray | None = None) -> None:
    """Orthogonal modality map via Procrustes on the penalized target.

    UUt may carry a precomputed U @ U.T; the V/K block keeps U fixed, so a
    sweep shares one gram matrix across modalities.
    """
    w = s.mu[m] ** h.zeta
    if UUt is None:
        UUt = s.U @ s.U.T
    O = 2.0 * w * (s.phiX[m] @ s.U.T) - w * (s.K[m] @ UUt) + h.lam * s.K[m] - s.LambdaV[m]
    s.V[m] = procrustes(O)


def update_K(s: TrainState, h: Hyperparams, m: int, UUt: np.ndarray | None = None) -> None:
    """Auxiliary orthogonal copy via Procrustes on its penalized target."""
    w = s.mu[m] ** h.zeta
    if UUt is None:
        UUt = s.U @ s.U.T
    Ok = -w * (s.V[m] @ UUt) + h.lam * s.V[m] + s.LambdaV[m]
    s.K[m] = procrustes(Ok)


def update_lambda(s: TrainState, h: Hyperparams, m: int) -> None:
    """Dual ascent on the V = K coupling."""
    s.LambdaV[m] = s.LambdaV[m] + h.lam * (s.V[m] - s.K[m])


def objective(s: TrainState, h: Hyperparams) -> float:
    """Overall training objective, evaluated without materializing S.

    The asymmetric term expands as tr((PP^T)(QQ^T)) - 2k tr(S^T P^T Q)
    + k^2 ||S||_F^2 with P the code target and Q = CU; both S-products use
    the factorized label form.
    """
    P = s.code_target()
    Q = s.C @ s.U
    asym = (
        float(np.sum((P @ P.T) * (Q @ Q.T)))
        - 2.0 * h.k * trace_S_inner(P, Q, s.L)
        + h.k**2 * similarity_sqnorm(s.L)
    )
    quant = h.alpha * float(np.sum((s.B - Q) ** 2))
    total = asym + quant
    if s.R is not None:
        RL = s.R @ s.L.values
        total += h.beta * float(np.sum((RL - s.B) ** 2))
        total += h.eta * float(np.sum(RL**2))
    total += h.eta * float(np.sum(s.U**2))
    total += float(np.dot(s.mu**h.zeta, association_residuals(s)))
    return total


def sweep(s: TrainState, h: Hyperparams, variant: str = "full") -> None:
    """One full alternating pass in the stated update order."""
    update_mu(s, h)
    if s.R is not None:
        update_R(s, h)
    update_C(s, h)
    update_B(s, h, relaxed=(variant == "relaxed_B"))
    update_U(s, h)
    UUt = s.U @ s.U.T
    for m in range(s.n_modalities):
        update_V(s, h, m, UUt)
        update_K(s, h, m, UUt)
        update_lambda(s, h, m)


@dataclass
class TrainResult:
    B: np.ndarray
    state: TrainState
    trace: TrainTrace
    kernels: list[KernelModel] | None
    phiX: list[np.ndarray]


def train_step1(
    ds: Dataset,
    h: Hyperparams,
    variant: str = "full",
    q: int | None = None,
) -> TrainResult:
    """Run the full first-step optimization on a dataset.

    Kernelizes each modality (except for the no_kernel variant, which uses
    raw features and a common-space dimension of the smallest modality),
    then alternates sweeps until the relative objective change drops below
    tol or T iterations elapse. Returns the final +-1 codes; the relaxed
    variant quantizes once at termination.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")

    if variant == "no_kernel":
        kernels = None
        phiX = [fm.values for fm in ds.modalities]
    else:
        if q is None:
            q = min(DEFAULT_ANCHORS, ds.n)
        kernels = [fit_kernel(fm, q, h.seed) for fm in ds.modalities]
        phiX = [apply_kernel(km, fm).values for km, fm in zip(kernels, ds.modalities)]

    s = init_state(phiX, ds.labels, h)
    if variant == "no_multisemantic":
        s.R = None

    trace = TrainTrace(variant=variant)
    prev = None
    for _ in range(h.T):
        t0 = time.perf_counter()
        sweep(s, h, variant)
        obj = objective(s, h)
        trace.objective.append(obj)
        trace.mu.append(s.mu.copy())
        trace.seconds.append(time.perf_counter() - t0)
        if prev is not None and abs(prev - obj) < h.tol * max(abs(prev), 1e-30):
            break
        prev = obj

    if variant == "relaxed_B":
        s.B = sgn(s.B)
    return TrainResult(B=s.B, state=s, trace=trace, kernels=kernels, phiX=phiX)
