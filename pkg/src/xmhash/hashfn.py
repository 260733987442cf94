"""Second step: per-modality linear hash functions learned from the codes.

Each modality gets a ridge-regression map W from its kernelized features
onto the step-one codes; out-of-sample instances are encoded by kernelizing
against the training anchors and taking the sign of W phi(x).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, array_bytes, array_from_bytes
from .kernelize import KernelModel, apply_kernel
from .optimizer import sgn

MODEL_MAGIC = b"A2LHMODL"


@dataclass(frozen=True)
class HashModel:
    """Deployable artifact: per-modality kernels and linear maps."""

    W: list[np.ndarray]  # k x q_m each
    kernels: list[KernelModel] | None  # None when trained on raw features
    k: int

    def __post_init__(self):
        for m, w in enumerate(self.W):
            if w.shape[0] != self.k:
                raise ValueError(f"W[{m}] has {w.shape[0]} rows, expected k={self.k}")
            if self.kernels is not None and w.shape[1] != self.kernels[m].q:
                raise ValueError(
                    f"W[{m}] has {w.shape[1]} cols, kernel model has q={self.kernels[m].q}"
                )

    @property
    def n_modalities(self) -> int:
        return len(self.W)


def learn_hash_function(B: np.ndarray, phiX: np.ndarray, omega: float) -> np.ndarray:
    """Ridge solution W = B phi^T (phi phi^T + omega I)^{-1}."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if not (np.all(np.isfinite(B)) and np.all(np.isfinite(phiX))):
        raise ValueError("non-finite training inputs")
    if B.shape[1] != phiX.shape[1]:
        raise ValueError(f"codes have {B.shape[1]} instances, features have {phiX.shape[1]}")
    q = phiX.shape[0]
    G = phiX @ phiX.T + omega * np.eye(q)
    return np.linalg.solve(G, phiX @ B.T).T


def encode(hm: HashModel, m: int, X_raw: FeatureMatrix) -> np.ndarray:
    """Encode out-of-sample instances of modality m into +-1 codes."""
    if not (0 <= m < hm.n_modalities):
        raise IndexError(f"modality index {m} out of range for M={hm.n_modalities}")
    if hm.kernels is not None:
        phi = apply_kernel(hm.kernels[m], X_raw).values
    else:
        phi = X_raw.values
    if phi.shape[0] != hm.W[m].shape[1]:
        raise ValueError(
            f"feature dim {phi.shape[0]} does not match W[{m}] cols {hm.W[m].shape[1]}"
        )
    return sgn(hm.W[m] @ phi)


def save_hash_model(hm: HashModel, path) -> None:
    """Write the model as a JSON header line plus concatenated matrix blobs.

    Offsets in the header are byte positions into the payload that follows
    the header's terminating newline. Round-trips bit-exactly.
    """
    blobs: list[bytes] = []
    offset = 0
    mods = []
    for m in range(hm.n_modalities):
        entry: dict = {"modality_id": m, "w_offset": offset}
        wb = array_bytes(hm.W[m])
        blobs.append(wb)
        offset += len(wb)
        if hm.kernels is not None:
            km = hm.kernels[m]
            ab = array_bytes(km.anchors)
            entry.update(
                anchors_offset=offset,
                width=km.width,
                dim=int(km.anchors.shape[0]),
                q=int(km.q),
            )
            blobs.append(ab)
            offset += len(ab)
        else:
            entry.update(dim=int(hm.W[m].shape[1]), q=int(hm.W[m].shape[1]))
        mods.append(entry)
    header = {
        "magic": MODEL_MAGIC.decode(),
        "format_version": 1,
        "M": hm.n_modalities,
        "k": hm.k,
        "kernelized": hm.kernels is not None,
        "modalities": mods,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for b in blobs:
            f.write(b)


def load_hash_model(path) -> HashModel:
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    header = json.loads(header_line)
    if header.get("magic") != MODEL_MAGIC.decode():
        raise ValueError(f"{path}: not a hash model file")
    W = []
    kernels: list[KernelModel] | None = [] if header["kernelized"] else None
    for entry in header["modalities"]:
        W.append(array_from_bytes(payload[entry["w_offset"]:]))
        if kernels is not None:
            anchors = array_from_bytes(payload[entry["anchors_offset"]:])
            kernels.append(
                KernelModel(anchors=anchors, width=entry["width"], modality_id=entry["modality_id"])
            )
    return HashModel(W=W, kernels=kernels, k=header["k"])
