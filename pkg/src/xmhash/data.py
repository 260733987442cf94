"""Matrix/label containers, serialization, splits, and synthetic bimodal data.

Matrices are stored columns-as-instances throughout: a feature matrix is
d x n (features x instances) and a label matrix is c x n with 0/1 entries.
The canonical on-disk container is a little-endian binary format (magic
"A2LH") that round-trips float64 data bit-exactly; CSV is a convenience
importer for external feature dumps.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"A2LH"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class MatrixParseError(ValueError):
    """Raised when a matrix file is malformed."""


@dataclass(frozen=True)
class FeatureMatrix:
    """One modality's features, columns are instances (d x n)."""

    values: np.ndarray
    modality_id: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"feature matrix must be 2-D and non-empty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            r, c = np.argwhere(~np.isfinite(v))[0]
            raise ValueError(f"non-finite feature entry at row {r}, col {c}")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelMatrix:
    """Binary label assignments, columns are instances (c x n)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError(f"label matrix must be 2-D with >= 1 class, got shape {v.shape}")
        if not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("label entries must be 0 or 1")
        empty = np.flatnonzero(v.sum(axis=0) == 0)
        if empty.size:
            raise ValueError(f"instance {empty[0]} carries no label")
        object.__setattr__(self, "values", v)

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Aligned multi-modal features plus labels, sharing instance order."""

    modalities: list[FeatureMatrix]
    labels: LabelMatrix

    def __post_init__(self):
        if not self.modalities:
            raise ValueError("dataset needs at least one modality")
        n = self.labels.n
        for fm in self.modalities:
            if fm.n != n:
                raise ValueError(
                    f"modality {fm.modality_id} has {fm.n} instances, labels have {n}"
                )

    @property
    def n(self) -> int:
        return self.labels.n

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            modalities=[
                FeatureMatrix(fm.values[:, idx], fm.modality_id) for fm in self.modalities
            ],
            labels=LabelMatrix(self.labels.values[:, idx]),
        )


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic bimodal class-prototype generator."""

    n: int
    c: int
    d1: int = 32
    d2: int = 24
    noise: float = 0.1
    seed: int = 0
    multi_label: bool = False

    def __post_init__(self):
        if not (self.n >= self.c >= 2):
            raise ValueError(f"need n >= c >= 2, got n={self.n}, c={self.c}")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError("modality dimensions must be >= 1")


def _read_array(path) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise MatrixParseError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise MatrixParseError(f"{path}: bad magic bytes {magic!r}")
        if version != FORMAT_VERSION:
            raise MatrixParseError(f"{path}: unsupported format version {version}")
        payload = f.read()
    expected = rows * cols * 8
    if len(payload) != expected:
        raise MatrixParseError(
            f"{path}: header claims {rows}x{cols} ({expected} bytes) but payload has {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()


def _write_array(values: np.ndarray, path) -> None:
    values = np.ascontiguousarray(values, dtype=np.float64)
    with open(path, "wb") as f:
        f.write(array_bytes(values))


def array_bytes(values: np.ndarray) -> bytes:
    """Serialize a matrix to the binary container format."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, values.shape[0], values.shape[1])
    return head + values.astype("<f8").tobytes()


def array_from_bytes(blob: bytes) -> np.ndarray:
    magic, version, rows, cols = _HEADER.unpack(blob[: _HEADER.size])
    if magic != MAGIC or version != FORMAT_VERSION:
        raise MatrixParseError("bad matrix blob header")
    expected = _HEADER.size + rows * cols * 8
    if len(blob) < expected:
        raise MatrixParseError("matrix blob shorter than header claims")
    data = blob[_HEADER.size : expected]
    return np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()


def _read_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise MatrixParseError(
                    f"{path}: line {lineno} has {len(fields)} fields, expected {width}"
                )
            try:
                rows.append([float(x) for x in fields])
            except ValueError as e:
                raise MatrixParseError(f"{path}: line {lineno}: {e}") from None
    if not rows:
        raise MatrixParseError(f"{path}: empty CSV")
    return np.array(rows, dtype=np.float64)


def load_array(path, fmt: str = "binary") -> np.ndarray:
    """Load a raw matrix in either the binary container or CSV format."""
    if fmt == "binary":
        values = _read_array(path)
    elif fmt == "csv":
        values = _read_csv(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if not np.all(np.isfinite(values)):
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise MatrixParseError(f"{path}: non-finite entry at row {r}, col {c}")
    return values


def write_array(values: np.ndarray, path, fmt: str = "binary") -> None:
    """Write a raw matrix in either the binary container or CSV format."""
    if fmt == "binary":
        _write_array(values, path)
    elif fmt == "csv":
        np.savetxt(path, np.asarray(values, dtype=np.float64), delimiter=",", fmt="%.17g")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_matrix(path, fmt: str = "binary", modality_id: int = 0) -> FeatureMatrix:
    return FeatureMatrix(load_array(path, fmt), modality_id)


def write_matrix(m: FeatureMatrix, path, fmt: str = "binary") -> None:
    write_array(m.values, path, fmt)


def load_labels(path, fmt: str = "binary") -> LabelMatrix:
    return LabelMatrix(load_array(path, fmt))


def write_labels(labels: LabelMatrix, path, fmt: str = "binary") -> None:
    write_array(labels.values, path, fmt)


def make_synthetic(spec: SynthSpec) -> Dataset:
    """Generate a bimodal class-prototype dataset.

    Each class gets one Gaussian prototype per modality; instances are the
    prototype of their class plus N(0, noise^2) perturbation. Labels are
    one-hot, or 1-3 uniform labels per instance in multi_label mode.
    Deterministic given the seed; every class appears at least once.
    """
    rng = np.random.default_rng([spec.seed, 0x5D])
    n, c = spec.n, spec.c

    classes = np.concatenate([np.arange(c), rng.integers(0, c, size=n - c)])
    rng.shuffle(classes)

    L = np.zeros((c, n))
    L[classes, np.arange(n)] = 1.0
    if spec.multi_label:
        extra_counts = rng.integers(0, 3, size=n)  # 1-3 labels total
        for i in range(n):
            if extra_counts[i]:
                extras = rng.choice(c, size=extra_counts[i], replace=False)
                L[extras, i] = 1.0

    modalities = []
    for mod_id, d in enumerate((spec.d1, spec.d2)):
        protos = rng.normal(size=(d, c))
        X = protos[:, classes]
        if spec.noise > 0:
            X = X + spec.noise * rng.normal(size=(d, n))
        modalities.append(FeatureMatrix(X, modality_id=mod_id))

    return Dataset(modalities=modalities, labels=LabelMatrix(L))


def split(ds: Dataset, query_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition a dataset into (database, query) subsets.

    The split is a seed-deterministic partition of instance indices; both
    subsets keep the original column order of the instances they retain.
    """
    if not (0.0 < query_fraction < 1.0):
        raise ValueError(f"query_fraction must be in (0,1), got {query_fraction}")
    n = ds.n
    n_query = int(round(n * query_fraction))
    if n_query < 1:
        raise ValueError(f"query_fraction {query_fraction} selects no instances from n={n}")
    if n_query >= n:
        raise ValueError(f"query_fraction {query_fraction} leaves no database instances")
    rng = np.random.default_rng([seed, 0x51])
    perm = rng.permutation(n)
    query_idx = np.sort(perm[:n_query])
    db_idx = np.sort(perm[n_query:])
    return ds.subset(db_idx), ds.subset(query_idx)
