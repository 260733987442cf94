"""Adaptive asymmetric label-guided cross-modal hashing.

Two-step pipeline: alternating closed-form optimization learns binary
codes from paired multi-modal features and labels, then per-modality ridge
regressions learn the deployable hash functions. Retrieval ranks by
Hamming distance over bit-packed codes.
"""

from .data import (
    Dataset,
    FeatureMatrix,
    LabelMatrix,
    SynthSpec,
    load_labels,
    load_matrix,
    make_synthetic,
    split,
    write_labels,
    write_matrix,
)
from .hashfn import HashModel, encode, learn_hash_function, load_hash_model, save_hash_model
from .kernelize import KernelModel, apply_kernel, fit_kernel
from .optimizer import Hyperparams, TrainResult, TrainState, TrainTrace, train_step1
from .retrieval import (
    BACKEND,
    EvalReport,
    PackedCodes,
    average_precision,
    evaluate,
    hamming_distance,
    pack_codes,
    rank_database,
    unpack_codes,
)

__version__ = "0.1.0"
