"""Batch self-organizing-map training with dense, sparse, and index-only backends."""

from .bench import BenchResult, bench_sweep, time_bmu_cycle
from .core import (
    Codebook,
    DenseMatrix,
    FormatError,
    SparseBinaryMatrix,
    SparseValueMatrix,
    Vocabulary,
    read_libsvm_text,
    read_sbm1,
    read_somc,
    write_libsvm_text,
    write_sbm1,
    write_somc,
)
from .engine import (
    EpochReport,
    EpochScratch,
    TrainConfig,
    accumulate_updates,
    apply_updates,
    distance_binary,
    distance_sparse,
    find_bmu_pair,
    init_codebook,
    neighborhood_weight,
    node_squared_norms,
    normalize_codebook,
    row_squared_norms,
    sigma_at,
    train,
    train_epoch,
)
from .ingest import load_vocab, parse_medline_xml, save_vocab, synth_generate
from .memmodel import (
    MemoryEstimate,
    estimate_dense,
    estimate_sparse_binary,
    estimate_sparse_value,
    sweep,
)
from .quality import (
    QualityReport,
    adjacent,
    bmu_density,
    quantization_error,
    topographic_error,
    umatrix,
)

__version__ = "0.1.0"
