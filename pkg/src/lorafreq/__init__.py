"""Frequency-domain analysis, masking, and compression of LoRA updates."""

from .analysis import (
    EnergyCurve,
    HeatmapCell,
    HeatmapTable,
    MaskResult,
    SpectralSummary,
    SweepPoint,
    dct_k90,
    energy_curve,
    k_for_energy,
    layer_heatmap,
    mask_count,
    reconstruct,
    sweep,
    topk_mask,
)
from .codec import (
    SparseSpectrum,
    StorageReport,
    decode_sparse,
    encode_sparse,
    pack_sparse_file,
    storage_report,
    unpack_sparse_file,
)
from .container import (
    AdapterFile,
    LoraPair,
    OrphanFactor,
    PairingResult,
    TensorRecord,
    merge_delta,
    pair_lora,
    read_container,
    write_container,
)
from .dct import Spectrum, dct2, dct2_reference, idct2, idct2_reference
from .errors import (
    ContainerError,
    CorruptSparse,
    DegenerateInput,
    DuplicateName,
    InvalidSpec,
    LorafreqError,
    MalformedHeader,
    NotSpectralFile,
    NoConvergence,
    OffsetError,
    ShapeMismatch,
    TruncatedFile,
    ZeroSpectrum,
)
from .fixtures import (
    FixtureSpec,
    GaussianStream,
    SplitMix64,
    generate,
    generate_set,
    ramp_specs,
    repeat_specs,
)
from .linalg import Matrix, SvdResult, frobenius_norm, matmul, svd
from .report import TOOL_VERSION
from .stats import (
    CorrelationResult,
    pearson,
    pearson_p_two_sided,
    spearman,
    svd_dct_correlate,
    svd_k90,
)

__version__ = TOOL_VERSION

__all__ = [
    "AdapterFile",
    "ContainerError",
    "CorrelationResult",
    "CorruptSparse",
    "DegenerateInput",
    "DuplicateName",
    "EnergyCurve",
    "FixtureSpec",
    "GaussianStream",
    "HeatmapCell",
    "HeatmapTable",
    "InvalidSpec",
    "LoraPair",
    "LorafreqError",
    "MalformedHeader",
    "MaskResult",
    "Matrix",
    "NoConvergence",
    "NotSpectralFile",
    "OffsetError",
    "OrphanFactor",
    "PairingResult",
    "ShapeMismatch",
    "SparseSpectrum",
    "SpectralSummary",
    "Spectrum",
    "StorageReport",
    "SvdResult",
    "SweepPoint",
    "TOOL_VERSION",
    "TensorRecord",
    "TruncatedFile",
    "ZeroSpectrum",
    "dct2",
    "dct2_reference",
    "dct_k90",
    "decode_sparse",
    "encode_sparse",
    "energy_curve",
    "frobenius_norm",
    "generate",
    "generate_set",
    "idct2",
    "idct2_reference",
    "k_for_energy",
    "layer_heatmap",
    "mask_count",
    "matmul",
    "merge_delta",
    "pack_sparse_file",
    "pair_lora",
    "pearson",
    "pearson_p_two_sided",
    "ramp_specs",
    "read_container",
    "reconstruct",
    "repeat_specs",
    "spearman",
    "storage_report",
    "svd",
    "svd_dct_correlate",
    "svd_k90",
    "sweep",
    "topk_mask",
    "unpack_sparse_file",
    "write_container",
]
