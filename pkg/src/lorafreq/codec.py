"""Sparse spectral storage and the storage-accounting report.

A masked spectrum is stored as two tensors inside the standard container:
"<name>.spectral_indices", a 1 x c F64 tensor of exact integers (lossless
for any index < 2^53), and "<name>.spectral_values", a 1 x c F32 tensor.
File metadata marks the layout: format "spectral-sparse-v1", transform
"dct2-ortho-v1", the uniform k_percent, and one "shape.<name>" entry per
spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import MaskResult
from .container import AdapterFile, TensorRecord
from .dct import Spectrum, idct2
from .errors import CorruptSparse, DuplicateName, InvalidSpec, NotSpectralFile
from .linalg import Matrix

FORMAT_TAG = "spectral-sparse-v1"
TRANSFORM_TAG = "dct2-ortho-v1"
_INDICES_SUFFIX = ".spectral_indices"
_VALUES_SUFFIX = ".spectral_values"


@dataclass(frozen=True)
class SparseSpectrum:
    """Retained coefficients of one masked spectrum.

    Invariants (enforced where instances cross a trust boundary, i.e. in
    decode_sparse and unpack_sparse_file): flat_indices strictly increasing,
    all below m*n, non-empty, and the same length as values.
    """

    name: str
    shape: tuple[int, int]
    flat_indices: np.ndarray  # int64 holding u32-range values
    values: np.ndarray  # float32
    k_percent: float
    transform: str = TRANSFORM_TAG

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseSpectrum):
            return NotImplemented
        return (
            self.name == other.name
            and self.shape == other.shape
            and np.array_equal(self.flat_indices, other.flat_indices)
            and np.array_equal(self.values, other.values)
            and self.k_percent == other.k_percent
            and self.transform == other.transform
        )


@dataclass(frozen=True)
class StorageReport:
    """Both storage accountings for one compression run.

    nominal_*: k% of the base parameter count, the headline budget figure.
    coeff_*: the literal retained-coefficient cost, one binary32 value plus
    one 32-bit index per coefficient, in 4-byte parameter-equivalent units.
    """

    base_param_count: int
    k_percent: float
    nominal_stored: int
    nominal_reduction: float
    coeff_value_count: int
    coeff_total_units: int
    coeff_reduction: float
    exceeds_base: bool


def encode_sparse(name: str, f: Spectrum, mask: MaskResult) -> SparseSpectrum:
    """Capture a mask's retained (index, value) pairs, values as binary32."""
    indices = np.asarray(mask.retained_flat_indices, dtype=np.int64).copy()
    values = np.asarray(mask.retained_values, dtype=np.float32).copy()
    indices.setflags(write=False)
    values.setflags(write=False)
    return SparseSpectrum(
        name=name,
        shape=f.origin_shape,
        flat_indices=indices,
        values=values,
        k_percent=mask.k_percent_requested,
    )


def decode_sparse(s: SparseSpectrum) -> Matrix:
    """Scatter retained values into a zero spectrum and invert."""
    _validate(s)
    m, n = s.shape
    flat = np.zeros(m * n)
    flat[s.flat_indices] = s.values.astype(np.float64)
    return idct2(Spectrum(Matrix(flat.reshape(m, n)), (m, n)))


def pack_sparse_file(spectra: list[SparseSpectrum], meta: dict | None = None) -> AdapterFile:
    """Lay spectra out as index/value tensor pairs in one container."""
    if not spectra:
        raise InvalidSpec("cannot pack an empty spectrum list")
    names = [s.name for s in spectra]
    if len(set(names)) != len(names):
        raise DuplicateName("spectrum names must be unique")
    k_values = {s.k_percent for s in spectra}
    if len(k_values) > 1:
        raise InvalidSpec(
            f"all spectra in one file must share k_percent, got {sorted(k_values)}"
        )

    metadata = {str(k): str(v) for k, v in (meta or {}).items()}
    metadata["format"] = FORMAT_TAG
    metadata["transform"] = TRANSFORM_TAG
    metadata["k_percent"] = repr(float(spectra[0].k_percent))

    tensors = []
    for s in spectra:
        _validate(s)
        count = int(s.flat_indices.size)
        tensors.append(
            TensorRecord(
                s.name + _INDICES_SUFFIX,
                "F64",
                (1, count),
                s.flat_indices.astype(np.float64),
            )
        )
        tensors.append(
            TensorRecord(
                s.name + _VALUES_SUFFIX,
                "F32",
                (1, count),
                s.values.astype(np.float64),
            )
        )
        metadata[f"shape.{s.name}"] = f"{s.shape[0]},{s.shape[1]}"
    return AdapterFile(tensors=tuple(tensors), metadata=metadata)


def unpack_sparse_file(file: AdapterFile) -> list[SparseSpectrum]:
    """Inverse of pack_sparse_file."""
    fmt = file.metadata.get("format")
    if fmt is None:
        raise NotSpectralFile("missing 'format' metadata key")
    if fmt != FORMAT_TAG:
        raise NotSpectralFile(f"unsupported format {fmt!r}")
    transform = file.metadata.get("transform", TRANSFORM_TAG)
    if transform != TRANSFORM_TAG:
        raise NotSpectralFile(f"unsupported transform {transform!r}")
    try:
        k_percent = float(file.metadata["k_percent"])
    except (KeyError, ValueError) as exc:
        raise CorruptSparse(f"bad or missing k_percent metadata: {exc}") from exc

    by_base: dict[str, dict[str, TensorRecord]] = {}
    order: list[str] = []
    for t in file.tensors:
        if t.name.endswith(_INDICES_SUFFIX):
            base, part = t.name[: -len(_INDICES_SUFFIX)], "indices"
        elif t.name.endswith(_VALUES_SUFFIX):
            base, part = t.name[: -len(_VALUES_SUFFIX)], "values"
        else:
            raise CorruptSparse(f"unexpected tensor {t.name!r} in sparse file")
        if base not in by_base:
            order.append(base)
        by_base.setdefault(base, {})[part] = t

    spectra = []
    for base in order:
        parts = by_base[base]
        if set(parts) != {"indices", "values"}:
            raise CorruptSparse(f"spectrum {base!r} is missing a tensor half")
        shape = _parse_shape(file.metadata, base)
        idx_t, val_t = parts["indices"], parts["values"]
        for t in (idx_t, val_t):
            if len(t.shape) != 2 or t.shape[0] != 1:
                raise CorruptSparse(
                    f"tensor {t.name!r} must be 1xc, got shape {t.shape}"
                )
        raw_idx = idx_t.data
        if raw_idx.size and (
            np.any(raw_idx != np.floor(raw_idx)) or np.any(raw_idx < 0)
        ):
            raise CorruptSparse(f"spectrum {base!r} has non-integer indices")
        s = SparseSpectrum(
            name=base,
            shape=shape,
            flat_indices=raw_idx.astype(np.int64),
            values=val_t.data.astype(np.float32),
            k_percent=k_percent,
        )
        _validate(s)
        spectra.append(s)
    if not spectra:
        raise CorruptSparse("sparse file contains no spectra")
    return spectra


def storage_report(
    base_param_count: int, k_percent: float, coeff_counts: list[int]
) -> StorageReport:
    """Both accountings: k% of base parameters vs literal coefficient cost."""
    if base_param_count < 1:
        raise ValueError("base_param_count must be positive")
    if not 0.0 < k_percent <= 100.0:
        raise ValueError(f"k_percent must be in (0, 100], got {k_percent}")
    if not coeff_counts or any(c < 1 for c in coeff_counts):
        raise ValueError("coeff_counts must be a non-empty list of positive counts")

    # Half-up rounding: 296450 * 5% must give 14823, not banker's 14822.
    nominal_stored = int(math.floor(base_param_count * k_percent / 100.0 + 0.5))
    nominal_stored = max(1, nominal_stored)
    value_count = int(sum(coeff_counts))
    total_units = 2 * value_count  # one u32 index per binary32 value
    return StorageReport(
        base_param_count=int(base_param_count),
        k_percent=float(k_percent),
        nominal_stored=nominal_stored,
        nominal_reduction=base_param_count / nominal_stored,
        coeff_value_count=value_count,
        coeff_total_units=total_units,
        coeff_reduction=base_param_count / total_units,
        exceeds_base=total_units > base_param_count,
    )


def _validate(s: SparseSpectrum) -> None:
    m, n = s.shape
    if m < 1 or n < 1:
        raise CorruptSparse(f"spectrum {s.name!r}: bad shape {s.shape}")
    if s.flat_indices.size == 0:
        raise CorruptSparse(f"spectrum {s.name!r}: empty index list")
    if s.flat_indices.size != s.values.size:
        raise CorruptSparse(
            f"spectrum {s.name!r}: {s.flat_indices.size} indices vs "
            f"{s.values.size} values"
        )
    if int(s.flat_indices[0]) < 0 or int(s.flat_indices[-1]) >= m * n:
        raise CorruptSparse(f"spectrum {s.name!r}: index out of range")
    if s.flat_indices.size > 1 and not np.all(np.diff(s.flat_indices) > 0):
        raise CorruptSparse(
            f"spectrum {s.name!r}: indices must be strictly increasing"
        )
    if int(s.flat_indices[-1]) >= 2**32:
        raise CorruptSparse(f"spectrum {s.name!r}: index exceeds 32-bit range")


def _parse_shape(metadata: dict[str, str], base: str) -> tuple[int, int]:
    key = f"shape.{base}"
    raw = metadata.get(key)
    if raw is None:
        raise CorruptSparse(f"missing metadata key {key!r}")
    parts = raw.split(",")
    try:
        m, n = (int(p) for p in parts)
    except ValueError as exc:
        raise CorruptSparse(f"bad shape metadata {raw!r} for {base!r}") from exc
    if m < 1 or n < 1:
        raise CorruptSparse(f"bad shape metadata {raw!r} for {base!r}")
    return (m, n)
