"""Tensor container IO and low-rank adapter pairing.

File layout: 8 bytes little-endian unsigned header length H, then H bytes
of UTF-8 JSON mapping tensor names to {"dtype", "shape", "data_offsets"}
plus an optional "__metadata__" string map, then the raw little-endian
row-major buffer. All payloads are upconverted to binary64 on read.
"""

from __future__ import annotations

import json
import math
import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateName,
    MalformedHeader,
    OffsetError,
    ShapeMismatch,
    TruncatedFile,
)
from .linalg import Matrix, matmul

DTYPE_WIDTHS = {"F16": 2, "F32": 4, "F64": 8}
_NUMPY_DTYPES = {"F16": "<f2", "F32": "<f4", "F64": "<f8"}
_LAYER_SEGMENT = re.compile(r"(?:^|\.)layers?\.(\d+)(?:\.|$)")


class TensorRecord:
    """One named tensor: dtype tag, shape, and flat row-major binary64 data."""

    __slots__ = ("name", "dtype", "shape", "data")

    def __init__(self, name: str, dtype: str, shape, data):
        if dtype not in DTYPE_WIDTHS:
            raise MalformedHeader(f"unknown dtype {dtype!r} for tensor {name!r}")
        shape = tuple(int(s) for s in shape)
        if any(s < 0 for s in shape):
            raise MalformedHeader(f"negative shape {shape} for tensor {name!r}")
        flat = np.asarray(data, dtype=np.float64).reshape(-1).copy()
        if flat.size != math.prod(shape):
            raise ValueError(
                f"tensor {name!r}: {flat.size} values do not fill shape {shape}"
            )
        flat.setflags(write=False)
        self.name = name
        self.dtype = dtype
        self.shape = shape
        self.data = flat

    def as_matrix(self) -> Matrix:
        if len(self.shape) != 2:
            raise ShapeMismatch(
                f"tensor {self.name!r} has shape {self.shape}, expected 2-D"
            )
        return Matrix(self.data.reshape(self.shape))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorRecord):
            return NotImplemented
        return (
            self.name == other.name
            and self.dtype == other.dtype
            and self.shape == other.shape
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self) -> str:
        return f"TensorRecord({self.name!r}, {self.dtype}, {self.shape})"


@dataclass(frozen=True)
class AdapterFile:
    """Parsed container: ordered tensors plus free-form string metadata."""

    tensors: tuple[TensorRecord, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tensors", tuple(self.tensors))
        names = [t.name for t in self.tensors]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})[0]
            raise DuplicateName(f"duplicate tensor name {dup!r}")

    def tensor(self, name: str) -> TensorRecord:
        for t in self.tensors:
            if t.name == name:
                return t
        raise KeyError(name)

    def names(self) -> list[str]:
        return [t.name for t in self.tensors]


@dataclass(frozen=True)
class LoraPair:
    """A matched low-rank factor pair; merged update is scale * (B @ A)."""

    prefix: str
    a_matrix: Matrix  # r x n
    b_matrix: Matrix  # m x r
    layer_index: int | None
    module_kind: str
    scale: float

    def __post_init__(self):
        r = self.a_matrix.rows
        if self.b_matrix.cols != r:
            raise ShapeMismatch(
                f"pair {self.prefix!r}: A is {self.a_matrix.rows}x"
                f"{self.a_matrix.cols} but B is {self.b_matrix.rows}x"
                f"{self.b_matrix.cols}; inner dimensions differ"
            )
        if r > min(self.b_matrix.rows, self.a_matrix.cols):
            raise ShapeMismatch(
                f"pair {self.prefix!r}: rank {r} exceeds "
                f"min({self.b_matrix.rows}, {self.a_matrix.cols})"
            )
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"pair {self.prefix!r}: scale must be positive")

    @property
    def rank(self) -> int:
        return self.a_matrix.rows

    @property
    def out_shape(self) -> tuple[int, int]:
        return (self.b_matrix.rows, self.a_matrix.cols)


@dataclass(frozen=True)
class OrphanFactor:
    """A lora_A/lora_B tensor whose partner is missing."""

    prefix: str
    role: str  # "A" or "B"
    tensor_name: str


@dataclass(frozen=True)
class PairingResult:
    pairs: tuple[LoraPair, ...]
    orphans: tuple[OrphanFactor, ...]


def read_container(raw: bytes) -> AdapterFile:
    """Parse container bytes into an AdapterFile."""
    if len(raw) < 8:
        raise TruncatedFile(f"file is {len(raw)} bytes, need at least 8")
    (header_len,) = struct.unpack("<Q", raw[:8])
    if 8 + header_len > len(raw):
        raise TruncatedFile(
            f"header declares {header_len} bytes but only "
            f"{len(raw) - 8} follow"
        )
    try:
        text = raw[8 : 8 + header_len].decode("utf-8")
        header = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeader(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise MalformedHeader("header JSON must be an object")

    metadata = _parse_metadata(header.pop("__metadata__", {}))
    buffer = raw[8 + header_len :]

    tensors = []
    spans = []
    for name, entry in header.items():
        dtype, shape, start, end = _parse_entry(name, entry)
        width = DTYPE_WIDTHS[dtype]
        count = math.prod(shape)
        nbytes = count * width
        if end - start != nbytes:
            raise OffsetError(
                f"tensor {name!r}: data_offsets span {end - start} bytes "
                f"but shape {shape} as {dtype} needs {nbytes}"
            )
        if end > len(buffer):
            raise OffsetError(
                f"tensor {name!r}: data_offsets [{start}, {end}] exceed "
                f"the {len(buffer)}-byte buffer"
            )
        values = np.frombuffer(
            buffer, dtype=_NUMPY_DTYPES[dtype], count=count, offset=start
        ).astype(np.float64)
        tensors.append(TensorRecord(name, dtype, shape, values))
        if nbytes > 0:
            spans.append((start, end, name))

    spans.sort()
    for (s1, e1, n1), (s2, e2, n2) in zip(spans, spans[1:]):
        if s2 < e1:
            raise OffsetError(
                f"tensors {n1!r} and {n2!r} have overlapping data_offsets"
            )
    return AdapterFile(tensors=tuple(tensors), metadata=metadata)


def write_container(file: AdapterFile, dtype_policy: str = "F64") -> bytes:
    """Serialize an AdapterFile.

    Header keys are sorted lexicographically and data offsets are packed
    contiguously in that order. Each tensor is written in the narrower of
    its own dtype and dtype_policy, so already-narrow tensors (e.g. the
    binary32 half of a sparse spectral file) are never widened.
    """
    if dtype_policy not in ("F32", "F64"):
        raise ValueError(f"dtype_policy must be F32 or F64, got {dtype_policy!r}")
    names = [t.name for t in file.tensors]
    if len(set(names)) != len(names):
        raise DuplicateName("tensor names must be unique")

    header: dict[str, object] = {}
    chunks = []
    offset = 0
    for t in sorted(file.tensors, key=lambda t: t.name):
        eff = t.dtype if DTYPE_WIDTHS[t.dtype] < DTYPE_WIDTHS[dtype_policy] else dtype_policy
        payload = t.data.astype(_NUMPY_DTYPES[eff]).tobytes()
        header[t.name] = {
            "dtype": eff,
            "shape": list(t.shape),
            "data_offsets": [offset, offset + len(payload)],
        }
        chunks.append(payload)
        offset += len(payload)
    if file.metadata:
        header["__metadata__"] = {
            str(k): str(v) for k, v in file.metadata.items()
        }

    blob = json.dumps(
        header, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    return struct.pack("<Q", len(blob)) + blob + b"".join(chunks)


def pair_lora(file: AdapterFile) -> PairingResult:
    """Group lora_A/lora_B tensors into factor pairs.

    Tensors are matched by the name prefix preceding the lora_A/lora_B
    segment. Missing partners become orphan reports rather than errors;
    incompatible shapes within a matched pair raise ShapeMismatch.
    """
    groups: dict[str, dict[str, TensorRecord]] = {}
    order: list[str] = []
    orphans: list[OrphanFactor] = []
    for t in file.tensors:
        role, prefix = _classify(t.name)
        if role is None:
            continue
        slot = groups.setdefault(prefix, {})
        if prefix not in order:
            order.append(prefix)
        if role in slot:
            orphans.append(OrphanFactor(prefix=prefix, role=role, tensor_name=t.name))
        else:
            slot[role] = t

    scale = _scale_from_metadata(file.metadata)
    pairs: list[LoraPair] = []
    for prefix in order:
        slot = groups[prefix]
        if "A" in slot and "B" in slot:
            pairs.append(
                LoraPair(
                    prefix=prefix,
                    a_matrix=slot["A"].as_matrix(),
                    b_matrix=slot["B"].as_matrix(),
                    layer_index=_layer_index(prefix),
                    module_kind=_module_kind(prefix),
                    scale=scale,
                )
            )
        else:
            role, t = next(iter(slot.items()))
            orphans.append(
                OrphanFactor(prefix=prefix, role=role, tensor_name=t.name)
            )
    return PairingResult(pairs=tuple(pairs), orphans=tuple(orphans))


def merge_delta(pair: LoraPair) -> Matrix:
    """Merged update scale * (B @ A), deterministic summation order."""
    return matmul(pair.b_matrix, pair.a_matrix).scaled(pair.scale)


def _reject_duplicate_keys(items):
    seen = set()
    for key, _ in items:
        if key in seen:
            raise DuplicateName(f"duplicate tensor name {key!r} in header")
        seen.add(key)
    return dict(items)


def _parse_metadata(obj) -> dict[str, str]:
    if not isinstance(obj, dict):
        raise MalformedHeader("__metadata__ must be an object")
    out = {}
    for k, v in obj.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise MalformedHeader("__metadata__ must map strings to strings")
        out[k] = v
    return out


def _parse_entry(name: str, entry) -> tuple[str, tuple[int, ...], int, int]:
    if not isinstance(entry, dict):
        raise MalformedHeader(f"tensor {name!r}: header entry must be an object")
    try:
        dtype = entry["dtype"]
        shape = entry["shape"]
        offsets = entry["data_offsets"]
    except KeyError as exc:
        raise MalformedHeader(f"tensor {name!r}: missing header key {exc}") from exc
    if not isinstance(dtype, str) or dtype not in DTYPE_WIDTHS:
        raise MalformedHeader(f"unknown dtype {dtype!r} for tensor {name!r}")
    if not isinstance(shape, list) or not all(
        isinstance(s, int) and not isinstance(s, bool) for s in shape
    ):
        raise MalformedHeader(f"tensor {name!r}: shape must be a list of integers")
    if any(s < 0 for s in shape):
        raise MalformedHeader(f"tensor {name!r}: negative dimension in {shape}")
    if (
        not isinstance(offsets, list)
        or len(offsets) != 2
        or not all(isinstance(o, int) and not isinstance(o, bool) for o in offsets)
    ):
        raise MalformedHeader(
            f"tensor {name!r}: data_offsets must be [start, end] integers"
        )
    start, end = offsets
    if start < 0 or end < start:
        raise OffsetError(f"tensor {name!r}: bad data_offsets [{start}, {end}]")
    return dtype, tuple(shape), start, end


def _classify(name: str) -> tuple[str | None, str]:
    pos_a = name.find("lora_A")
    pos_b = name.find("lora_B")
    if pos_a < 0 and pos_b < 0:
        return None, ""
    if pos_b < 0 or (0 <= pos_a < pos_b):
        return "A", name[:pos_a].rstrip(".")
    return "B", name[:pos_b].rstrip(".")


def _layer_index(prefix: str) -> int | None:
    match = _LAYER_SEGMENT.search(prefix)
    return int(match.group(1)) if match else None


def _module_kind(prefix: str) -> str:
    lowered = prefix.lower()
    for kind in ("query", "value", "key"):
        if kind in lowered:
            return kind
    return "other"


def _scale_from_metadata(metadata: dict[str, str]) -> float:
    if "alpha" not in metadata or "r" not in metadata:
        return 1.0
    try:
        alpha = float(metadata["alpha"])
        rank = float(metadata["r"])
    except ValueError:
        return 1.0
    if rank == 0.0:
        return 1.0
    scale = alpha / rank
    return scale if scale > 0.0 and math.isfinite(scale) else 1.0
