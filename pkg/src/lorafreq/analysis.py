"""Spectral energy analysis: curves, k90, top-k masking, error sweeps.

Everything operates on the orthonormal DCT-II spectrum, where squared
coefficients are energies and Parseval ties masking error to dropped
energy exactly: ||dW - dW_k||_F^2 == (1 - retained_fraction) * total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dct import Spectrum, dct2, idct2
from .errors import ShapeMismatch, ZeroSpectrum
from .linalg import Matrix

# Guard against float drift when k*m*n/100 is mathematically an integer.
_CEIL_EPS = 1e-9


@dataclass(frozen=True)
class EnergyCurve:
    """Squared coefficients sorted descending, plus their running fraction.

    For an all-zero spectrum, total_energy is 0 and cumulative_fraction is
    empty; callers treat that as a ZeroSpectrum flag rather than dividing.
    """

    sorted_energies: np.ndarray
    cumulative_fraction: np.ndarray
    total_energy: float

    @property
    def is_zero(self) -> bool:
        return self.total_energy == 0.0

    @property
    def coefficient_count(self) -> int:
        return int(self.sorted_energies.size)


@dataclass(frozen=True)
class SpectralSummary:
    """k90-style statistic for one matrix."""

    k90_percent: float
    coeff_count_90: int
    total_energy: float
    layer_index: int | None = None
    module_kind: str = ""


@dataclass(frozen=True)
class MaskResult:
    """Top-k%-by-magnitude coefficient selection."""

    retained_flat_indices: np.ndarray  # sorted ascending
    retained_values: np.ndarray
    retained_energy_fraction: float
    k_percent_requested: float
    k_count: int


@dataclass(frozen=True)
class SweepPoint:
    k_percent: float
    relative_error: float
    retained_energy_fraction: float
    k_count: int


@dataclass(frozen=True)
class HeatmapCell:
    layer: str  # decimal layer index, or "unindexed"
    module_kind: str
    mean_k90: float
    count: int


@dataclass(frozen=True)
class HeatmapTable:
    """Dense (layer, module_kind) grid; cells holds only the present entries."""

    layers: tuple[str, ...]
    module_kinds: tuple[str, ...]
    cells: tuple[HeatmapCell, ...]

    def cell(self, layer: str, module_kind: str) -> HeatmapCell | None:
        for c in self.cells:
            if c.layer == layer and c.module_kind == module_kind:
                return c
        return None


def energy_curve(f: Spectrum) -> EnergyCurve:
    """Square, sort descending, accumulate."""
    energies = np.sort((f.coefficients.data ** 2))[::-1].copy()
    cumulative = np.cumsum(energies)
    total = float(cumulative[-1])
    if total == 0.0:
        fraction = np.empty(0)
    else:
        fraction = cumulative / total
    energies.setflags(write=False)
    fraction.setflags(write=False)
    return EnergyCurve(
        sorted_energies=energies, cumulative_fraction=fraction, total_energy=total
    )


def k_for_energy(curve: EnergyCurve, target_fraction: float = 0.9) -> SpectralSummary:
    """Smallest coefficient count whose energy reaches the target fraction."""
    if not 0.0 < target_fraction <= 1.0:
        raise ValueError(f"target_fraction must be in (0, 1], got {target_fraction}")
    if curve.is_zero:
        raise ZeroSpectrum("all-zero spectrum has no energy threshold")
    count = int(np.searchsorted(curve.cumulative_fraction, target_fraction)) + 1
    return SpectralSummary(
        k90_percent=100.0 * count / curve.coefficient_count,
        coeff_count_90=count,
        total_energy=curve.total_energy,
    )


def topk_mask(f: Spectrum, k_percent: float) -> MaskResult:
    """Retain the k_count = max(1, ceil(k% of m*n)) largest-|F| coefficients.

    Ties in |F| are broken toward the smaller row-major flat index, which
    makes masks nested across k and deterministic across platforms.
    """
    if not 0.0 < k_percent <= 100.0:
        raise ValueError(f"k_percent must be in (0, 100], got {k_percent}")
    flat = f.coefficients.data
    total_count = flat.size
    k_count = mask_count(k_percent, total_count)

    order = np.argsort(-np.abs(flat), kind="stable")
    chosen = np.sort(order[:k_count])
    values = flat[chosen].copy()

    if k_count == total_count:
        fraction = 1.0
    else:
        total = float(np.sum(flat**2))
        fraction = float(np.sum(values**2)) / total if total > 0.0 else 0.0
        fraction = min(1.0, max(0.0, fraction))
    chosen = chosen.astype(np.int64)
    chosen.setflags(write=False)
    values.setflags(write=False)
    return MaskResult(
        retained_flat_indices=chosen,
        retained_values=values,
        retained_energy_fraction=fraction,
        k_percent_requested=float(k_percent),
        k_count=k_count,
    )


def mask_count(k_percent: float, total_count: int) -> int:
    """Exact retained-coefficient count for a k% mask."""
    raw = math.ceil(k_percent * total_count / 100.0 - _CEIL_EPS)
    return max(1, min(total_count, raw))


def reconstruct(f: Spectrum, mask: MaskResult) -> Matrix:
    """Zero all non-retained coefficients and invert the transform."""
    m, n = f.origin_shape
    if mask.k_count > m * n or (
        mask.retained_flat_indices.size
        and int(mask.retained_flat_indices[-1]) >= m * n
    ):
        raise ShapeMismatch(
            f"mask indexes beyond the {m}x{n} spectrum it is applied to"
        )
    kept = np.zeros(m * n)
    kept[mask.retained_flat_indices] = mask.retained_values
    return idct2(Spectrum(Matrix(kept.reshape(m, n)), (m, n)))


def sweep(delta: Matrix, k_values: list[float]) -> list[SweepPoint]:
    """Mask/reconstruct metrics for each k, sharing a single forward DCT."""
    for k in k_values:
        if not 0.0 < k <= 100.0:
            raise ValueError(f"k values must be in (0, 100], got {k}")
    norm = math.sqrt(float(np.sum(delta.array**2)))
    if norm == 0.0:
        raise ZeroSpectrum("zero update matrix cannot be swept")
    f = dct2(delta)
    points = []
    for k in k_values:
        mask = topk_mask(f, k)
        recon = reconstruct(f, mask)
        err = math.sqrt(float(np.sum((delta.array - recon.array) ** 2))) / norm
        points.append(
            SweepPoint(
                k_percent=float(k),
                relative_error=err,
                retained_energy_fraction=mask.retained_energy_fraction,
                k_count=mask.k_count,
            )
        )
    return points


def dct_k90(delta: Matrix, target_fraction: float = 0.9) -> SpectralSummary:
    """k90 of a merged update: dct2 -> energy curve -> threshold count."""
    return k_for_energy(energy_curve(dct2(delta)), target_fraction)


def layer_heatmap(summaries: list[SpectralSummary]) -> HeatmapTable:
    """Group k90 values by (layer, module kind); duplicates are averaged."""
    buckets: dict[tuple[str, str], list[float]] = {}
    for s in summaries:
        layer = "unindexed" if s.layer_index is None else str(s.layer_index)
        buckets.setdefault((layer, s.module_kind), []).append(s.k90_percent)

    layer_labels = {layer for layer, _ in buckets}
    indexed = sorted((lb for lb in layer_labels if lb != "unindexed"), key=int)
    layers = tuple(indexed) + (("unindexed",) if "unindexed" in layer_labels else ())
    kinds = tuple(sorted({kind for _, kind in buckets}))

    cells = []
    for layer in layers:
        for kind in kinds:
            values = buckets.get((layer, kind))
            if values is None:
                continue
            cells.append(
                HeatmapCell(
                    layer=layer,
                    module_kind=kind,
                    mean_k90=sum(values) / len(values),
                    count=len(values),
                )
            )
    return HeatmapTable(layers=layers, module_kinds=kinds, cells=tuple(cells))
