"""Deterministic synthetic adapters.

All randomness flows from SplitMix64 (exact 64-bit integer arithmetic) and
a Box-Muller transform that consumes two 53-bit uniforms in (0, 1] per
pair of normals, so identical specs produce identical containers on any
platform with a faithful libm.

Kinds:
  gaussian_iid    A (r x n) and B (m x r), i.i.d. N(0, 1/sqrt(r)).
  smooth_lowrank  factor rows/columns are the lowest-index DCT basis
                  vectors; the merged update has exactly r unit spectral
                  spikes in its lowest r x r block.
  mixed           smooth factors plus noise_level times standard-normal
                  factor perturbations.
  dense_gaussian  the update itself is i.i.d. standard normal, stored as
                  an identity-factor pair so it still parses as lora_A/B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .container import AdapterFile, TensorRecord
from .dct import _basis
from .errors import InvalidSpec

KINDS = ("gaussian_iid", "smooth_lowrank", "mixed", "dense_gaussian")

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_NEG53 = 2.0**-53


@dataclass(frozen=True)
class FixtureSpec:
    kind: str
    m: int
    n: int
    r: int = 1
    seed: int = 0
    noise_level: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown fixture kind {self.kind!r}")
        if self.m < 1 or self.n < 1:
            raise InvalidSpec(f"dimensions must be positive, got {self.m}x{self.n}")
        if self.r < 1 or self.r > min(self.m, self.n):
            raise InvalidSpec(
                f"rank {self.r} outside [1, min({self.m}, {self.n})]"
            )
        if not 0 <= self.seed <= _MASK64:
            raise InvalidSpec("seed must fit in 64 bits")
        if self.noise_level < 0.0 or not math.isfinite(self.noise_level):
            raise InvalidSpec(f"noise_level must be finite and >= 0")
        if self.noise_level > 0.0 and self.kind != "mixed":
            raise InvalidSpec("noise_level applies to the mixed kind only")


class SplitMix64:
    """Reference SplitMix64 stream over exact 64-bit integers."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform in (0, 1]: 53 high bits, shifted off zero."""
        return ((self.next_u64() >> 11) + 1) * _TWO_NEG53


class GaussianStream:
    """Standard normals, two per Box-Muller pair, spare cached."""

    def __init__(self, rng: SplitMix64):
        self._rng = rng
        self._spare: float | None = None

    def next(self) -> float:
        if self._spare is not None:
            value = self._spare
            self._spare = None
            return value
        u1 = self._rng.next_unit()
        u2 = self._rng.next_unit()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare = radius * math.sin(theta)
        return radius * math.cos(theta)

    def fill(self, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
        out = np.empty((rows, cols))
        for i in range(rows):
            for j in range(cols):
                out[i, j] = self.next() * scale
        return out


def generate(spec: FixtureSpec) -> AdapterFile:
    """One adapter pair at layer 0."""
    return generate_set([spec])


def generate_set(specs) -> AdapterFile:
    """One file holding one pair per spec, at layer indices 0, 1, ..."""
    specs = list(specs)
    if not specs:
        raise InvalidSpec("need at least one fixture spec")
    tensors = []
    for layer, spec in enumerate(specs):
        a, b = _factors(spec)
        base = f"layer.{layer}.query"
        tensors.append(TensorRecord(f"{base}.lora_A.weight", "F64", a.shape, a))
        tensors.append(TensorRecord(f"{base}.lora_B.weight", "F64", b.shape, b))
    return AdapterFile(tensors=tuple(tensors), metadata={})


def ramp_specs(
    kind: str,
    m: int,
    n: int,
    count: int,
    seed: int,
    noise_level: float = 0.0,
) -> list[FixtureSpec]:
    """Specs with rank ramping 1..count, one seed offset per layer."""
    if count < 1:
        raise InvalidSpec("count must be positive")
    if count > min(m, n):
        raise InvalidSpec(
            f"rank ramp 1..{count} does not fit min({m}, {n})"
        )
    return [
        FixtureSpec(
            kind=kind,
            m=m,
            n=n,
            r=i + 1,
            seed=(seed + i) & _MASK64,
            noise_level=noise_level,
        )
        for i in range(count)
    ]


def repeat_specs(spec: FixtureSpec, count: int) -> list[FixtureSpec]:
    """The same fixture at consecutive seed offsets."""
    if count < 1:
        raise InvalidSpec("count must be positive")
    return [
        FixtureSpec(
            kind=spec.kind,
            m=spec.m,
            n=spec.n,
            r=spec.r,
            seed=(spec.seed + i) & _MASK64,
            noise_level=spec.noise_level,
        )
        for i in range(count)
    ]


def _factors(spec: FixtureSpec) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) for one spec; A is r x n, B is m x r."""
    m, n, r = spec.m, spec.n, spec.r
    gauss = GaussianStream(SplitMix64(spec.seed))

    if spec.kind == "gaussian_iid":
        # N(0, 1/sqrt(r)) variance, so the merged update is unit-variance.
        scale = (1.0 / math.sqrt(r)) ** 0.5
        a = gauss.fill(r, n, scale)
        b = gauss.fill(m, r, scale)
        return a, b

    if spec.kind == "smooth_lowrank":
        return _smooth_factors(m, n, r)

    if spec.kind == "mixed":
        a, b = _smooth_factors(m, n, r)
        a = a + spec.noise_level * gauss.fill(r, n)
        b = b + spec.noise_level * gauss.fill(m, r)
        return a, b

    # dense_gaussian: emit the update itself, paired with an identity factor.
    delta = gauss.fill(m, n)
    if m >= n:
        return np.eye(n), delta
    return delta, np.eye(m)


def _smooth_factors(m: int, n: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    a = _basis(n)[:r, :].copy()
    b = _basis(m)[:r, :].T.copy()
    return a, b
