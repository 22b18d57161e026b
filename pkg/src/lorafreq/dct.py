"""Orthonormal 2D DCT-II and its inverse.

The forward transform is the separable, orthonormally scaled DCT-II:

    F[u,v] = a_m(u) a_n(v) sum_{i,j} x[i,j]
             cos(pi (2i+1) u / (2m)) cos(pi (2j+1) v / (2n))

with a_m(0) = sqrt(1/m) and a_m(u>0) = sqrt(2/m). Under this scaling the
transform is orthogonal, so Frobenius norms (and squared-coefficient
energies) are preserved exactly. ``dct2`` uses a fast path; ``dct2_reference``
evaluates the definition through explicit cosine basis matrices and exists
so tests can cross-check the fast path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as _fft

from .linalg import Matrix


@dataclass(frozen=True)
class Spectrum:
    """DCT-II coefficients of a matrix, same shape as the source."""

    coefficients: Matrix
    origin_shape: tuple[int, int]

    def __post_init__(self):
        if self.coefficients.shape != tuple(self.origin_shape):
            raise ValueError(
                f"coefficient shape {self.coefficients.shape} does not match "
                f"origin shape {tuple(self.origin_shape)}"
            )


def dct2(x: Matrix) -> Spectrum:
    """Forward orthonormal 2D DCT-II."""
    coeffs = _fft.dctn(x.array, type=2, norm="ortho")
    return Spectrum(coefficients=Matrix(coeffs), origin_shape=x.shape)


def idct2(f: Spectrum) -> Matrix:
    """Inverse of :func:`dct2` (separable orthonormal DCT-III)."""
    return Matrix(_fft.idctn(f.coefficients.array, type=2, norm="ortho"))


def dct2_reference(x: Matrix) -> Spectrum:
    """Definitional transform via explicit cosine basis matrices.

    Evaluates the double sum as C_m x C_n^T in O(m^2 n + m n^2); kept
    deliberately free of fast-transform tricks.
    """
    m, n = x.shape
    coeffs = _basis(m) @ x.array @ _basis(n).T
    return Spectrum(coefficients=Matrix(coeffs), origin_shape=x.shape)


def idct2_reference(f: Spectrum) -> Matrix:
    """Definitional inverse: transpose of the orthogonal basis on each side."""
    m, n = f.origin_shape
    return Matrix(_basis(m).T @ f.coefficients.array @ _basis(n))


@lru_cache(maxsize=32)
def _basis(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis matrix: row u is the u-th cosine mode."""
    i = np.arange(n)
    u = i.reshape(-1, 1)
    mat = np.cos(np.pi * (2 * i + 1) * u / (2 * n))
    mat[0, :] *= np.sqrt(1.0 / n)
    mat[1:, :] *= np.sqrt(2.0 / n)
    return mat
