"""Per-pixel quadratic signal model by Gaussian-weighted least squares.

Around every pixel ``p`` the neighbourhood is approximated as

    f(p + w) ~ w^T A w + b^T w + c,     w = (x, y), y pointing down

with basis order ``{1, x, y, x^2, y^2, xy}``. Because the applicability is
the same at every pixel, the 6x6 normal matrix is a constant that is
inverted once; the right-hand sides are separable correlations (row pass with
``g, g*x, g*x^2``, then six column passes).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import expansion_kernel
from .errors import DimensionError, ParameterError
from .image import ImageLike, as_array

BASIS = ("1", "x", "y", "xx", "yy", "xy")


@dataclass
class PolyExpansion:
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c: np.ndarray
    window_radius: int
    sigma_applic: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.c.shape


def applicability(window_radius: int, sigma: float) -> np.ndarray:
    """1-D Gaussian weights over ``[-r, r]`` (unnormalized; only ratios matter)."""
    x = np.arange(-window_radius, window_radius + 1, dtype=np.float64)
    return np.exp(-0.5 * (x / sigma) ** 2)


def basis_matrix(window_radius: int) -> np.ndarray:
    """Rows are window offsets in row-major order, columns the six basis functions."""
    offs = np.arange(-window_radius, window_radius + 1, dtype=np.float64)
    y, x = np.meshgrid(offs, offs, indexing="ij")
    x, y = x.ravel(), y.ravel()
    return np.stack([np.ones_like(x), x, y, x * x, y * y, x * y], axis=1)


@lru_cache(maxsize=32)
def _inverse_normal_matrix(window_radius: int, sigma: float) -> np.ndarray:
    g = applicability(window_radius, sigma)
    weights = np.outer(g, g).ravel()
    B = basis_matrix(window_radius)
    G = B.T @ (weights[:, None] * B)
    # positive weights and >= 5 distinct abscissae per axis make G full rank
    assert np.linalg.matrix_rank(G) == 6, "singular polynomial basis"
    Ginv = np.linalg.inv(G)
    # odd moments of the symmetric window vanish; drop their round-off
    Ginv[np.abs(Ginv) < 1e-14 * np.abs(Ginv).max()] = 0.0
    Ginv.setflags(write=False)
    return Ginv


def _check(window_radius: int, sigma_applic: float, shape: tuple[int, int]):
    if window_radius < 2:
        raise ParameterError(f"window_radius must be >= 2, got {window_radius}")
    if not sigma_applic > 0:
        raise ParameterError(f"sigma_applic must be > 0, got {sigma_applic}")
    side = 2 * window_radius + 1
    if shape[0] < side or shape[1] < side:
        raise DimensionError(f"frame {shape[1]}x{shape[0]} is smaller than the {side}x{side} window")


def poly_expansion(frame: ImageLike, window_radius: int = 5, sigma_applic: float = 1.5) -> PolyExpansion:
    """Fit the local quadratic model at every pixel (clamp-to-edge borders)."""
    img = as_array(frame)
    _check(window_radius, sigma_applic, img.shape)

    g = applicability(window_radius, sigma_applic)
    x = np.arange(-window_radius, window_radius + 1, dtype=np.float64)
    Ginv = _inverse_normal_matrix(window_radius, float(sigma_applic))
    c, b1, b2, a11, a22, axy = expansion_kernel(np.ascontiguousarray(img), g, g * x, g * x * x, Ginv)
    return PolyExpansion(a11, 0.5 * axy, a22, b1, b2, c, window_radius, sigma_applic)
