"""Dense two-frame flow from polynomial expansions, coarse to fine.

Flow convention: ``(u, v)`` at pixel ``(x, y)`` of the first frame is the
displacement of that image point into the second frame, so
``f2(x + u, y + v) ~ f1(x, y)`` and ``warp(f2, flow) ~ f1``.
Units are pixels per frame interval.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ._kernels import displacement_kernel
from .errors import DimensionError, ParameterError
from .image import ImageLike, as_array, pyramid_arrays, resize_array
from .polyexp import PolyExpansion, poly_expansion


@dataclass(eq=False)
class FlowField:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise DimensionError(f"u {self.u.shape} and v {self.v.shape} must be equal 2-D grids")

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def uniform(cls, width: int, height: int, u: float, v: float) -> "FlowField":
        return cls(np.full((height, width), float(u)), np.full((height, width), float(v)))

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())


@dataclass(frozen=True)
class FarnebackParams:
    num_levels: int = 3
    pyramid_scale: float = 0.5
    iterations_per_level: int = 3
    window_radius: int = 5
    sigma_applic: float = 1.5
    avg_radius: int = 5
    regularization_eps: float = 1e-6

    def __post_init__(self):
        if self.num_levels < 1 or self.iterations_per_level < 1:
            raise ParameterError("num_levels and iterations_per_level must be >= 1")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise ParameterError(f"pyramid_scale must lie in (0, 1), got {self.pyramid_scale}")
        if self.window_radius < 2:
            raise ParameterError("window_radius must be >= 2")
        if self.avg_radius < 1:
            raise ParameterError("avg_radius must be >= 1")
        if not (self.sigma_applic > 0 and self.regularization_eps > 0):
            raise ParameterError("sigma_applic and regularization_eps must be > 0")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def _same_shape(*grids):
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise DimensionError(f"inconsistent dimensions: {sorted(shapes)}")


def displacement_step(
    e1: PolyExpansion,
    e2: PolyExpansion,
    prior: FlowField,
    avg_radius: int = 5,
    eps: float = 1e-6,
) -> FlowField:
    """One refinement of the displacement estimate.

    ``e2`` is looked up at the prior-displaced position rounded to the
    nearest pixel (clamped). The linearization uses that integer offset ``k``,
    ``db = -(b2 - b1) / 2 + A k``, which keeps it exact for quadratic signals.
    The per-pixel normal equations ``A^T A d = A^T db`` are summed over a
    ``(2 avg_radius + 1)^2`` box and regularized by ``eps``.
    """
    _same_shape(e1.c, e2.c, prior.u)
    if avg_radius < 1 or not eps > 0:
        raise ParameterError("avg_radius must be >= 1 and eps > 0")
    c = np.ascontiguousarray
    u, v = displacement_kernel(
        c(e1.a11), c(e1.a12), c(e1.a22), c(e1.b1), c(e1.b2),
        c(e2.a11), c(e2.a12), c(e2.a22), c(e2.b1), c(e2.b2),
        c(prior.u), c(prior.v), int(avg_radius), float(eps),
    )
    return FlowField(u, v)


def upsample_flow(flow: FlowField, width: int, height: int, scale: float) -> FlowField:
    """Bilinear resize to the next finer level, vectors multiplied by ``1/scale``."""
    f = 1.0 / scale
    return FlowField(resize_array(flow.u, width, height) * f, resize_array(flow.v, width, height) * f)


class DenseFlow:
    """Coarse-to-fine dense flow estimator.

    Keeps the expansion pyramid of the most recent second frame so that a
    stream of consecutive pairs expands every frame only once. Results are
    identical with or without the cache.
    """

    def __init__(self, params: FarnebackParams | None = None):
        self.params = params or FarnebackParams()
        self._cached_key = None
        self._cached_expansions = None

    def expansions(self, img: np.ndarray) -> list[PolyExpansion]:
        p = self.params
        if img is self._cached_key:
            return self._cached_expansions
        levels = pyramid_arrays(img, p.num_levels, p.pyramid_scale)
        return [poly_expansion(level, p.window_radius, p.sigma_applic) for level in levels]

    def __call__(self, f1: ImageLike, f2: ImageLike) -> FlowField:
        a, b = as_array(f1), as_array(f2)
        if a.shape != b.shape:
            raise DimensionError(f"frame shapes differ: {a.shape} vs {b.shape}")
        p = self.params
        ex1 = self.expansions(a)
        ex2 = self.expansions(b)
        self._cached_key, self._cached_expansions = b, ex2

        flow = None
        for e1, e2 in zip(reversed(ex1), reversed(ex2)):
            h, w = e1.shape
            if flow is None:
                flow = FlowField.zeros(w, h)
            else:
                flow = upsample_flow(flow, w, h, p.pyramid_scale)
            for _ in range(p.iterations_per_level):
                flow = displacement_step(e1, e2, flow, p.avg_radius, p.regularization_eps)
        return flow


def estimate_flow_dense(f1: ImageLike, f2: ImageLike, params: FarnebackParams | None = None) -> FlowField:
    """Dense flow from ``f1`` to ``f2`` at every pixel of the finest level."""
    return DenseFlow(params)(f1, f2)
