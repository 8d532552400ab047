"""Sparse flow: minimum-eigenvalue corners and pyramidal Lucas-Kanade."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.ndimage import maximum_filter, uniform_filter

from .errors import DimensionError, ParameterError
from .image import ImageLike, as_array, bilinear_sample, pyramid_arrays, spatial_gradients

CONVERGENCE_PX = 0.01
MIN_EIG_PER_PIXEL = 1e-4


class TrackStatus(enum.Enum):
    TRACKED = "TRACKED"
    UNTRACKED = "UNTRACKED"


@dataclass(frozen=True)
class TrackedPoint:
    position: tuple[float, float]
    displacement: Optional[tuple[float, float]]
    status: TrackStatus

    @property
    def tracked(self) -> bool:
        return self.status is TrackStatus.TRACKED


def min_eigenvalue(sxx, sxy, syy):
    """Smaller eigenvalue of the symmetric 2x2 ``[[sxx, sxy], [sxy, syy]]``."""
    half_trace = 0.5 * (sxx + syy)
    root = np.sqrt((0.5 * (sxx - syy)) ** 2 + sxy * sxy)
    return half_trace - root


def corner_score(frame: ImageLike) -> np.ndarray:
    """Minimum eigenvalue of the gradient structure tensor over 3x3 windows."""
    ix, iy = spatial_gradients(as_array(frame))
    sxx = uniform_filter(ix * ix, 3, mode="nearest") * 9
    sxy = uniform_filter(ix * iy, 3, mode="nearest") * 9
    syy = uniform_filter(iy * iy, 3, mode="nearest") * 9
    return np.maximum(min_eigenvalue(sxx, sxy, syy), 0.0)


def detect_features(
    frame: ImageLike,
    max_points: int = 100,
    quality: float = 0.01,
    min_distance: float = 5.0,
) -> list[tuple[float, float]]:
    """Strongest local maxima of :func:`corner_score`, at least ``min_distance`` apart.

    Returns ``(x, y)`` tuples, best first. Flat images give an empty list.
    """
    if max_points < 1:
        raise ParameterError(f"max_points must be >= 1, got {max_points}")
    score = corner_score(frame)
    best = score.max()
    if not best > 0:
        return []
    peaks = (score == maximum_filter(score, size=3, mode="nearest")) & (score >= quality * best) & (score > 0)
    ys, xs = np.nonzero(peaks)
    # stable sort keeps row-major order among equal scores
    order = np.argsort(-score[ys, xs], kind="stable")
    chosen: list[tuple[float, float]] = []
    min_d2 = float(min_distance) ** 2
    for k in order:
        x, y = float(xs[k]), float(ys[k])
        if all((x - cx) ** 2 + (y - cy) ** 2 >= min_d2 for cx, cy in chosen):
            chosen.append((x, y))
            if len(chosen) == max_points:
                break
    return chosen


def _window_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    oy, ox = np.meshgrid(r, r, indexing="ij")
    return ox.ravel(), oy.ravel()


def track_sparse(
    f1: ImageLike,
    f2: ImageLike,
    points: Iterable[tuple[float, float]],
    window_radius: int = 7,
    num_levels: int = 3,
    max_iters: int = 20,
) -> list[TrackedPoint]:
    """Pyramidal Lucas-Kanade for each ``(x, y)`` in ``points``.

    A point is UNTRACKED when the finest-level structure tensor is
    degenerate (smaller eigenvalue below ``1e-4`` per window pixel), when the
    tracked position leaves the frame, or when the solve is not finite.
    """
    if window_radius < 2:
        raise ParameterError(f"window_radius must be >= 2, got {window_radius}")
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    a, b = as_array(f1), as_array(f2)
    if a.shape != b.shape:
        raise DimensionError(f"frame shapes differ: {a.shape} vs {b.shape}")
    pts = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return []

    h, w = a.shape
    pyr1 = pyramid_arrays(a, num_levels, 0.5)
    pyr2 = pyramid_arrays(b, len(pyr1), 0.5)
    ox, oy = _window_offsets(window_radius)
    area = ox.size
    guess = np.zeros_like(pts)
    degenerate = np.zeros(len(pts), dtype=bool)

    for level in range(len(pyr1) - 1, -1, -1):
        I1, I2 = pyr1[level], pyr2[level]
        ix, iy = spatial_gradients(I1)
        s = 0.5 ** level
        # pixel-centre aligned coordinate mapping, same as the pyramid resampling
        lx = (pts[:, 0] + 0.5) * s - 0.5
        ly = (pts[:, 1] + 0.5) * s - 0.5
        wx = lx[:, None] + ox[None, :]
        wy = ly[:, None] + oy[None, :]
        t1 = bilinear_sample(I1, wx, wy)
        gx = bilinear_sample(ix, wx, wy)
        gy = bilinear_sample(iy, wx, wy)
        sxx = (gx * gx).sum(axis=1)
        sxy = (gx * gy).sum(axis=1)
        syy = (gy * gy).sum(axis=1)
        det = sxx * syy - sxy * sxy
        weak = min_eigenvalue(sxx, sxy, syy) < MIN_EIG_PER_PIXEL * area
        if level == 0:
            degenerate = weak
        solvable = ~weak & (det > 0)

        d = np.zeros_like(pts)
        active = solvable.copy()
        safe_det = np.where(solvable, det, 1.0)
        for _ in range(max_iters):
            if not active.any():
                break
            px = wx + (guess[:, 0] + d[:, 0])[:, None]
            py = wy + (guess[:, 1] + d[:, 1])[:, None]
            err = t1 - bilinear_sample(I2, px, py)
            mx = (gx * err).sum(axis=1)
            my = (gy * err).sum(axis=1)
            step_x = (syy * mx - sxy * my) / safe_det
            step_y = (sxx * my - sxy * mx) / safe_det
            step_x[~active] = 0.0
            step_y[~active] = 0.0
            d[:, 0] += step_x
            d[:, 1] += step_y
            active &= np.hypot(step_x, step_y) >= CONVERGENCE_PX
        total = guess + d
        guess = total * 2.0 if level > 0 else total

    result = []
    for (x, y), (dx, dy), bad in zip(pts, guess, degenerate):
        nx, ny = x + dx, y + dy
        ok = (
            not bad
            and np.isfinite(dx)
            and np.isfinite(dy)
            and 0.0 <= x <= w - 1
            and 0.0 <= y <= h - 1
            and 0.0 <= nx <= w - 1
            and 0.0 <= ny <= h - 1
        )
        if ok:
            result.append(TrackedPoint((float(x), float(y)), (float(dx), float(dy)), TrackStatus.TRACKED))
        else:
            result.append(TrackedPoint((float(x), float(y)), None, TrackStatus.UNTRACKED))
    return result
