"""Intensity frames, Gaussian pyramids, resampling and image derivatives.

All images are float64 arrays indexed ``[row, col]`` = ``[y, x]`` with
intensities in [0, 1]. Borders are handled by clamp-to-edge replication
everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionError, ParameterError

DEFAULT_FRAME_INTERVAL = 1.0 / 30.0
MIN_PYRAMID_SIDE = 16
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(eq=False)
class Frame:
    """Single-channel intensity image at a point in a sequence.

    Attributes:
        data: ``(height, width)`` float64 array, values in [0, 1].
        timestamp_index: frame ordinal within its sequence.
        frame_interval: seconds between consecutive frames.
    """

    data: np.ndarray
    timestamp_index: int = 0
    frame_interval: float = DEFAULT_FRAME_INTERVAL

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(f"frame must be a non-empty 2-D grid, got shape {data.shape}")
        if self.timestamp_index < 0:
            raise ParameterError("timestamp_index must be >= 0")
        if not self.frame_interval > 0:
            raise ParameterError("frame_interval must be > 0")
        lo, hi = data.min(), data.max()
        if not (lo >= 0.0 and hi <= 1.0):
            raise ParameterError(f"intensities must lie in [0, 1], got [{lo}, {hi}]")
        self.data = data

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def intensities(self) -> np.ndarray:
        """Row-major flat view of the pixel values."""
        return self.data.reshape(-1)

    def derive(self, data: np.ndarray) -> "Frame":
        """New frame with the same time stamp and interval."""
        return Frame(data, self.timestamp_index, self.frame_interval)


ImageLike = Union[Frame, np.ndarray]


def as_array(image: ImageLike) -> np.ndarray:
    if isinstance(image, Frame):
        return image.data
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {arr.shape}")
    return arr


def _as_frame(result: np.ndarray, like: ImageLike) -> Frame:
    if isinstance(like, Frame):
        return like.derive(result)
    return Frame(result)


@dataclass
class Gradients:
    """Spatial and temporal derivatives of an image pair."""

    ix: np.ndarray
    iy: np.ndarray
    it: np.ndarray


@dataclass
class Pyramid:
    """Coarse-to-fine image stack, ``levels[0]`` is the finest."""

    levels: list[Frame] = field(default_factory=list)
    scale: float = 0.5

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]


def luma(rgb: Union[np.ndarray, Sequence[np.ndarray]]) -> Frame:
    """Rec.601 intensity of a colour image.

    Accepts either an ``(H, W, 3)`` array or a sequence of three ``(H, W)``
    channel arrays.
    """
    if isinstance(rgb, np.ndarray) and rgb.ndim == 3:
        if rgb.shape[2] != 3:
            raise DimensionError(f"expected 3 channels, got {rgb.shape[2]}")
        channels = [rgb[..., k] for k in range(3)]
    else:
        channels = [np.asarray(c, dtype=np.float64) for c in rgb]
        if len(channels) != 3:
            raise DimensionError(f"expected 3 channels, got {len(channels)}")
    shapes = {c.shape for c in channels}
    if len(shapes) != 1 or channels[0].ndim != 2:
        raise DimensionError(f"channel dimensions differ: {sorted(shapes)}")
    r, g, b = (np.asarray(c, dtype=np.float64) for c in channels)
    out = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return Frame(np.clip(out, 0.0, 1.0))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized sampled Gaussian truncated at radius ``ceil(3 sigma)``."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur_array(img: np.ndarray, sigma: float, mode: str = "nearest") -> np.ndarray:
    k = gaussian_kernel(sigma)
    out = correlate1d(img, k, axis=1, mode=mode)
    return correlate1d(out, k, axis=0, mode=mode)


def gaussian_blur(frame: ImageLike, sigma: float) -> Frame:
    """Separable Gaussian blur with clamp-to-edge borders."""
    return _as_frame(blur_array(as_array(frame), sigma), frame)


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear lookup at fractional ``(x, y)``; coordinates clamp to the image."""
    h, w = img.shape
    xs = np.clip(xs, 0.0, w - 1)
    ys = np.clip(ys, 0.0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    top = (1.0 - fx) * img[y0, x0] + fx * img[y0, x1]
    bottom = (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
    return (1.0 - fy) * top + fy * bottom


def scaled_size(width: int, height: int, scale: float) -> tuple[int, int]:
    # the epsilon absorbs products like 100 * 0.3 = 30.000000000000004
    return (int(math.ceil(width * scale - 1e-9)), int(math.ceil(height * scale - 1e-9)))


def _linear_taps(n_out: int, n_in: int):
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    return i0, np.minimum(i0 + 1, n_in - 1), src - i0


def resize_array(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resampling onto a ``width x height`` grid (pixel-centre aligned).

    Done as two 1-D passes; the arithmetic matches :func:`bilinear_sample`
    term for term.
    """
    h, w = img.shape
    x0, x1, fx = _linear_taps(width, w)
    y0, y1, fy = _linear_taps(height, h)
    rows = (1.0 - fx) * img[:, x0] + fx * img[:, x1]
    return (1.0 - fy)[:, None] * rows[y0] + fy[:, None] * rows[y1]


def downsample_sigma(scale: float) -> float:
    return 0.5 * (1.0 / scale - 1.0) + 0.25


def downsample_array(img: np.ndarray, scale: float) -> np.ndarray:
    if not 0.0 < scale < 1.0:
        raise ParameterError(f"scale must lie in (0, 1), got {scale}")
    h, w = img.shape
    nw, nh = scaled_size(w, h, scale)
    if nw < 1 or nh < 1:
        raise ParameterError("downsampled image would be empty")
    return resize_array(blur_array(img, downsample_sigma(scale)), nw, nh)


def downsample(frame: ImageLike, scale: float) -> Frame:
    """Anti-aliased reduction to ``ceil(dims * scale)``."""
    return _as_frame(downsample_array(as_array(frame), scale), frame)


def pyramid_arrays(img: np.ndarray, num_levels: int, scale: float) -> list[np.ndarray]:
    if num_levels < 1:
        raise ParameterError(f"num_levels must be >= 1, got {num_levels}")
    if not 0.0 < scale < 1.0:
        raise ParameterError(f"scale must lie in (0, 1), got {scale}")
    levels = [img]
    while len(levels) < num_levels:
        h, w = levels[-1].shape
        nw, nh = scaled_size(w, h, scale)
        if nw < MIN_PYRAMID_SIDE or nh < MIN_PYRAMID_SIDE:
            break
        levels.append(downsample_array(levels[-1], scale))
    return levels


def build_pyramid(frame: ImageLike, num_levels: int, scale: float = 0.5) -> Pyramid:
    """Gaussian pyramid; stops early once a side would drop below 16 px."""
    arrays = pyramid_arrays(as_array(frame), num_levels, scale)
    return Pyramid([_as_frame(a, frame) for a in arrays], scale)


def warp(frame: ImageLike, flow) -> Frame:
    """Backward warp: ``out(x, y) = frame(x + u(x, y), y + v(x, y))``.

    ``flow`` is a :class:`~slipflow.flow.FlowField` or any object with
    ``u`` and ``v`` arrays.
    """
    img = as_array(frame)
    u, v = np.asarray(flow.u), np.asarray(flow.v)
    if u.shape != img.shape or v.shape != img.shape:
        raise DimensionError(f"flow {u.shape} does not match frame {img.shape}")
    h, w = img.shape
    xs = np.arange(w, dtype=np.float64)[None, :] + u
    ys = np.arange(h, dtype=np.float64)[:, None] + v
    return _as_frame(bilinear_sample(img, xs, ys), frame)


def spatial_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences inside, one-sided differences on the border."""
    h, w = img.shape
    ix = np.zeros_like(img)
    iy = np.zeros_like(img)
    if w > 1:
        ix[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
        ix[:, 0] = img[:, 1] - img[:, 0]
        ix[:, -1] = img[:, -1] - img[:, -2]
    if h > 1:
        iy[1:-1, :] = 0.5 * (img[2:, :] - img[:-2, :])
        iy[0, :] = img[1, :] - img[0, :]
        iy[-1, :] = img[-1, :] - img[-2, :]
    return ix, iy


def gradients(f1: ImageLike, f2: ImageLike) -> Gradients:
    """Derivatives for the brightness-constancy constraint.

    ``ix``/``iy`` are taken on the mean of both frames, ``it = f2 - f1``.
    """
    a, b = as_array(f1), as_array(f2)
    if a.shape != b.shape:
        raise DimensionError(f"frame shapes differ: {a.shape} vs {b.shape}")
    ix, iy = spatial_gradients(0.5 * (a + b))
    return Gradients(ix, iy, b - a)
