"""Synthetic gripper-camera sequences with exactly known motion.

Each scenario renders a band-limited random texture inside the lens circle
and a static dark housing around it. The texture is tiled periodically,
so any amount of cumulative motion stays well defined.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``; only its uniform doubles (53-bit, ``next_uint64 >> 11``)
are consumed, and normal noise is produced from them by Box-Muller.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ParameterError
from .image import Frame, gaussian_kernel
from .slip import RoiSpec, SlipState

TEXTURE_LOW, TEXTURE_HIGH = 0.2, 0.8
HOUSING_LEVEL = 0.05
RING_OFFSET = 6.0
RING_WIDTH = 1.5
RING_GAIN = 0.08


class MotionKind(enum.Enum):
    STATIC = "STATIC"
    SLIP = "SLIP"
    ROTATE_IN_GRASP = "ROTATE_IN_GRASP"
    SPIN = "SPIN"


@dataclass(frozen=True)
class Motion:
    """Constant per-frame motion.

    ``rate`` is vy (px/frame) for SLIP, vx (px/frame) for ROTATE_IN_GRASP
    and the angular step (rad/frame, about the ROI centre) for SPIN.
    """

    kind: MotionKind
    rate: float = 0.0

    @classmethod
    def static(cls):
        return cls(MotionKind.STATIC)

    @classmethod
    def slip(cls, vy: float):
        return cls(MotionKind.SLIP, vy)

    @classmethod
    def rotate(cls, vx: float):
        return cls(MotionKind.ROTATE_IN_GRASP, vx)

    @classmethod
    def spin(cls, omega: float):
        return cls(MotionKind.SPIN, omega)

    def translation(self) -> tuple[float, float]:
        if self.kind is MotionKind.SLIP:
            return 0.0, self.rate
        if self.kind is MotionKind.ROTATE_IN_GRASP:
            return self.rate, 0.0
        return 0.0, 0.0

    def describe(self) -> str:
        if self.kind is MotionKind.STATIC:
            return "static"
        return f"{self.kind.value.lower()} {self.rate}"


@dataclass(frozen=True)
class Mixed:
    """Piecewise schedule: ``(start_frame, motion)`` pairs, starts strictly increasing.

    Frames before the first start are static.
    """

    segments: tuple[tuple[int, Motion], ...]

    def __post_init__(self):
        starts = [s for s, _ in self.segments]
        if not starts:
            raise ParameterError("mixed motion needs at least one segment")
        if any(b <= a for a, b in zip(starts, starts[1:])) or starts[0] < 0:
            raise ParameterError(f"segment start frames must be strictly increasing, got {starts}")

    def at(self, t: int) -> Motion:
        active = Motion.static()
        for start, motion in self.segments:
            if start <= t:
                active = motion
        return active

    def describe(self) -> str:
        return ", ".join(f"{m.describe()} @ {s}" for s, m in self.segments)


MotionModel = Union[Motion, Mixed]


def motion_at(model: MotionModel, t: int) -> Motion:
    """Motion that carries frame ``t - 1`` to frame ``t``."""
    return model.at(t) if isinstance(model, Mixed) else model


@dataclass(frozen=True)
class Scenario:
    seed: int = 0
    width: int = 320
    height: int = 240
    roi: Optional[RoiSpec] = None
    motion: MotionModel = field(default_factory=Motion.static)
    num_frames: int = 30
    texture_cutoff: float = 0.25
    illumination_drift: float = 0.0
    noise_sigma: float = 0.0
    tau_x: float = 1.0
    tau_y: float = 1.0

    def __post_init__(self):
        if self.num_frames < 2:
            raise ParameterError("num_frames must be >= 2")
        if not 0 < self.texture_cutoff <= 1:
            raise ParameterError("texture_cutoff must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be >= 0")
        if self.roi is None:
            object.__setattr__(self, "roi", RoiSpec.default_for(self.width, self.height))
        self.roi.validate(self.width, self.height)


@dataclass
class GroundTruth:
    velocities: list[tuple[float, float]]
    labels: list[SlipState]

    def __len__(self):
        return len(self.labels)


def _uniform(seed_words) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_words)))


def make_texture(seed: int, width: int, height: int, cutoff: float = 0.25) -> np.ndarray:
    """Seeded white noise, Gaussian low-pass (sigma = 1/cutoff, periodic), rescaled to [0.2, 0.8]."""
    if not 0 < cutoff <= 1:
        raise ParameterError(f"cutoff must lie in (0, 1], got {cutoff}")
    noise = _uniform([seed, 0]).random((height, width))
    k = gaussian_kernel(1.0 / cutoff)
    smooth = correlate1d(correlate1d(noise, k, axis=1, mode="wrap"), k, axis=0, mode="wrap")
    lo, hi = smooth.min(), smooth.max()
    out = TEXTURE_LOW + (TEXTURE_HIGH - TEXTURE_LOW) * (smooth - lo) / (hi - lo)
    return np.clip(out, TEXTURE_LOW, TEXTURE_HIGH)


def sample_periodic(tex: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear lookup into a periodically tiled texture."""
    h, w = tex.shape
    x0f = np.floor(xs)
    y0f = np.floor(ys)
    fx = xs - x0f
    fy = ys - y0f
    x0 = np.mod(x0f.astype(np.int64), w)
    y0 = np.mod(y0f.astype(np.int64), h)
    x1 = (x0 + 1) % w
    y1 = (y0 + 1) % h
    top = (1.0 - fx) * tex[y0, x0] + fx * tex[y0, x1]
    bottom = (1.0 - fx) * tex[y1, x0] + fx * tex[y1, x1]
    return (1.0 - fy) * top + fy * bottom


def translated_pair(seed: int, width: int, height: int, dx: float, dy: float, cutoff: float = 0.25):
    """Full-frame texture and its copy moved by ``(dx, dy)``; true flow is ``(dx, dy)``."""
    tex = make_texture(seed, width, height, cutoff)
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    return tex.copy(), sample_periodic(tex, x - dx, y - dy)


def gaussian_noise(seed: int, t: int, shape: tuple[int, int]) -> np.ndarray:
    """Standard normal field for frame ``t`` via Box-Muller on PCG64 uniforms."""
    n = shape[0] * shape[1]
    u = _uniform([seed, 1, t]).random(2 * ((n + 1) // 2))
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:n].reshape(shape)


class Renderer:
    """Pre-computes the geometry, texture and housing of one scenario."""

    def __init__(self, scenario: Scenario):
        s = self.scenario = scenario
        self.texture = make_texture(s.seed, s.width, s.height, s.texture_cutoff)
        y, x = np.mgrid[0:s.height, 0:s.width].astype(np.float64)
        roi = s.roi
        dist = np.hypot(x - roi.cx, y - roi.cy)
        self.lens = dist <= roi.radius
        self.lens_x = x[self.lens] - roi.cx
        self.lens_y = y[self.lens] - roi.cy
        ring = RING_GAIN * np.exp(-0.5 * ((dist - roi.radius - RING_OFFSET) / RING_WIDTH) ** 2)
        self.housing = np.where(self.lens, 0.0, HOUSING_LEVEL + ring)
        self._poses = [(0.0, 0.0, 0.0)]

    def pose(self, t: int) -> tuple[float, float, float]:
        """Cumulative ``(theta, dx, dy)``: texture point q is shown at ``c + R(theta)(q - c) + d``."""
        if not 0 <= t < self.scenario.num_frames:
            raise ParameterError(f"frame {t} outside [0, {self.scenario.num_frames})")
        while len(self._poses) <= t:
            k = len(self._poses)
            theta, dx, dy = self._poses[-1]
            m = motion_at(self.scenario.motion, k)
            if m.kind is MotionKind.SPIN:
                c, s = math.cos(m.rate), math.sin(m.rate)
                theta, dx, dy = theta + m.rate, c * dx - s * dy, s * dx + c * dy
            else:
                tx, ty = m.translation()
                dx, dy = dx + tx, dy + ty
            self._poses.append((theta, dx, dy))
        return self._poses[t]

    def render(self, t: int) -> Frame:
        s = self.scenario
        theta, dx, dy = self.pose(t)
        # inverse pose: q - c = R(-theta)(p - c - d)
        px = self.lens_x - dx
        py = self.lens_y - dy
        c, sn = math.cos(theta), math.sin(theta)
        qx = c * px + sn * py + s.roi.cx
        qy = -sn * px + c * py + s.roi.cy
        img = self.housing.copy()
        img[self.lens] = sample_periodic(self.texture, qx, qy) + s.illumination_drift * t
        if s.noise_sigma > 0:
            img += s.noise_sigma * gaussian_noise(s.seed, t, img.shape)
        np.clip(img, 0.0, 1.0, out=img)
        return Frame(img, timestamp_index=t)


def render_frame(scenario: Scenario, t: int) -> Frame:
    return Renderer(scenario).render(t)


def label_for(v: tuple[float, float], tau_x: float, tau_y: float) -> SlipState:
    if abs(v[1]) > tau_y:
        return SlipState.SLIPPING
    if abs(v[0]) > tau_x:
        return SlipState.ROTATING
    return SlipState.STABLE


def ground_truth(scenario: Scenario) -> GroundTruth:
    """Analytic mean ROI velocity and label per frame (frame 0 is at rest)."""
    velocities = [(0.0, 0.0)]
    for t in range(1, scenario.num_frames):
        velocities.append(motion_at(scenario.motion, t).translation())
    labels = [label_for(v, scenario.tau_x, scenario.tau_y) for v in velocities]
    return GroundTruth(velocities, labels)


def generate_sequence(scenario: Scenario) -> tuple[list[Frame], GroundTruth]:
    r = Renderer(scenario)
    return [r.render(t) for t in range(scenario.num_frames)], ground_truth(scenario)
