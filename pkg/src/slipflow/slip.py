"""Slip detection for a camera looking through the gripper's lens.

The image splits into a circular region showing the grasped object and
the surrounding camera housing. The object's velocity is the mean flow
inside the circle; the housing should show no flow at all. Vertical
motion is slip, horizontal motion is the object turning in the grasp.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import ConfigError, DimensionError, ParameterError
from .flow import DenseFlow, FarnebackParams, FlowField
from .image import Frame, ImageLike, as_array, blur_array, downsample_sigma, resize_array, scaled_size


class SlipState(enum.Enum):
    STABLE = "STABLE"
    ROTATING = "ROTATING"
    SLIPPING = "SLIPPING"


class Policy(enum.Enum):
    AUTO_TIGHTEN = "AUTO_TIGHTEN"
    REPORT_ONLY = "REPORT_ONLY"


class Command(enum.Enum):
    NO_ACTION = "NO_ACTION"
    INCREASE_FORCE = "INCREASE_FORCE"
    SLIP_ERROR = "SLIP_ERROR"
    CAMERA_ERROR = "CAMERA_ERROR"


@dataclass(frozen=True)
class RoiSpec:
    cx: float
    cy: float
    radius: float
    border_margin: float = 0.0

    def __post_init__(self):
        if not self.radius > self.border_margin >= 0:
            raise ConfigError(f"need radius > border_margin >= 0, got {self.radius}, {self.border_margin}")

    def validate(self, width: int, height: int):
        if (
            self.cx - self.radius < 0
            or self.cy - self.radius < 0
            or self.cx + self.radius > width - 1
            or self.cy + self.radius > height - 1
        ):
            raise ConfigError(f"ROI circle {self} does not fit in a {width}x{height} frame")

    def scaled(self, factor: float) -> "RoiSpec":
        return RoiSpec(self.cx * factor, self.cy * factor, self.radius * factor, self.border_margin * factor)

    @classmethod
    def default_for(cls, width: int, height: int) -> "RoiSpec":
        """Centred circle covering most of the short side, 5% margin."""
        side = min(width, height)
        return cls(width / 2.0, height / 2.0, float(int(0.42 * side)), float(max(2, round(0.05 * side))))


@dataclass
class RegionMasks:
    inside: np.ndarray
    outside: np.ndarray


def build_masks(roi: RoiSpec, width: int, height: int) -> RegionMasks:
    """Object disc shrunk by the margin, and housing beyond the grown circle."""
    roi.validate(width, height)
    y, x = np.mgrid[0:height, 0:width]
    d2 = (x - roi.cx) ** 2 + (y - roi.cy) ** 2
    inside = d2 <= (roi.radius - roi.border_margin) ** 2
    # with zero margin the circle itself would satisfy both tests; it belongs to the interior
    outside = (d2 >= (roi.radius + roi.border_margin) ** 2) & ~inside
    if not inside.any():
        raise ConfigError("ROI interior is empty")
    if not outside.any():
        raise ConfigError("housing region is empty")
    return RegionMasks(inside, outside)


def _check_dims(flow: FlowField, masks: RegionMasks):
    if flow.shape != masks.inside.shape:
        raise DimensionError(f"flow {flow.shape} does not match masks {masks.inside.shape}")


def mean_roi_velocity(flow: FlowField, masks: RegionMasks) -> tuple[float, float]:
    _check_dims(flow, masks)
    return float(flow.u[masks.inside].mean()), float(flow.v[masks.inside].mean())


def static_check(flow: FlowField, masks: RegionMasks, static_tol: float) -> tuple[float, bool]:
    """Mean flow magnitude over the housing and whether it is within tolerance."""
    _check_dims(flow, masks)
    sel = masks.outside
    residual = float(np.hypot(flow.u[sel], flow.v[sel]).mean())
    return residual, residual <= static_tol


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds are in pixels per frame at the working resolution."""

    tau_y: float = 1.0
    tau_x: float = 1.0
    debounce: int = 3
    static_tol: float = 0.5
    policy: Policy = Policy.AUTO_TIGHTEN
    force_step: float = 10.0
    force_max: float = 100.0
    initial_force: float = 20.0

    def __post_init__(self):
        if not (self.tau_y > 0 and self.tau_x > 0 and self.static_tol > 0):
            raise ConfigError("tau_y, tau_x and static_tol must be > 0")
        if self.debounce < 1:
            raise ConfigError("debounce must be >= 1")
        if not 0 < self.force_step <= self.force_max:
            raise ConfigError("need 0 < force_step <= force_max")
        if not 0 <= self.initial_force <= self.force_max:
            raise ConfigError("initial_force must lie in [0, force_max]")
        if not isinstance(self.policy, Policy):
            object.__setattr__(self, "policy", Policy(str(self.policy).upper()))


def raw_state(v: tuple[float, float], config: DetectorConfig) -> SlipState:
    """Per-frame rule; slip takes precedence when both thresholds are exceeded."""
    vx, vy = v
    if not (np.isfinite(vx) and np.isfinite(vy)):
        raise ParameterError(f"velocity must be finite, got {v}")
    if abs(vy) > config.tau_y:
        return SlipState.SLIPPING
    if abs(vx) > config.tau_x:
        return SlipState.ROTATING
    return SlipState.STABLE


class Debouncer:
    """Reported state changes only after ``n`` identical raw states in a row."""

    def __init__(self, n: int, initial: SlipState = SlipState.STABLE):
        if n < 1:
            raise ParameterError("debounce must be >= 1")
        self.n = n
        self.reported = initial
        self._candidate: Optional[SlipState] = None
        self._run = 0

    def update(self, raw: SlipState) -> SlipState:
        if raw == self._candidate:
            self._run += 1
        else:
            self._candidate, self._run = raw, 1
        if self._run >= self.n:
            self.reported = raw
        return self.reported


def classify(v: tuple[float, float], config: DetectorConfig, history: Debouncer) -> SlipState:
    """Debounced classification; ``history`` carries state between frames."""
    return history.update(raw_state(v, config))


@dataclass(frozen=True)
class Reaction:
    commands: tuple[Command, ...]
    force: float


def react(state: SlipState, config: DetectorConfig, current_force: float, camera_suspect: bool = False) -> Reaction:
    """Gripper response to the reported state.

    Turning in the grasp needs no intervention. Slip either tightens the
    grip by one step, or, when tightening is disabled or would pass the
    ceiling, raises an error. A failed housing check adds CAMERA_ERROR.
    """
    if not 0 <= current_force <= config.force_max:
        raise ParameterError(f"current_force {current_force} outside [0, {config.force_max}]")
    force = current_force
    if state is SlipState.SLIPPING:
        nxt = current_force + config.force_step
        if config.policy is Policy.AUTO_TIGHTEN and nxt <= config.force_max:
            commands = [Command.INCREASE_FORCE]
            force = nxt
        else:
            commands = [Command.SLIP_ERROR]
    else:
        commands = [Command.NO_ACTION]
    if camera_suspect:
        commands.append(Command.CAMERA_ERROR)
    return Reaction(tuple(commands), force)


@dataclass(frozen=True)
class GripEvent:
    frame_index: int
    state: SlipState
    mean_velocity: tuple[float, float]
    static_residual: float
    commands: tuple[Command, ...]
    force: float
    camera_suspect: bool = False

    @property
    def command(self) -> str:
        return "+".join(c.value for c in self.commands)


@dataclass(frozen=True)
class PipelineConfig:
    roi: RoiSpec
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    flow: FarnebackParams = field(default_factory=FarnebackParams)
    # bounding box for the flow resolution: larger frames are reduced by one
    # aspect-preserving factor, smaller ones are used as is; None disables
    working_size: Optional[tuple[int, int]] = (320, 240)


class SlipDetector:
    """Stateful per-grasp pipeline: flow, region statistics, debounce, reaction.

    Frames must arrive in order; one instance serves one grasp.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.flow_engine = DenseFlow(config.flow)
        self.history = Debouncer(config.detector.debounce)
        self.force = config.detector.initial_force
        self._masks: Optional[RegionMasks] = None
        self._mask_key = None
        self._last_index: Optional[int] = None
        self._prepared = (None, None)
        self.last_flow: Optional[FlowField] = None

    def _prepare(self, frame: ImageLike) -> np.ndarray:
        img = as_array(frame)
        src, out = self._prepared
        if img is src:
            return out
        size = self.config.working_size
        h, w = img.shape
        factor = 1.0 if size is None else min(1.0, size[0] / w, size[1] / h)
        if factor < 1.0:
            ww, hh = scaled_size(w, h, factor)
            out = resize_array(blur_array(img, downsample_sigma(factor)), ww, hh)
        else:
            out = img
        self._prepared = (as_array(frame), out)
        return out

    def masks_for(self, input_width: int, width: int, height: int) -> RegionMasks:
        key = (input_width, width, height)
        if self._mask_key != key:
            # the ROI is given in input pixels
            roi = self.config.roi.scaled(width / input_width) if width != input_width else self.config.roi
            self._masks = build_masks(roi, width, height)
            self._mask_key = key
        return self._masks

    def process_frame(self, f_prev: ImageLike, f_curr: ImageLike, frame_index: Optional[int] = None) -> GripEvent:
        """Flow between two consecutive frames turned into one event."""
        if frame_index is None:
            stamp = f_curr.timestamp_index if isinstance(f_curr, Frame) else 0
            last = self._last_index if self._last_index is not None else 0
            frame_index = stamp if stamp > last else last + 1
        if self._last_index is not None and frame_index <= self._last_index:
            raise ParameterError(f"frame {frame_index} arrived after frame {self._last_index}")
        a = self._prepare(f_prev)
        b = self._prepare(f_curr)
        flow = self.flow_engine(a, b)
        masks = self.masks_for(as_array(f_curr).shape[1], b.shape[1], b.shape[0])
        cfg = self.config.detector
        v = mean_roi_velocity(flow, masks)
        residual, ok = static_check(flow, masks, cfg.static_tol)
        state = classify(v, cfg, self.history)
        reaction = react(state, cfg, self.force, camera_suspect=not ok)
        self.force = reaction.force
        self._last_index = frame_index
        self.last_flow = flow
        return GripEvent(frame_index, state, v, residual, reaction.commands, reaction.force, not ok)

    def run(self, frames: Iterable[ImageLike]) -> Iterator[GripEvent]:
        """Events for each consecutive pair; event ``k`` belongs to frame ``k``."""
        prev = None
        for k, frame in enumerate(frames):
            if prev is not None:
                yield self.process_frame(prev, frame, k)
            prev = frame


def detect_sequence(frames: Iterable[ImageLike], config: PipelineConfig) -> list[GripEvent]:
    return list(SlipDetector(config).run(frames))


def with_detector(config: PipelineConfig, **changes) -> PipelineConfig:
    return replace(config, detector=replace(config.detector, **changes))
