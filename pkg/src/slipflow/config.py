"""Line-oriented ``key = value`` files for pipeline, solver and scenario settings.

``#`` starts a comment; blank lines are ignored; unknown keys are errors.
"""
from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Callable, Mapping, Optional

from .errors import ConfigError, SlipflowError
from .flow import FarnebackParams
from .sim import Mixed, Motion, MotionKind, MotionModel, Scenario
from .slip import DetectorConfig, PipelineConfig, Policy, RoiSpec

_MOTION_NAMES = {
    "static": MotionKind.STATIC,
    "slip": MotionKind.SLIP,
    "rotate": MotionKind.ROTATE_IN_GRASP,
    "rotate_in_grasp": MotionKind.ROTATE_IN_GRASP,
    "spin": MotionKind.SPIN,
}


def parse_kv(text: str) -> dict[str, tuple[str, int]]:
    """Map key -> (raw value, line number)."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = (value, lineno)
    return out


def read_kv(path) -> dict[str, tuple[str, int]]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def _convert(key: str, value: str, lineno: int, conv: Callable):
    try:
        return conv(value)
    except (ValueError, SlipflowError) as exc:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r} ({exc})") from None


def _int(s: str) -> int:
    return int(s)


def parse_roi(text: str, border_margin: Optional[float] = None) -> RoiSpec:
    """``cx,cy,r`` or ``cx,cy,r,margin``."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise ValueError(f"ROI must be 'cx,cy,r[,margin]', got {text!r}")
    cx, cy, r = (float(p) for p in parts[:3])
    if len(parts) == 4:
        margin = float(parts[3])
    elif border_margin is not None:
        margin = border_margin
    else:
        margin = float(max(2, round(0.12 * r)))
    return RoiSpec(cx, cy, r, margin)


def _parse_single_motion(text: str) -> Motion:
    words = text.split()
    if not words or words[0].lower() not in _MOTION_NAMES:
        raise ValueError(f"unknown motion {text!r}")
    kind = _MOTION_NAMES[words[0].lower()]
    if kind is MotionKind.STATIC:
        if len(words) != 1:
            raise ValueError("static takes no rate")
        return Motion.static()
    if len(words) != 2:
        raise ValueError(f"{words[0]} needs exactly one rate")
    return Motion(kind, float(words[1]))


def parse_motion(text: str) -> MotionModel:
    """``slip 1.5``, ``rotate 2``, ``spin 0.02``, ``static``, or a schedule
    like ``static @ 0, slip 2 @ 30``."""
    if "@" not in text:
        return _parse_single_motion(text)
    segments = []
    for part in text.split(","):
        if "@" not in part:
            raise ValueError(f"schedule entry {part!r} lacks '@ start'")
        motion, start = part.rsplit("@", 1)
        segments.append((int(start), _parse_single_motion(motion.strip())))
    return Mixed(tuple(segments))


def format_motion(model: MotionModel) -> str:
    return model.describe()


DETECTOR_KEYS = {f.name for f in fields(DetectorConfig)}
FLOW_KEYS = set(FarnebackParams.field_names())
PIPELINE_KEYS = DETECTOR_KEYS | FLOW_KEYS | {"border_margin", "working_width", "working_height", "roi"}


def _typed(cls, key):
    hint = {f.name: f.type for f in fields(cls)}[key]
    if hint in ("int", int):
        return _int
    if cls is DetectorConfig and key == "policy":
        return lambda s: Policy(s.strip().upper())
    return float


def _build(cls, kv: Mapping[str, tuple[str, int]], keys):
    kwargs = {}
    for key in keys & set(kv):
        value, lineno = kv[key]
        kwargs[key] = _convert(key, value, lineno, _typed(cls, key))
    try:
        return cls(**kwargs)
    except SlipflowError as exc:
        raise ConfigError(str(exc)) from None


def _reject_unknown(kv, allowed):
    for key, (_, lineno) in kv.items():
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")


def flow_params_from(kv: Mapping[str, tuple[str, int]]) -> FarnebackParams:
    _reject_unknown(kv, FLOW_KEYS)
    return _build(FarnebackParams, kv, FLOW_KEYS)


def pipeline_from(kv: Mapping[str, tuple[str, int]], roi: Optional[RoiSpec] = None) -> PipelineConfig:
    """Pipeline settings; ``roi`` (e.g. from the command line) overrides a ``roi`` key."""
    _reject_unknown(kv, PIPELINE_KEYS)
    margin = None
    if "border_margin" in kv:
        margin = _convert("border_margin", *kv["border_margin"], float)
    if roi is None:
        if "roi" not in kv:
            raise ConfigError("no ROI given (use --roi or a 'roi = cx,cy,r' line)")
        roi = _convert("roi", *kv["roi"], lambda s: parse_roi(s, margin))
    elif margin is not None:
        roi = RoiSpec(roi.cx, roi.cy, roi.radius, margin)
    extra = {}
    if "working_width" in kv or "working_height" in kv:
        if not ("working_width" in kv and "working_height" in kv):
            raise ConfigError("working_width and working_height go together")
        working = (_convert("working_width", *kv["working_width"], _int),
                   _convert("working_height", *kv["working_height"], _int))
        if min(working) < 1:
            raise ConfigError(f"working size must be positive, got {working}")
        extra["working_size"] = working
    return PipelineConfig(
        roi=roi,
        detector=_build(DetectorConfig, kv, DETECTOR_KEYS),
        flow=_build(FarnebackParams, kv, FLOW_KEYS),
        **extra,
    )


SCENARIO_KEYS = {
    "seed", "width", "height", "num_frames", "texture_cutoff", "illumination_drift",
    "noise_sigma", "tau_x", "tau_y", "motion", "roi", "border_margin",
}


def scenario_from(kv: Mapping[str, tuple[str, int]]) -> Scenario:
    _reject_unknown(kv, SCENARIO_KEYS)
    kwargs = {}
    for key in ("seed", "width", "height", "num_frames"):
        if key in kv:
            kwargs[key] = _convert(key, *kv[key], _int)
    for key in ("texture_cutoff", "illumination_drift", "noise_sigma", "tau_x", "tau_y"):
        if key in kv:
            kwargs[key] = _convert(key, *kv[key], float)
    if "motion" in kv:
        kwargs["motion"] = _convert("motion", *kv["motion"], parse_motion)
    margin = _convert("border_margin", *kv["border_margin"], float) if "border_margin" in kv else None
    if "roi" in kv:
        kwargs["roi"] = _convert("roi", *kv["roi"], lambda s: parse_roi(s, margin))
    elif margin is not None:
        base = RoiSpec.default_for(kwargs.get("width", 320), kwargs.get("height", 240))
        kwargs["roi"] = RoiSpec(base.cx, base.cy, base.radius, margin)
    try:
        return Scenario(**kwargs)
    except SlipflowError as exc:
        raise ConfigError(str(exc)) from None


def scenario_text(s: Scenario) -> str:
    """Inverse of :func:`scenario_from`, for reproducibility next to the output."""
    roi = s.roi
    return "\n".join([
        f"seed = {s.seed}",
        f"width = {s.width}",
        f"height = {s.height}",
        f"num_frames = {s.num_frames}",
        f"motion = {format_motion(s.motion)}",
        f"roi = {roi.cx},{roi.cy},{roi.radius},{roi.border_margin}",
        f"texture_cutoff = {s.texture_cutoff}",
        f"illumination_drift = {s.illumination_drift}",
        f"noise_sigma = {s.noise_sigma}",
        f"tau_x = {s.tau_x}",
        f"tau_y = {s.tau_y}",
    ]) + "\n"
