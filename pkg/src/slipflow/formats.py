"""Binary PGM/PPM, Middlebury ``.flo``, JSONL event logs and flow overlays."""
from __future__ import annotations

import json
import os
import re
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .errors import DimensionError, FormatError, ParameterError
from .flow import FlowField
from .image import Frame, ImageLike, as_array

PathLike = Union[str, os.PathLike]

FLO_TAG = 202021.25
FLO_TAG_BYTES = struct.pack("<f", FLO_TAG)
FRAME_PATTERN = "frame_{:06d}.pgm"
_FRAME_RE = re.compile(r"^frame_(\d+)\.pgm$")


# -- netpbm -----------------------------------------------------------------

def _parse_netpbm_header(data: bytes, magic: bytes) -> tuple[int, int, int]:
    """Returns ``(width, height, payload_offset)``; maxval must be 255."""
    if data[:2] != magic:
        raise FormatError(f"bad magic {data[:2]!r}, expected {magic!r}", 0)
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError("expected a header integer", pos)
        fields.append((int(data[start:pos]), start))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError("header must end with a single whitespace byte", pos)
    (width, _), (height, _), (maxval, maxval_at) = fields
    if maxval != 255:
        raise FormatError(f"maxval {maxval} not supported, only 8-bit (255)", maxval_at)
    if width < 1 or height < 1:
        raise FormatError(f"invalid size {width}x{height}", fields[0][1])
    return width, height, pos + 1


def quantize(img: np.ndarray) -> np.ndarray:
    """``round(value * 255)`` (half up), clamped to the byte range."""
    return np.clip(np.floor(np.asarray(img) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def parse_pgm(data: bytes) -> Frame:
    width, height, offset = _parse_netpbm_header(data, b"P5")
    need = width * height
    if len(data) - offset < need:
        raise FormatError(f"payload truncated: {len(data) - offset} of {need} bytes", len(data))
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset)
    return Frame(pixels.reshape(height, width) / 255.0)


def encode_pgm(frame: ImageLike) -> bytes:
    img = as_array(frame)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode() + quantize(img).tobytes()


def read_frame_pgm(path: PathLike) -> Frame:
    return parse_pgm(Path(path).read_bytes())


def write_frame_pgm(frame: ImageLike, path: PathLike) -> None:
    Path(path).write_bytes(encode_pgm(frame))


def encode_ppm(rgb: np.ndarray) -> bytes:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) image, got {rgb.shape}")
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode() + quantize(rgb).tobytes()


def parse_ppm(data: bytes) -> np.ndarray:
    width, height, offset = _parse_netpbm_header(data, b"P6")
    need = 3 * width * height
    if len(data) - offset < need:
        raise FormatError(f"payload truncated: {len(data) - offset} of {need} bytes", len(data))
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset)
    return pixels.reshape(height, width, 3) / 255.0


def write_ppm(rgb: np.ndarray, path: PathLike) -> None:
    Path(path).write_bytes(encode_ppm(rgb))


def read_ppm(path: PathLike) -> np.ndarray:
    return parse_ppm(Path(path).read_bytes())


def frame_paths(directory: PathLike) -> list[Path]:
    """``frame_NNNNNN.pgm`` files in numeric order."""
    found = []
    for p in Path(directory).iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    return [p for _, p in sorted(found)]


def read_sequence(directory: PathLike) -> list[Frame]:
    frames = []
    for k, p in enumerate(frame_paths(directory)):
        f = read_frame_pgm(p)
        frames.append(Frame(f.data, timestamp_index=k))
    return frames


def write_sequence(frames: Iterable[ImageLike], directory: PathLike) -> list[Path]:
    """Files are numbered from 1; the k-th file holds frame index k - 1."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, f in enumerate(frames):
        p = directory / FRAME_PATTERN.format(k + 1)
        write_frame_pgm(f, p)
        paths.append(p)
    return paths


# -- .flo -------------------------------------------------------------------

def encode_flo(flow: FlowField) -> bytes:
    h, w = flow.shape
    body = np.empty((h, w, 2), dtype="<f4")
    body[..., 0] = flow.u
    body[..., 1] = flow.v
    return FLO_TAG_BYTES + struct.pack("<ii", w, h) + body.tobytes()


def parse_flo(data: bytes) -> FlowField:
    if len(data) < 12:
        raise FormatError(f"file too short for a .flo header ({len(data)} bytes)", len(data))
    if data[:4] != FLO_TAG_BYTES:
        raise FormatError(f"bad .flo tag {struct.unpack('<f', data[:4])[0]!r}", 0)
    w, h = struct.unpack("<ii", data[4:12])
    if w < 1 or h < 1:
        raise FormatError(f"invalid size {w}x{h}", 4)
    need = 8 * w * h
    if len(data) - 12 != need:
        raise FormatError(f"payload is {len(data) - 12} bytes, expected {need}", 12)
    body = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w, 2)
    return FlowField(body[..., 0].astype(np.float64), body[..., 1].astype(np.float64))


def write_flo(flow: FlowField, path: PathLike) -> None:
    Path(path).write_bytes(encode_flo(flow))


def read_flo(path: PathLike) -> FlowField:
    return parse_flo(Path(path).read_bytes())


# -- JSONL logs -------------------------------------------------------------

def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


@dataclass(frozen=True)
class EventRecord:
    frame: int
    state: str
    vx: float
    vy: float
    static_residual: float
    command: str
    force: Optional[float]

    @classmethod
    def from_event(cls, event) -> "EventRecord":
        vx, vy = event.mean_velocity
        return cls(
            event.frame_index,
            event.state.value,
            _sig6(vx),
            _sig6(vy),
            _sig6(event.static_residual),
            event.command,
            float(event.force),
        )


@dataclass(frozen=True)
class TruthRecord:
    frame: int
    true_vx: float
    true_vy: float
    true_state: str


def _write_jsonl(records, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")


def _read_jsonl(path: PathLike, cls):
    keys = set(cls.__dataclass_fields__)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise FormatError(f"line {lineno}: expected a JSON object", lineno)
            if set(obj) != keys:
                missing = sorted(keys - set(obj))
                extra = sorted(set(obj) - keys)
                raise FormatError(f"line {lineno}: missing keys {missing}, unexpected keys {extra}", lineno)
            out.append(cls(**obj))
    return out


def write_events_jsonl(records: Iterable[EventRecord], path: PathLike) -> None:
    _write_jsonl(records, path)


def read_events_jsonl(path: PathLike) -> list[EventRecord]:
    return _read_jsonl(path, EventRecord)


def write_truth_jsonl(records: Iterable[TruthRecord], path: PathLike) -> None:
    _write_jsonl(records, path)


def read_truth_jsonl(path: PathLike) -> list[TruthRecord]:
    return _read_jsonl(path, TruthRecord)


def truth_records(truth) -> list[TruthRecord]:
    return [
        TruthRecord(k, float(vx), float(vy), label.value)
        for k, ((vx, vy), label) in enumerate(zip(truth.velocities, truth.labels))
    ]


# -- overlay ----------------------------------------------------------------

GREEN = np.array([0.0, 1.0, 0.0])


def line_pixels(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer Bresenham line, both endpoints included."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    pts = []
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def lattice(size: int, stride: int) -> range:
    return range(stride // 2, size, stride)


def render_flow_overlay(frame: ImageLike, flow: FlowField, stride: int = 10, gain: float = 5.0) -> np.ndarray:
    """Grey frame with a green segment from each lattice point along ``gain * flow``.

    Zero vectors leave a single green dot. Returns an ``(H, W, 3)`` image.
    """
    if stride < 4:
        raise ParameterError(f"stride must be >= 4, got {stride}")
    img = as_array(frame)
    if img.shape != flow.shape:
        raise DimensionError(f"flow {flow.shape} does not match frame {img.shape}")
    h, w = img.shape
    rgb = np.repeat(img[:, :, None], 3, axis=2)
    for y in lattice(h, stride):
        for x in lattice(w, stride):
            ex = int(np.clip(np.floor(x + gain * flow.u[y, x] + 0.5), 0, w - 1))
            ey = int(np.clip(np.floor(y + gain * flow.v[y, x] + 0.5), 0, h - 1))
            for px, py in line_pixels(x, y, ex, ey):
                rgb[py, px] = GREEN
    return rgb
