"""Throughput of the dense slip pipeline on synthetic frames."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from .sim import Motion, Renderer, Scenario
from .slip import PipelineConfig, SlipDetector


@dataclass(frozen=True)
class BenchResult:
    width: int
    height: int
    frames: int
    seconds: float
    median_ms: float

    @property
    def fps(self) -> float:
        return self.frames / self.seconds

    def lines(self) -> list[str]:
        return [
            f"size = {self.width}x{self.height}",
            f"frames = {self.frames}",
            f"fps = {self.fps:.1f}",
            f"median_ms_per_frame = {self.median_ms:.2f}",
        ]


def benchmark(width: int = 320, height: int = 240, frames: int = 300, seed: int = 0) -> BenchResult:
    """Time ``frames`` calls of the full per-frame pipeline (rendering excluded)."""
    scenario = Scenario(seed=seed, width=width, height=height, motion=Motion.slip(2.0), num_frames=frames + 1)
    renderer = Renderer(scenario)
    seq = [renderer.render(t) for t in range(frames + 1)]
    config = PipelineConfig(roi=scenario.roi)

    # compile the kernels outside the timed region
    SlipDetector(config).process_frame(seq[0], seq[1], 1)

    detector = SlipDetector(config)
    per_frame = []
    start = time.perf_counter()
    for k in range(1, frames + 1):
        t0 = time.perf_counter()
        detector.process_frame(seq[k - 1], seq[k], k)
        per_frame.append(time.perf_counter() - t0)
    total = time.perf_counter() - start
    return BenchResult(width, height, frames, total, 1000.0 * statistics.median(per_frame))
