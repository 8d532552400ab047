"""Detection quality of an event log against a truth track."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import FormatError
from .formats import EventRecord, TruthRecord

SLIPPING = "SLIPPING"


@dataclass(frozen=True)
class EvalResult:
    slip_onsets: int
    detected: int
    recall: Optional[float]
    nonslip_frames: int
    false_slips: int
    false_slip_rate: Optional[float]
    mean_latency: Optional[float]

    def lines(self) -> list[str]:
        def fmt(x):
            return "n/a" if x is None else f"{x:.2f}"

        return [
            f"slip_recall = {fmt(self.recall)}  ({self.detected}/{self.slip_onsets} onsets)",
            f"false_slip_rate = {fmt(self.false_slip_rate)}  ({self.false_slips}/{self.nonslip_frames} frames)",
            f"mean_detection_latency = {fmt(self.mean_latency)} frames",
        ]


def slip_episodes(labels: Sequence[str]) -> list[tuple[int, int]]:
    """``[start, end)`` frame ranges where the true label is SLIPPING."""
    episodes = []
    start = None
    for k, label in enumerate(labels):
        if label == SLIPPING and start is None:
            start = k
        elif label != SLIPPING and start is not None:
            episodes.append((start, k))
            start = None
    if start is not None:
        episodes.append((start, len(labels)))
    return episodes


def evaluate(events: Sequence[EventRecord], truth: Sequence[TruthRecord], latency_bound: int = 6) -> EvalResult:
    """Slip recall within ``latency_bound`` frames of onset, and false-slip rate.

    A slip counts as detected when a SLIPPING event appears no later than
    ``onset + latency_bound``. Non-slip frames within ``latency_bound`` after
    a slip episode ends are not scored, since the debounced state may lag.
    """
    labels = [None] * (max((t.frame for t in truth), default=-1) + 1)
    for t in truth:
        labels[t.frame] = t.true_state
    if any(label is None for label in labels):
        raise FormatError("truth track has gaps in its frame numbering")
    state_at = {e.frame: e.state for e in events}

    episodes = slip_episodes(labels)
    latencies = []
    for start, _ in episodes:
        for f in range(start, start + latency_bound + 1):
            if state_at.get(f) == SLIPPING:
                latencies.append(f - start)
                break

    grace = set()
    for _, end in episodes:
        grace.update(range(end, end + latency_bound))
    scored = [f for f, label in enumerate(labels) if label != SLIPPING and f not in grace and f in state_at]
    false = sum(1 for f in scored if state_at[f] == SLIPPING)

    return EvalResult(
        slip_onsets=len(episodes),
        detected=len(latencies),
        recall=len(latencies) / len(episodes) if episodes else None,
        nonslip_frames=len(scored),
        false_slips=false,
        false_slip_rate=false / len(scored) if scored else None,
        mean_latency=math.fsum(latencies) / len(latencies) if latencies else None,
    )
