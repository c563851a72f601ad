"""Bandwidth traces: one delivery opportunity per line, millisecond stamps.

The on-disk format is Mahimahi-compatible: ASCII decimal integers, one
per line, each granting one MTU-sized packet transmission at that
millisecond. Traces loop (with period = trace duration) when a run
outlasts them.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterator

PACKET_BITS = 1500 * 8


class TraceError(ValueError):
    """Raised for unreadable or non-monotonic trace files."""


@dataclass
class BandwidthTrace:
    opportunities: list[int]  # ms timestamps, non-decreasing
    period_ms: int

    def __post_init__(self) -> None:
        if not self.opportunities:
            raise TraceError("trace has no delivery opportunities")
        if self.period_ms < self.opportunities[-1]:
            raise TraceError("period shorter than last opportunity")

    @property
    def mean_rate_kbps(self) -> float:
        return len(self.opportunities) * PACKET_BITS / self.period_ms

    def iter_from(self, start_us: int = 0) -> Iterator[int]:
        """Yield absolute opportunity times in microseconds, looping forever."""
        period_us = self.period_ms * 1000
        loop = max(start_us, 0) // period_us
        while True:
            base = loop * period_us
            for ts in self.opportunities:
                t = base + ts * 1000
                if t >= start_us:
                    yield t
            loop += 1

    def count_in(self, start_us: int, end_us: int) -> int:
        """Number of opportunities in [start_us, end_us)."""
        if end_us <= start_us or end_us <= 0:
            return 0
        start_us = max(start_us, 0)
        period_us = self.period_ms * 1000
        per_loop = len(self.opportunities)

        def count_before(t_us: int) -> int:
            loops, rem = divmod(t_us, period_us)
            # An opportunity at ms stamp o fires at o*1000: it is strictly
            # before rem iff o <= (rem-1)//1000.
            k = bisect_left(self.opportunities, (rem - 1) // 1000 + 1) if rem else 0
            return loops * per_loop + k

        return count_before(end_us) - count_before(start_us)


def load_trace(path: str) -> BandwidthTrace:
    """Load and validate a Mahimahi-style trace file."""
    opportunities: list[int] = []
    prev = 0
    try:
        with open(path) as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    ts = int(line)
                except ValueError:
                    raise TraceError(f"{path}:{lineno}: not an integer: {line!r}")
                if ts < 0:
                    raise TraceError(f"{path}:{lineno}: negative timestamp {ts}")
                if ts < prev:
                    raise TraceError(
                        f"{path}:{lineno}: timestamp {ts} decreases (prev {prev})"
                    )
                opportunities.append(ts)
                prev = ts
    except OSError as e:
        raise TraceError(f"cannot read trace {path}: {e}") from e
    if not opportunities:
        raise TraceError(f"{path}: empty trace")
    period = max(math.ceil(opportunities[-1]), 1)
    return BandwidthTrace(opportunities, period)


def constant_trace(rate_mbps: float, period_ms: int = 1000) -> BandwidthTrace:
    """Evenly spaced opportunities matching a constant rate.

    12 Mbit/s yields exactly one opportunity per millisecond.
    """
    if rate_mbps <= 0:
        raise TraceError(f"rate must be positive, got {rate_mbps}")
    count = round(rate_mbps * 1e3 * period_ms / PACKET_BITS)
    if count < 1:
        raise TraceError(f"rate {rate_mbps} Mbps too low for period {period_ms} ms")
    opportunities = [i * period_ms // count for i in range(count)]
    return BandwidthTrace(opportunities, period_ms)


def synth_cellular_trace(seed: int, duration_ms: int = 60_000) -> BandwidthTrace:
    """Synthetic variable-bandwidth downlink with abrupt deep dips.

    Alternates multi-hundred-millisecond segments of moderate-to-high
    rate with occasional near-outage segments, which is the regime where
    a stale sender accumulates queue.
    """
    rng = random.Random(seed)
    opportunities: list[int] = []
    t_us = 0.0
    end_us = duration_ms * 1000
    while t_us < end_us:
        if rng.random() < 0.15:
            rate_kbps = rng.uniform(200, 1000)
            seg_us = rng.uniform(150_000, 400_000)
        else:
            rate_kbps = rng.uniform(4_000, 24_000)
            seg_us = rng.uniform(300_000, 1_500_000)
        seg_end = min(t_us + seg_us, end_us)
        gap_us = PACKET_BITS * 1000 / rate_kbps
        # keep the per-segment spacing exact; round only when emitting
        while t_us < seg_end:
            opportunities.append(int(t_us) // 1000)
            t_us += gap_us
        t_us = seg_end
    return BandwidthTrace(opportunities, duration_ms)


def resolve_trace(spec: str, seed: int = 0) -> BandwidthTrace:
    """Resolve a trace spec: 'constant:<mbps>', 'synth:cellular[:seed[:ms]]',
    or a file path."""
    if spec.startswith("constant:"):
        return constant_trace(float(spec.split(":", 1)[1]))
    if spec.startswith("synth:cellular"):
        parts = spec.split(":")
        tseed = int(parts[2]) if len(parts) > 2 else seed
        dur = int(parts[3]) if len(parts) > 3 else 60_000
        return synth_cellular_trace(tseed, dur)
    return load_trace(spec)
