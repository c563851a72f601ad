"""Per-frame accounting and run-level metrics, plus CSV emission.

CSV schemas (column names and order are fixed):

* frames.csv:  frame, send_us, deliver_us, level, decodable
* summary.csv: scenario, scheme, quality_mean, lat_p50_ms, lat_p99_ms,
               aoi_p50_ms, aoi_p99_ms, util_pct, drops_by_msg,
               drops_by_bitrate, drops_tail
* queue.csv:   t_ms, qdelay_ms
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from octosim.events import Event

FRAMES_COLUMNS = ["frame", "send_us", "deliver_us", "level", "decodable"]
SUMMARY_COLUMNS = [
    "scenario", "scheme", "quality_mean", "lat_p50_ms", "lat_p99_ms",
    "aoi_p50_ms", "aoi_p99_ms", "util_pct", "drops_by_msg",
    "drops_by_bitrate", "drops_tail",
]
QUEUE_COLUMNS = ["t_ms", "qdelay_ms"]


@dataclass
class FrameRecord:
    frame: int
    send_us: int
    deliver_us: Optional[int]  # None if nothing of the frame arrived
    level: Optional[int]  # decodable quality level reached, None if undecoded
    size_bytes: int = 0


@dataclass
class QualityConfig:
    """Per-level base scores (synthetic stand-ins, not measured SSIM)
    and the exponential decay rate applied to undecoded frames."""

    level_scores: Sequence[float] = (0.90, 0.95, 0.98)
    decay_per_s: float = 3.0


def nearest_rank(sorted_vals: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile (no interpolation): rank = ceil(p*n)."""
    if not sorted_vals:
        raise ValueError("empty sample")
    n = len(sorted_vals)
    rank = max(1, math.ceil(pct / 100 * n))
    return sorted_vals[min(rank, n) - 1]


def aoi_series(records: Iterable[FrameRecord]):
    """Age-of-information sampled just before each frame delivery.

    The age is the time since the freshest already-delivered frame was
    sent; the first delivery is aged against its own send time. Returns
    (samples_us, median_us, p99_us); (None, None) stats when nothing
    was delivered.
    """
    deliveries = sorted(
        ((r.deliver_us, r.send_us) for r in records if r.deliver_us is not None)
    )
    samples: list[int] = []
    latest_send: Optional[int] = None
    i = 0
    while i < len(deliveries):
        j = i
        t = deliveries[i][0]
        batch_latest = latest_send
        while j < len(deliveries) and deliveries[j][0] == t:
            _, s = deliveries[j]
            samples.append(t - s if latest_send is None else t - latest_send)
            batch_latest = s if batch_latest is None else max(batch_latest, s)
            j += 1
        latest_send = batch_latest
        i = j
    if not samples:
        return [], None, None
    ordered = sorted(samples)
    return samples, nearest_rank(ordered, 50), nearest_rank(ordered, 99)


def quality_score(records: Sequence[FrameRecord], cfg: QualityConfig) -> Optional[float]:
    """Mean per-frame quality over every frame the sender generated.

    A frame decoded at level q scores level_scores[q]; an undecoded
    frame scores the last decoded frame's value times exp(-decay * dt)
    where dt is its send-time offset from that frame. Frames before any
    decoded frame score zero. None when there are no frames.
    """
    ordered = sorted(records, key=lambda r: (r.send_us, r.frame))
    if not ordered:
        return None
    total = 0.0
    last_score: Optional[float] = None
    last_send = 0
    for r in ordered:
        if r.level is not None:
            s = cfg.level_scores[r.level]
            last_score = s
            last_send = r.send_us
        elif last_score is None:
            s = 0.0
        else:
            dt_s = (r.send_us - last_send) / 1e6
            s = last_score * math.exp(-cfg.decay_per_s * dt_s)
        total += s
    return total / len(ordered)


def latency_stats(records: Iterable[FrameRecord]):
    """(median_us, p99_us) of delivery latency over delivered frames;
    (None, None) when nothing was delivered."""
    lats = sorted(
        r.deliver_us - r.send_us for r in records if r.deliver_us is not None
    )
    if not lats:
        return None, None
    return nearest_rank(lats, 50), nearest_rank(lats, 99)


def queuing_delay_series(events: Iterable[Event], element: Optional[str] = None):
    """Per-packet queue residence from an enq/deq/drop event log.

    Returns (samples, buckets): samples are (t_us, residence_us) at the
    departure or drop instant; buckets are (t_ms, max residence_ms) per
    100 ms for plotting.
    """
    enq_at: dict[tuple[str, int, int, int], int] = {}
    samples: list[tuple[int, int]] = []
    for ev in events:
        if element is not None and ev.element != element:
            continue
        key = (ev.element, ev.stream, ev.msg_id, ev.seq)
        if ev.event == "enq":
            enq_at[key] = ev.time_us
        elif ev.event in ("deq", "drop_msg", "drop_bitrate"):
            t0 = enq_at.pop(key, None)
            if t0 is not None:
                samples.append((ev.time_us, ev.time_us - t0))
    return samples, bucket_residence(samples)


def bucket_residence(samples: Sequence[tuple[int, int]], bucket_ms: int = 100):
    """Max residence per time bucket, in milliseconds."""
    buckets: dict[int, float] = {}
    for t_us, res_us in samples:
        b = (t_us // 1000) // bucket_ms * bucket_ms
        buckets[b] = max(buckets.get(b, 0.0), res_us / 1000)
    return sorted(buckets.items())


# --------------------------------------------------------------------------
# CSV emission


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def write_frames_csv(path: str, records: Sequence[FrameRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(FRAMES_COLUMNS)
        for r in sorted(records, key=lambda r: r.frame):
            w.writerow([
                r.frame,
                r.send_us,
                _fmt(r.deliver_us),
                _fmt(r.level),
                1 if r.level is not None else 0,
            ])


def write_summary_csv(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in SUMMARY_COLUMNS])


def write_queue_csv(path: str, buckets: Sequence[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(QUEUE_COLUMNS)
        for t_ms, qdelay_ms in buckets:
            w.writerow([t_ms, _fmt(qdelay_ms)])
