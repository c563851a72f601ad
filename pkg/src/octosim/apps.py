"""Traffic sources and adaptation policies.

Three synthetic codec models map stream structure onto the dropping
parameters:

* temporal layering: every frame is one message with drop_flag set.
  The (priority, threshold) map follows the layer dependency rule "a
  layer may only reference lower-priority layers": the base layer T0
  forms a chain, so its droppers use threshold 1 (never invalidating an
  older T0); T1 references the nearest T0, so a new T1 may invalidate
  older T1/T2 (threshold 1); T2 is non-reference (threshold 2).
* spatial quality layering: each (frame, layer) is one message, with
  bitrate thresholds {0, 0.5B, B} re-derived from the transport's
  bandwidth estimate once per 10-frame GoP; the first base-layer
  message of each GoP is a dropper with threshold 0 so a stalled
  previous GoP is flushed.
* volumetric cells: 4 cells x 5 independent density layers; occluded
  cells and higher density layers take larger priority values, and the
  per-frame dropper's threshold cycles 3,2,1,0 for a smooth ramp-down.

Also here: the trace-clairvoyant sender used for the motivation
experiment, a backlogged bulk source, and the receiver-side
decodability rules for each model.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from octosim.header import OctopusHeader
from octosim.trace import BandwidthTrace
from octosim.types import MAX_PAYLOAD, MsgParams, Packet

# layer index per frame position within the 4-frame temporal pattern
TEMPORAL_PATTERN = (0, 2, 1, 2)
# (msg_priority, priority_threshold) per temporal layer
TEMPORAL_PARAMS = {0: (0, 1), 1: (1, 1), 2: (2, 2)}

VOLUMETRIC_DROPPER_CYCLE = (3, 2, 1, 0)


def volumetric_priority(cell: int, layer: int, front_cells=(0, 1)) -> int:
    """Priority map: front cells before occluded, low layers before high."""
    if cell in front_cells:
        return 0 if layer == 0 else (1 if layer <= 2 else 2)
    return 1 if layer == 0 else (2 if layer <= 2 else 3)


# --------------------------------------------------------------------------
# generators


@dataclass
class TemporalSvcConfig:
    fps: int = 30
    bitrate_kbps: float = 3000.0
    gop_frames: int = 32
    keyframe_mult: float = 4.0
    jitter_sigma: float = 0.2
    svc_overhead: float = 1.17
    # relative size of T0 / T1 / T2 frames
    layer_weights: tuple[float, float, float] = (2.0, 1.0, 0.7)
    min_msg_bytes: int = 200


class TemporalSvcApp:
    """Frame-rate-adaptive stream: one message per frame, dropper on all."""

    def __init__(self, loop, sender, stream: int, cfg: TemporalSvcConfig, seed: int, end_us: int):
        self.loop = loop
        self.sender = sender
        self.stream = stream
        self.cfg = cfg
        self.rng = random.Random(seed)
        self.end_us = end_us
        self.frame_idx = 0
        pattern_weights = [cfg.layer_weights[TEMPORAL_PATTERN[i % 4]] for i in range(4)]
        mean_weight = sum(pattern_weights) / 4
        bytes_per_frame = cfg.bitrate_kbps * 125 * cfg.svc_overhead / cfg.fps
        self._base_bytes = bytes_per_frame / mean_weight
        self._period_us = round(1e6 / cfg.fps)
        loop.schedule(0, self._tick)

    def _tick(self) -> None:
        now = self.loop.now
        if now >= self.end_us:
            return
        idx = self.frame_idx
        self.frame_idx += 1
        layer = TEMPORAL_PATTERN[idx % 4]
        prio, threshold = TEMPORAL_PARAMS[layer]
        size = self._base_bytes * self.cfg.layer_weights[layer]
        if layer == 0 and idx % self.cfg.gop_frames == 0:
            size *= self.cfg.keyframe_mult
        size *= self.rng.lognormvariate(0, self.cfg.jitter_sigma)
        size = max(int(size), self.cfg.min_msg_bytes)
        params = MsgParams(
            msg_priority=prio, drop_flag=True, priority_threshold=threshold
        )
        self.sender.submit_message(self.stream, size, params, frame_tag=(idx, layer))
        self.loop.schedule(now + self._period_us, self._tick)


@dataclass
class SpatialSvcConfig:
    fps: int = 30
    gop_frames: int = 10
    ratios: tuple[float, float, float] = (0.2, 0.5, 1.0)
    start_bitrate_kbps: float = 3000.0
    min_bitrate_kbps: float = 300.0
    keyframe_mult: float = 4.0
    jitter_sigma: float = 0.2
    min_msg_bytes: int = 200


class SpatialSvcApp:
    """Quality-adaptive stream: three layered messages per frame, ladder
    re-targeted to the transport bandwidth estimate once per GoP."""

    def __init__(self, loop, sender, stream: int, cfg: SpatialSvcConfig, seed: int, end_us: int):
        self.loop = loop
        self.sender = sender
        self.stream = stream
        self.cfg = cfg
        self.rng = random.Random(seed)
        self.end_us = end_us
        self.frame_idx = 0
        self._period_us = round(1e6 / cfg.fps)
        self._ladder_kbps = cfg.start_bitrate_kbps
        loop.schedule(0, self._tick)

    def _tick(self) -> None:
        now = self.loop.now
        if now >= self.end_us:
            return
        idx = self.frame_idx
        self.frame_idx += 1
        cfg = self.cfg
        gop_start = idx % cfg.gop_frames == 0
        if gop_start:
            est = self.sender.cc_stats.estimated_bw_kbps
            self._ladder_kbps = max(est, cfg.min_bitrate_kbps)
        b = self._ladder_kbps
        cum_bytes = [r * b * 125 / cfg.fps for r in cfg.ratios]
        thresholds = [0, round(cfg.ratios[1] * b), round(b)]
        prev = 0.0
        for q in range(3):
            size = cum_bytes[q] - prev
            prev = cum_bytes[q]
            if gop_start:
                size *= cfg.keyframe_mult
            size *= self.rng.lognormvariate(0, cfg.jitter_sigma)
            size = max(int(size), cfg.min_msg_bytes)
            params = MsgParams(
                msg_priority=q,
                drop_flag=(q == 0 and gop_start),
                priority_threshold=0,
                bitrate_threshold_kbps=thresholds[q],
            )
            self.sender.submit_message(self.stream, size, params, frame_tag=(idx, q))
        self.loop.schedule(now + self._period_us, self._tick)


@dataclass
class VolumetricConfig:
    fps: int = 30
    bitrate_kbps: float = 20000.0
    cells: int = 4
    layers: int = 5
    front_cells: tuple[int, ...] = (0, 1)
    overhead: float = 1.11
    jitter_sigma: float = 0.2
    min_msg_bytes: int = 200


class VolumetricApp:
    """Point-cloud stream: one message per (cell, density layer)."""

    def __init__(self, loop, sender, stream: int, cfg: VolumetricConfig, seed: int, end_us: int):
        self.loop = loop
        self.sender = sender
        self.stream = stream
        self.cfg = cfg
        self.rng = random.Random(seed)
        self.end_us = end_us
        self.frame_idx = 0
        self._period_us = round(1e6 / cfg.fps)
        loop.schedule(0, self._tick)

    def _tick(self) -> None:
        now = self.loop.now
        if now >= self.end_us:
            return
        idx = self.frame_idx
        self.frame_idx += 1
        cfg = self.cfg
        frame_bytes = cfg.bitrate_kbps * 125 * cfg.overhead / cfg.fps
        layer_bytes = frame_bytes / (cfg.cells * cfg.layers)
        dropper_threshold = VOLUMETRIC_DROPPER_CYCLE[idx % 4]
        for cell in range(cfg.cells):
            for layer in range(cfg.layers):
                prio = volumetric_priority(cell, layer, cfg.front_cells)
                is_dropper = cell == 0 and layer == 0
                size = layer_bytes * self.rng.lognormvariate(0, cfg.jitter_sigma)
                size = max(int(size), cfg.min_msg_bytes)
                params = MsgParams(
                    msg_priority=prio,
                    drop_flag=is_dropper,
                    priority_threshold=dropper_threshold if is_dropper else 0,
                )
                self.sender.submit_message(
                    self.stream, size, params, frame_tag=(idx, cell, layer)
                )
        self.loop.schedule(now + self._period_us, self._tick)


class BulkApp:
    """Backlogged source over the same transport; no message semantics."""

    def __init__(self, loop, sender, stream: int, end_us: int, msg_bytes: int = MAX_PAYLOAD):
        self.loop = loop
        self.sender = sender
        self.stream = stream
        self.end_us = end_us
        self.msg_bytes = msg_bytes
        loop.schedule(0, self._tick)

    def _tick(self) -> None:
        now = self.loop.now
        if now >= self.end_us:
            return
        # keep the send buffer comfortably ahead of the pacer so the
        # flow is never app-limited
        target = max(2 * self.sender.cc.cwnd_bytes, 128 * 1024)
        while self.sender.buffered_bytes() < target:
            self.sender.submit_message(self.stream, self.msg_bytes, MsgParams())
        self.loop.schedule(now + 5_000, self._tick)


class OracleSender:
    """Trace-clairvoyant sender: per 5 ms window it injects exactly the
    number of packets the link serves in that window, optionally using
    information that is stale by a fixed offset."""

    def __init__(
        self,
        loop,
        trace: BandwidthTrace,
        queue,
        stream: int,
        end_us: int,
        offset_us: int = 0,
        window_us: int = 5_000,
        on_submit=None,
    ):
        self.loop = loop
        self.trace = trace
        self.queue = queue
        self.stream = stream
        self.end_us = end_us
        self.offset_us = offset_us
        self.window_us = window_us
        self.on_submit = on_submit
        self._next_msg_id = 1
        self._next_seq = 0
        loop.schedule(0, self._window)

    def _window(self) -> None:
        now = self.loop.now
        if now >= self.end_us:
            return
        start = now - self.offset_us
        n = self.trace.count_in(start, start + self.window_us) if start >= 0 else 0
        for _ in range(n):
            msg_id = self._next_msg_id
            self._next_msg_id += 1
            header = OctopusHeader(
                head=True, tail=True, stream_id=self.stream, msg_id=msg_id
            )
            pkt = Packet(header=header, payload_size=MAX_PAYLOAD)
            pkt.seq = self._next_seq
            self._next_seq += 1
            pkt.sent_at = now
            if self.on_submit is not None:
                self.on_submit(self.stream, msg_id, MAX_PAYLOAD, MsgParams(), now, (msg_id - 1,))
            self.queue.enqueue(pkt, now)
        self.loop.schedule(now + self.window_us, self._window)


# --------------------------------------------------------------------------
# decodability


def temporal_decodable(
    delivered_frames: set[int], n_frames: int, gop_frames: int = 32
) -> dict[int, bool]:
    """Frame decodability for the temporal-layer model.

    T0 references the previous T0 (GoP starts are independent), T1 the
    nearest preceding T0, T2 the nearest preceding T0 or T1.
    """
    dec: dict[int, bool] = {}
    last_t0: Optional[int] = None
    last_t0_or_t1: Optional[int] = None
    for idx in range(n_frames):
        layer = TEMPORAL_PATTERN[idx % 4]
        if layer == 0:
            ref = None if idx % gop_frames == 0 else last_t0
        elif layer == 1:
            ref = last_t0
        else:
            ref = last_t0_or_t1
        ok = idx in delivered_frames and (ref is None or dec.get(ref, False))
        dec[idx] = ok
        if layer == 0:
            last_t0 = idx
            last_t0_or_t1 = idx
        elif layer == 1:
            last_t0_or_t1 = idx
    return dec


def spatial_decodable(
    delivered: set[tuple[int, int]],
    n_frames: int,
    n_layers: int = 3,
    gop_frames: int = 10,
) -> dict[tuple[int, int], bool]:
    """(frame, layer) decodability for the quality-layer model: all lower
    layers of the frame plus the same layer of the previous frame, except
    at GoP starts which depend only on their own lower layers."""
    dec: dict[tuple[int, int], bool] = {}
    for f in range(n_frames):
        gop_start = f % gop_frames == 0
        for q in range(n_layers):
            ok = (f, q) in delivered
            if ok and q > 0:
                ok = dec[(f, q - 1)]
            if ok and not gop_start:
                ok = dec.get((f - 1, q), False)
            dec[(f, q)] = ok
    return dec


def volumetric_decodable(
    delivered: set[tuple[int, int, int]]
) -> dict[tuple[int, int, int], bool]:
    """Every (frame, cell, layer) is independently decodable."""
    return {unit: True for unit in delivered}
