"""Scenario assembly and execution: wires senders, queues, and links
onto the event loop, runs to the configured duration, and produces
frame records and run-level outputs. Output is a pure function of
(config, seed)."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

from octosim.apps import (
    BulkApp,
    OracleSender,
    SpatialSvcApp,
    SpatialSvcConfig,
    TemporalSvcApp,
    TemporalSvcConfig,
    VolumetricApp,
    VolumetricConfig,
    spatial_decodable,
    temporal_decodable,
)
from octosim.config import ConfigError, ScenarioConfig, apply_scheme
from octosim.dropqueue import DropCounters, DropQueue, FifoQueue, PDropQueue, QueueRateSource
from octosim.eventloop import EventLoop
from octosim.events import EventRecorder
from octosim.links import CellularLink, LegacySwitch
from octosim.metrics import (
    FrameRecord,
    QualityConfig,
    aoi_series,
    bucket_residence,
    latency_stats,
    quality_score,
    write_frames_csv,
    write_queue_csv,
    write_summary_csv,
)
from octosim.trace import resolve_trace
from octosim.transport import OctoReceiver, OctoSender
from octosim.types import MTU, MsgParams

TEMPORAL_QUALITY = QualityConfig(level_scores=(0.98,))
SPATIAL_QUALITY = QualityConfig(level_scores=(0.90, 0.95, 0.98))
VOLUMETRIC_QUALITY = QualityConfig(level_scores=(0.90, 0.925, 0.95, 0.97, 0.98))


@dataclass
class MsgMeta:
    size: int
    params: MsgParams
    created_at: int
    frame_tag: tuple


class Collector:
    """Maps (stream, msg_id) to application meaning and delivery time."""

    def __init__(self) -> None:
        self.metas: dict[tuple[int, int], MsgMeta] = {}
        self.deliveries: dict[tuple[int, int], int] = {}

    def on_submit(self, stream, msg_id, size, params, now, frame_tag) -> None:
        self.metas[(stream, msg_id)] = MsgMeta(size, params, now, frame_tag)

    def on_deliver(self, stream, msg_id, now) -> None:
        self.deliveries.setdefault((stream, msg_id), now)


@dataclass
class FlowState:
    index: int
    kind: str
    stream: int
    app: object
    sender: Optional[OctoSender] = None
    receiver: Optional[OctoReceiver] = None
    delivered_msgs: int = 0
    delivered_wire_bytes: int = 0


@dataclass
class FlowResult:
    index: int
    kind: str
    stream: int
    frames: list[FrameRecord]
    quality: QualityConfig
    delivered_wire_bytes: int
    drops_by_msg: int
    drops_by_bitrate: int
    drops_tail: int


@dataclass
class RunResult:
    config: ScenarioConfig
    scheme: str
    duration_us: int
    flows: list[FlowResult]
    capacity_bytes: int
    router_residence: list[tuple[int, int]]
    queue_depth: list[tuple[int, int]]
    recorder: EventRecorder

    def summary_rows(self) -> list[dict]:
        rows = []
        for fr in self.flows:
            name = self.config.name
            if len(self.flows) > 1:
                name = f"{name}/flow{fr.index}"
            q = quality_score(fr.frames, fr.quality)
            lat_p50, lat_p99 = latency_stats(fr.frames)
            _, aoi_p50, aoi_p99 = aoi_series(fr.frames)
            util = (
                100.0 * fr.delivered_wire_bytes / self.capacity_bytes
                if self.capacity_bytes
                else None
            )
            rows.append({
                "scenario": name,
                "scheme": self.scheme,
                "quality_mean": q,
                "lat_p50_ms": None if lat_p50 is None else lat_p50 / 1000,
                "lat_p99_ms": None if lat_p99 is None else lat_p99 / 1000,
                "aoi_p50_ms": None if aoi_p50 is None else aoi_p50 / 1000,
                "aoi_p99_ms": None if aoi_p99 is None else aoi_p99 / 1000,
                "util_pct": util,
                "drops_by_msg": fr.drops_by_msg,
                "drops_by_bitrate": fr.drops_by_bitrate,
                "drops_tail": fr.drops_tail,
            })
        return rows

    def write_outputs(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        for fr in self.flows:
            suffix = "" if fr.index == 0 else f".{fr.index}"
            write_frames_csv(os.path.join(out_dir, f"frames{suffix}.csv"), fr.frames)
        write_summary_csv(os.path.join(out_dir, "summary.csv"), self.summary_rows())
        write_queue_csv(
            os.path.join(out_dir, "queue.csv"), bucket_residence(self.router_residence)
        )
        if self.config.event_log:
            self.recorder.write_csv(os.path.join(out_dir, "events.csv"))


def _make_app_config(kind: str, params: dict):
    cls = {
        "temporal": TemporalSvcConfig,
        "spatial": SpatialSvcConfig,
        "volumetric": VolumetricConfig,
    }[kind]
    try:
        return cls(**params)
    except TypeError as e:
        raise ConfigError(f"bad {kind} params: {e}") from e


def run_scenario(cfg: ScenarioConfig, scheme: Optional[str] = None) -> RunResult:
    if scheme is not None:
        cfg = apply_scheme(cfg, scheme)
    cfg.validate()
    scheme_name = scheme if scheme is not None else cfg.router

    loop = EventLoop()
    recorder = EventRecorder()
    collector = Collector()
    duration_us = int(round(cfg.duration_s * 1e6))
    one_way_us = cfg.link.rtt_ms * 500

    receivers: dict[int, Callable] = {}

    def deliver(pkt) -> None:
        h = pkt.header
        recorder.log(loop.now, "rx", "deliver", h.stream_id, h.msg_id, pkt.seq, pkt.wire_bytes)
        fn = receivers.get(h.stream_id)
        if fn is not None:
            fn(pkt)

    trace = None
    cell = None
    legacy = None
    router_queue = None
    router_rs = None
    if cfg.topology in ("cellular-only", "legacy-then-cellular"):
        trace = resolve_trace(cfg.link.trace, cfg.seed)
        if cfg.router == "octopus":
            router_rs = QueueRateSource(warmup_kbps=trace.mean_rate_kbps)
            router_queue = DropQueue(
                router_rs, cfg.link.buffer_bytes, recorder, "router"
            )
        elif cfg.router == "pdrop":
            router_queue = PDropQueue(cfg.link.buffer_bytes, recorder, "router")
        else:
            router_queue = FifoQueue(cfg.link.buffer_bytes, recorder, "router")
        cell = CellularLink(
            loop,
            trace,
            router_queue,
            deliver,
            end_us=duration_us,
            rate_source=router_rs,
            recorder=recorder,
            name="cell",
        )
    if cfg.topology in ("legacy-only", "legacy-then-cellular"):
        fwd = (lambda pkt: cell.ingress(pkt)) if cell is not None else deliver
        legacy = LegacySwitch(
            loop,
            cfg.legacy_rate_mbps * 1e6,
            cfg.legacy_buffer_bytes,
            fwd,
            recorder=recorder,
            name="legacy",
        )
    first_hop = legacy if legacy is not None else cell
    bottleneck_queue = router_queue if router_queue is not None else legacy.queue

    flows: list[FlowState] = []
    for i, fc in enumerate(cfg.flows):
        stream = i + 1
        fseed = cfg.seed * 10007 + i
        if fc.sender == "oracle":
            if cell is None:
                raise ConfigError("oracle sender requires a cellular link")
            app = OracleSender(
                loop,
                trace,
                router_queue,
                stream,
                duration_us,
                offset_us=int(fc.params.get("offset_us", 0)),
                on_submit=collector.on_submit,
            )
            st = FlowState(i, "oracle", stream, app)

            def oracle_rx(pkt, st=st):
                collector.on_deliver(pkt.header.stream_id, pkt.header.msg_id, loop.now)
                st.delivered_msgs += 1
                st.delivered_wire_bytes += pkt.wire_bytes

            receivers[stream] = oracle_rx
            flows.append(st)
            continue

        sender = OctoSender(
            loop,
            emit=lambda pkt, hop=first_hop: loop.schedule_in(
                one_way_us, lambda p=pkt: hop.ingress(p)
            ),
            endpoint_dropping=cfg.endpoint_dropping,
            recorder=recorder,
            name=f"tx{i}",
            on_submit=collector.on_submit,
        )
        sender.open_stream(stream)
        st = FlowState(i, fc.sender, stream, None, sender=sender)

        def on_deliver(dm, st=st):
            collector.on_deliver(dm.stream, dm.msg_id, dm.recv_time_us)

        receiver = OctoReceiver(
            loop,
            send_ack=lambda ack, s=sender: loop.schedule_in(
                one_way_us, lambda a=ack: s.on_ack(a)
            ),
            on_deliver=on_deliver,
        )
        receivers[stream] = receiver.on_packet
        st.receiver = receiver

        if fc.sender == "bulk":
            app = BulkApp(loop, sender, stream, duration_us,
                          msg_bytes=int(fc.params.get("msg_bytes", 1460)))
        elif fc.sender == "temporal":
            app = TemporalSvcApp(
                loop, sender, stream, _make_app_config("temporal", fc.params), fseed, duration_us
            )
        elif fc.sender == "spatial":
            app = SpatialSvcApp(
                loop, sender, stream, _make_app_config("spatial", fc.params), fseed, duration_us
            )
        else:
            app = VolumetricApp(
                loop, sender, stream, _make_app_config("volumetric", fc.params), fseed, duration_us
            )
        st.app = app
        flows.append(st)

    queue_depth: list[tuple[int, int]] = []

    def sample_depth():
        queue_depth.append((loop.now, bottleneck_queue.bytes_buffered))
        if loop.now < duration_us:
            loop.schedule(loop.now + 10_000, sample_depth)

    loop.schedule(0, sample_depth)
    loop.run_until(duration_us)

    for st in flows:
        if st.receiver is not None:
            st.delivered_msgs = len(st.receiver.delivered)
            st.delivered_wire_bytes = st.receiver.bytes_received

    if cell is not None:
        capacity_bytes = cell.opportunities_fired * MTU
    else:
        capacity_bytes = int(cfg.legacy_rate_mbps * 1e6 * duration_us / 8e6)

    results = []
    for st in flows:
        frames, quality = _build_frames(st, collector)
        counters = DropCounters()
        counters.merge(bottleneck_queue.counters)
        if st.sender is not None:
            counters.merge(st.sender.send_buffer.counters)
        results.append(
            FlowResult(
                index=st.index,
                kind=st.kind,
                stream=st.stream,
                frames=frames,
                quality=quality,
                delivered_wire_bytes=st.delivered_wire_bytes,
                drops_by_msg=counters.msgs_dropped_by_msg.get(st.stream, 0),
                drops_by_bitrate=counters.msgs_dropped_by_bitrate.get(st.stream, 0),
                drops_tail=counters.packets_tail_dropped.get(st.stream, 0),
            )
        )

    return RunResult(
        config=cfg,
        scheme=scheme_name,
        duration_us=duration_us,
        flows=results,
        capacity_bytes=capacity_bytes,
        router_residence=list(bottleneck_queue.residence),
        queue_depth=queue_depth,
        recorder=recorder,
    )


def _build_frames(st: FlowState, collector: Collector):
    """Turn per-message submissions/deliveries into per-frame records
    with the model's decodability rules applied."""
    sid = st.stream
    metas = {
        k: m for k, m in collector.metas.items() if k[0] == sid and m.frame_tag is not None
    }
    delivered_keys = {k for k in collector.deliveries if k[0] == sid and k in metas}

    if st.kind == "bulk":
        return [], TEMPORAL_QUALITY

    if st.kind == "oracle":
        frames = []
        for key, m in sorted(metas.items()):
            t = collector.deliveries.get(key)
            frames.append(
                FrameRecord(
                    frame=m.frame_tag[0],
                    send_us=m.created_at,
                    deliver_us=t,
                    level=0 if t is not None else None,
                    size_bytes=m.size,
                )
            )
        return frames, QualityConfig(level_scores=(1.0,))

    n_frames = st.app.frame_idx

    if st.kind == "temporal":
        delivered_frames = {metas[k].frame_tag[0] for k in delivered_keys}
        dec = temporal_decodable(delivered_frames, n_frames, st.app.cfg.gop_frames)
        frames = []
        for key, m in sorted(metas.items()):
            idx = m.frame_tag[0]
            t = collector.deliveries.get(key)
            frames.append(
                FrameRecord(
                    frame=idx,
                    send_us=m.created_at,
                    deliver_us=t,
                    level=0 if dec.get(idx) else None,
                    size_bytes=m.size,
                )
            )
        return frames, TEMPORAL_QUALITY

    if st.kind == "spatial":
        delivered_units = {metas[k].frame_tag for k in delivered_keys}
        dec = spatial_decodable(delivered_units, n_frames, 3, st.app.cfg.gop_frames)
        by_frame: dict[int, list] = {}
        for key, m in metas.items():
            by_frame.setdefault(m.frame_tag[0], []).append((key, m))
        frames = []
        for idx in sorted(by_frame):
            entries = by_frame[idx]
            send = min(m.created_at for _, m in entries)
            size = sum(m.size for _, m in entries)
            times = [collector.deliveries[k] for k, _ in entries if k in collector.deliveries]
            level = None
            for q in range(3):
                if dec.get((idx, q)):
                    level = q
                else:
                    break
            frames.append(
                FrameRecord(
                    frame=idx,
                    send_us=send,
                    deliver_us=max(times) if times else None,
                    level=level,
                    size_bytes=size,
                )
            )
        return frames, SPATIAL_QUALITY

    # volumetric
    by_frame = {}
    for key, m in metas.items():
        by_frame.setdefault(m.frame_tag[0], []).append((key, m))
    front = st.app.cfg.front_cells
    frames = []
    for idx in sorted(by_frame):
        entries = by_frame[idx]
        send = min(m.created_at for _, m in entries)
        size = sum(m.size for _, m in entries)
        times = [collector.deliveries[k] for k, _ in entries if k in collector.deliveries]
        per_cell: dict[int, int] = {c: 0 for c in front}
        for key, m in entries:
            _, cell_idx, _layer = m.frame_tag
            if cell_idx in front and key in collector.deliveries:
                per_cell[cell_idx] += 1
        min_layers = min(per_cell.values()) if per_cell else 0
        frames.append(
            FrameRecord(
                frame=idx,
                send_us=send,
                deliver_us=max(times) if times else None,
                level=min_layers - 1 if min_layers > 0 else None,
                size_bytes=size,
            )
        )
    return frames, VOLUMETRIC_QUALITY
