"""Message-aware unreliable transport.

The sender packetizes application messages into <=1460-byte payloads,
encodes the dropping parameters into every packet header, and buffers
packets in a send-side DropQueue that enforces the same dropping
primitives as the router (using the congestion controller's bandwidth
estimate for the bitrate condition). Packets are paced out under a
BBR-style controller. The receiver acknowledges every packet and
delivers each message upward as soon as its last fragment arrives,
regardless of ordering; nothing is ever retransmitted.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

from octosim.bbr import BbrLite, SentEntry
from octosim.dropqueue import DropQueue, FifoQueue, FnRateSource
from octosim.events import EventRecorder
from octosim.header import OctopusHeader
from octosim.types import MAX_PAYLOAD, MsgParams, Packet


@dataclass
class Ack:
    acked_seq: int
    cum_seq: int
    sack: list[tuple[int, int]]
    echo_sent_at: int


class CcStats(NamedTuple):
    estimated_bw_kbps: float
    min_rtt_us: Optional[int]


def packetize(
    stream: int, msg_id: int, size: int, params: MsgParams
) -> list[Packet]:
    """Split a message into MTU-fitting packets with head/tail flags."""
    if size < 1:
        raise ValueError("message size must be >= 1 byte")
    sizes = [MAX_PAYLOAD] * (size // MAX_PAYLOAD)
    if size % MAX_PAYLOAD:
        sizes.append(size % MAX_PAYLOAD)
    packets = []
    last = len(sizes) - 1
    for i, payload in enumerate(sizes):
        header = OctopusHeader(
            head=(i == 0),
            tail=(i == last),
            drop_flag=params.drop_flag,
            msg_priority=params.msg_priority,
            priority_threshold=params.priority_threshold,
            stream_id=stream,
            msg_id=msg_id,
            bitrate_threshold_kbps=params.bitrate_threshold_kbps,
        )
        packets.append(Packet(header=header, payload_size=payload))
    return packets


class OctoSender:
    """One transport endpoint: send buffer, pacer, and CC state."""

    def __init__(
        self,
        loop,
        emit: Callable[[Packet], None],
        *,
        endpoint_dropping: bool = True,
        send_buffer_capacity: Optional[int] = None,
        init_rtt_us: int = 100_000,
        recorder: Optional[EventRecorder] = None,
        name: str = "sender",
        on_submit: Optional[Callable] = None,
    ) -> None:
        self.loop = loop
        self.emit = emit
        self.name = name
        self.cc = BbrLite(now=loop.now, init_rtt_us=init_rtt_us)
        if endpoint_dropping:
            self.send_buffer = DropQueue(
                FnRateSource(lambda sid, now: self.cc.bw_estimate_kbps()),
                capacity_bytes=send_buffer_capacity,
                recorder=recorder,
                name=f"{name}.sndbuf",
            )
        else:
            self.send_buffer = FifoQueue(
                capacity_bytes=send_buffer_capacity,
                recorder=recorder,
                name=f"{name}.sndbuf",
            )
        self.on_submit = on_submit
        self._next_msg_id: dict[int, int] = {}
        self._streams: list[int] = []
        self._next_auto_stream = 0
        self._inflight: dict[int, SentEntry] = {}
        self._inflight_seqs: list[int] = []  # heap of outstanding seqs
        self.inflight_bytes = 0
        self.next_seq = 0
        self.next_send_us = 0
        self._tick_at: Optional[int] = None
        self.packets_sent = 0
        self.packets_lost = 0
        self._init_rtt_us = init_rtt_us
        self._srtt_us: Optional[float] = None
        self._rttvar_us = 0.0

    def open_stream(self, stream_id: Optional[int] = None) -> int:
        if stream_id is None:
            stream_id = self._next_auto_stream
            self._next_auto_stream += 1
        if stream_id in self._next_msg_id:
            raise ValueError(f"stream {stream_id} already open")
        self._next_msg_id[stream_id] = 1
        self._streams.append(stream_id)
        return stream_id

    @property
    def cc_stats(self) -> CcStats:
        return CcStats(self.cc.bw_estimate_kbps(), self.cc.min_rtt_us)

    def buffered_bytes(self) -> int:
        return self.send_buffer.bytes_buffered

    def submit_message(
        self, stream: int, size: int, params: MsgParams, frame_tag=None
    ) -> int:
        params.validate()
        if stream not in self._next_msg_id:
            raise ValueError(f"stream {stream} not open")
        now = self.loop.now
        msg_id = self._next_msg_id[stream]
        self._next_msg_id[stream] = msg_id + 1
        for pkt in packetize(stream, msg_id, size, params):
            self.send_buffer.enqueue(pkt, now)
        if self.on_submit is not None:
            self.on_submit(stream, msg_id, size, params, now, frame_tag)
        self._kick(now)
        return msg_id

    # --- pacing ---------------------------------------------------------

    def _kick(self, now: int) -> None:
        at = max(now, self.next_send_us)
        if self._tick_at is None or at < self._tick_at:
            self._tick_at = at
            self.loop.schedule(at, self._pacing_tick)

    def _pacing_tick(self) -> None:
        self._tick_at = None
        now = self.loop.now
        while True:
            if self.inflight_bytes >= self.cc.cwnd_bytes:
                return  # cwnd-limited; acks will kick us again
            if now < self.next_send_us:
                self._kick(now)
                return
            pkt = self.send_buffer.dequeue(now)
            if pkt is None:
                self.cc.mark_app_limited(self.inflight_bytes)
                return
            pkt.seq = self.next_seq
            self.next_seq += 1
            pkt.sent_at = now
            entry = SentEntry(
                seq=pkt.seq,
                nbytes=pkt.wire_bytes,
                sent_at=now,
                delivered_at_send=self.cc.delivered,
                delivered_time_at_send=self.cc.delivered_time,
                app_limited=self.cc.is_app_limited(),
            )
            self._inflight[pkt.seq] = entry
            heapq.heappush(self._inflight_seqs, pkt.seq)
            self.inflight_bytes += pkt.wire_bytes
            self.packets_sent += 1
            self.loop.schedule(
                now + self._rto_us(), lambda s=pkt.seq: self._check_timeout(s)
            )
            self.emit(pkt)
            gap = int(pkt.wire_bytes * 8e6 / self.cc.pacing_rate_bps)
            self.next_send_us = max(self.next_send_us, now) + max(gap, 1)

    # --- loss timer ------------------------------------------------------
    # Losses are normally inferred from acks for later packets, but if the
    # entire window is dropped no ack ever comes back; an RTO-style timer
    # (srtt + 4*rttvar, no retransmission) unsticks the window.

    def _rto_us(self) -> int:
        if self._srtt_us is None:
            return 3 * self._init_rtt_us
        return max(int(self._srtt_us + 4 * self._rttvar_us), 100_000)

    def _check_timeout(self, seq: int) -> None:
        entry = self._inflight.get(seq)
        if entry is None:
            return
        deadline = entry.sent_at + self._rto_us()
        if self.loop.now < deadline:
            self.loop.schedule(deadline, lambda: self._check_timeout(seq))
            return
        del self._inflight[seq]
        self.inflight_bytes -= entry.nbytes
        self.packets_lost += 1
        self.cc.on_loss(entry.nbytes)
        self._kick(self.loop.now)

    # --- ack path --------------------------------------------------------

    def on_ack(self, ack: Ack) -> None:
        now = self.loop.now
        entry = self._inflight.pop(ack.acked_seq, None)
        if entry is None:
            return  # stale, duplicate, or already declared lost
        rtt = now - entry.sent_at
        if self._srtt_us is None:
            self._srtt_us = float(rtt)
            self._rttvar_us = rtt / 2
        else:
            self._rttvar_us += (abs(self._srtt_us - rtt) - self._rttvar_us) / 4
            self._srtt_us += (rtt - self._srtt_us) / 8
        # The simulated network preserves per-path ordering, so any older
        # outstanding sequence was dropped in the network.
        while self._inflight_seqs and self._inflight_seqs[0] < ack.acked_seq:
            lost_seq = heapq.heappop(self._inflight_seqs)
            lost = self._inflight.pop(lost_seq, None)
            if lost is not None:
                self.inflight_bytes -= lost.nbytes
                self.packets_lost += 1
                self.cc.on_loss(lost.nbytes)
        if self._inflight_seqs and self._inflight_seqs[0] == ack.acked_seq:
            heapq.heappop(self._inflight_seqs)
        self.inflight_bytes -= entry.nbytes
        self.cc.on_ack(entry, now, self.inflight_bytes)
        self._kick(now)


@dataclass
class _PartialMessage:
    seqs: set[int] = field(default_factory=set)
    head_seq: Optional[int] = None
    tail_seq: Optional[int] = None

    def complete(self) -> bool:
        return (
            self.head_seq is not None
            and self.tail_seq is not None
            and len(self.seqs) == self.tail_seq - self.head_seq + 1
        )


class DeliveredMessage(NamedTuple):
    stream: int
    msg_id: int
    recv_time_us: int


class OctoReceiver:
    """Receive-side reassembly and per-packet acking."""

    MAX_SACK_RANGES = 3

    def __init__(
        self,
        loop,
        send_ack: Callable[[Ack], None],
        on_deliver: Optional[Callable[[DeliveredMessage], None]] = None,
    ) -> None:
        self.loop = loop
        self.send_ack = send_ack
        self.on_deliver = on_deliver
        self.delivered: list[DeliveredMessage] = []
        self._partial: dict[tuple[int, int], _PartialMessage] = {}
        self._done: set[tuple[int, int]] = set()
        self._cum_seq = -1
        # contiguous received ranges above the cumulative point; bounded
        # by folding the oldest range into cum when more accumulate
        self._ranges: list[list[int]] = []
        self.packets_received = 0
        self.bytes_received = 0

    def _advance_cum(self, seq: int) -> None:
        if seq <= self._cum_seq:
            return
        if seq == self._cum_seq + 1 and not self._ranges:
            self._cum_seq = seq
            return
        if self._ranges and seq == self._ranges[-1][1] + 1:
            self._ranges[-1][1] = seq
        elif not self._ranges or seq > self._ranges[-1][1] + 1:
            self._ranges.append([seq, seq])
        while len(self._ranges) > self.MAX_SACK_RANGES:
            oldest = self._ranges.pop(0)
            self._cum_seq = max(self._cum_seq, oldest[1])
        if self._ranges and self._ranges[0][0] <= self._cum_seq + 1:
            self._cum_seq = max(self._cum_seq, self._ranges.pop(0)[1])

    def _sack_ranges(self) -> list[tuple[int, int]]:
        return [(a, b) for a, b in self._ranges]

    def on_packet(self, pkt: Packet) -> None:
        now = self.loop.now
        h = pkt.header
        key = (h.stream_id, h.msg_id)
        self.packets_received += 1
        self.bytes_received += pkt.wire_bytes
        self._advance_cum(pkt.seq)

        if key not in self._done:
            rec = self._partial.setdefault(key, _PartialMessage())
            if pkt.seq not in rec.seqs:
                rec.seqs.add(pkt.seq)
                if h.head:
                    rec.head_seq = pkt.seq
                if h.tail:
                    rec.tail_seq = pkt.seq
                if rec.complete():
                    del self._partial[key]
                    self._done.add(key)
                    dm = DeliveredMessage(h.stream_id, h.msg_id, now)
                    self.delivered.append(dm)
                    if self.on_deliver is not None:
                        self.on_deliver(dm)

        self.send_ack(
            Ack(
                acked_seq=pkt.seq,
                cum_seq=self._cum_seq,
                sack=self._sack_ranges(),
                echo_sent_at=pkt.sent_at,
            )
        )
