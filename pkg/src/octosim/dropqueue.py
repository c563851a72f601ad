"""Message-dropping buffers and their bandwidth accounting.

DropQueue implements the two parameterized dropping conditions at the
shared buffer: drop-by-msg (a newer dropper message invalidates older
queued messages of the same stream whose priority value is at or above
its threshold) and drop-by-bitrate (a message whose bitrate threshold
exceeds the bandwidth currently serving its stream is discarded). Both
conditions are evaluated when a message's head packet reaches the front
of the queue; a message whose head has already been emitted is never
dropped mid-flight.

PDropQueue is the buffer-full purge baseline, and FifoQueue is a plain
byte-capped drop-tail buffer.
"""

from __future__ import annotations

from collections import defaultdict, deque
from typing import Callable, Optional

from octosim.events import EventRecorder
from octosim.types import NUM_PRIORITIES, Packet


class DropCounters:
    """Per-stream drop accounting exposed by every queue kind."""

    def __init__(self) -> None:
        self.msgs_dropped_by_msg: dict[int, int] = defaultdict(int)
        self.msgs_dropped_by_bitrate: dict[int, int] = defaultdict(int)
        self.packets_tail_dropped: dict[int, int] = defaultdict(int)

    @property
    def total_by_msg(self) -> int:
        return sum(self.msgs_dropped_by_msg.values())

    @property
    def total_by_bitrate(self) -> int:
        return sum(self.msgs_dropped_by_bitrate.values())

    @property
    def total_tail(self) -> int:
        return sum(self.packets_tail_dropped.values())

    def merge(self, other: "DropCounters") -> None:
        for sid, n in other.msgs_dropped_by_msg.items():
            self.msgs_dropped_by_msg[sid] += n
        for sid, n in other.msgs_dropped_by_bitrate.items():
            self.msgs_dropped_by_bitrate[sid] += n
        for sid, n in other.packets_tail_dropped.items():
            self.packets_tail_dropped[sid] += n


class BwEstimator:
    """Dequeue-rate estimator over a trailing 50 ms window.

    Idle periods (empty queue) are discounted: the rate is departed bits
    divided by busy time within the window. Below 5 ms of busy time the
    estimate falls back to a configured warm-up default so that the
    bitrate condition cannot fire spuriously on a cold queue.
    """

    def __init__(
        self,
        window_us: int = 50_000,
        warmup_kbps: float = 10_000.0,
        min_busy_us: int = 5_000,
    ) -> None:
        self.window_us = window_us
        self.warmup_kbps = warmup_kbps
        self.min_busy_us = min_busy_us
        self._departures: deque[tuple[int, int]] = deque()
        self._busy: deque[tuple[int, int]] = deque()
        self._busy_since: Optional[int] = None

    def on_nonempty(self, now: int) -> None:
        if self._busy_since is None:
            self._busy_since = now

    def on_empty(self, now: int) -> None:
        if self._busy_since is not None:
            if now > self._busy_since:
                self._busy.append((self._busy_since, now))
            self._busy_since = None

    def on_departure(self, nbytes: int, now: int) -> None:
        self._departures.append((now, nbytes))
        self._prune(now)

    def _prune(self, now: int) -> None:
        lo = now - self.window_us
        while self._departures and self._departures[0][0] <= lo:
            self._departures.popleft()
        while self._busy and self._busy[0][1] <= lo:
            self._busy.popleft()

    def estimate_kbps(self, now: int) -> float:
        self._prune(now)
        lo = now - self.window_us
        busy_us = 0
        for start, end in self._busy:
            busy_us += min(end, now) - max(start, lo)
        if self._busy_since is not None and self._busy_since < now:
            busy_us += now - max(self._busy_since, lo)
        if busy_us < self.min_busy_us:
            return self.warmup_kbps
        bits = 8 * sum(b for _, b in self._departures)
        return bits * 1000 / busy_us


def fair_shares(demands: dict[int, float], total_kbps: float) -> dict[int, float]:
    """Water-filling max-min allocation of total_kbps across demands."""
    shares = {sid: 0.0 for sid in demands}
    if total_kbps <= 0 or not demands:
        return shares
    remaining = total_kbps
    pending = sorted(demands.items(), key=lambda kv: (kv[1], kv[0]))
    for i, (sid, demand) in enumerate(pending):
        level = remaining / (len(pending) - i)
        got = min(max(demand, 0.0), level)
        shares[sid] = got
        remaining -= got
    return shares


class QueueRateSource:
    """Bandwidth view for a shared router queue.

    With a single active stream the raw dequeue rate is used; with
    several, each stream sees its max-min fair share computed from
    per-stream arrival rates over a trailing 100 ms window.
    """

    def __init__(
        self,
        warmup_kbps: float = 10_000.0,
        arrival_window_us: int = 100_000,
    ) -> None:
        self.estimator = BwEstimator(warmup_kbps=warmup_kbps)
        self.arrival_window_us = arrival_window_us
        self._arrivals: dict[int, deque[tuple[int, int]]] = defaultdict(deque)

    def on_nonempty(self, now: int) -> None:
        self.estimator.on_nonempty(now)

    def on_empty(self, now: int) -> None:
        self.estimator.on_empty(now)

    def on_departure(self, nbytes: int, now: int) -> None:
        self.estimator.on_departure(nbytes, now)

    def on_arrival(self, sid: int, nbytes: int, now: int) -> None:
        q = self._arrivals[sid]
        q.append((now, nbytes))
        lo = now - self.arrival_window_us
        while q and q[0][0] <= lo:
            q.popleft()

    def arrival_kbps(self, sid: int, now: int) -> float:
        q = self._arrivals.get(sid)
        if not q:
            return 0.0
        lo = now - self.arrival_window_us
        while q and q[0][0] <= lo:
            q.popleft()
        bits = 8 * sum(b for _, b in q)
        return bits * 1000 / self.arrival_window_us

    def bw_for(self, sid: int, now: int) -> float:
        total = self.estimator.estimate_kbps(now)
        demands = {
            s: self.arrival_kbps(s, now)
            for s in list(self._arrivals)
        }
        active = {s: r for s, r in demands.items() if r > 0}
        if len(active) > 1:
            shares = fair_shares(active, total)
            if sid in shares:
                return shares[sid]
        return total


class FnRateSource:
    """Bandwidth view backed by a callable; used by the transport send
    buffer (congestion-control estimate) and by tests."""

    def __init__(self, fn: Callable[[int, int], float]) -> None:
        self._fn = fn

    def on_nonempty(self, now: int) -> None:
        pass

    def on_empty(self, now: int) -> None:
        pass

    def on_departure(self, nbytes: int, now: int) -> None:
        pass

    def on_arrival(self, sid: int, nbytes: int, now: int) -> None:
        pass

    def bw_for(self, sid: int, now: int) -> float:
        return self._fn(sid, now)


class _QueueBase:
    def __init__(
        self,
        capacity_bytes: Optional[int],
        recorder: Optional[EventRecorder],
        name: str,
    ) -> None:
        self.capacity_bytes = capacity_bytes
        self.recorder = recorder
        self.name = name
        self._fifo: deque[tuple[Packet, int]] = deque()
        self._bytes = 0
        self.counters = DropCounters()
        # (time_us, residence_us) for every dequeue or in-queue drop
        self.residence: list[tuple[int, int]] = []

    @property
    def bytes_buffered(self) -> int:
        return self._bytes

    def __len__(self) -> int:
        return len(self._fifo)

    def _log(self, now: int, event: str, pkt: Packet) -> None:
        if self.recorder is not None:
            h = pkt.header
            self.recorder.log(
                now, self.name, event, h.stream_id, h.msg_id, pkt.seq, pkt.wire_bytes
            )


class DropQueue(_QueueBase):
    """FIFO byte-capped buffer with the two semantic dropping conditions."""

    def __init__(
        self,
        rate_source,
        capacity_bytes: Optional[int] = None,
        recorder: Optional[EventRecorder] = None,
        name: str = "queue",
    ) -> None:
        super().__init__(capacity_bytes, recorder, name)
        self.rate_source = rate_source
        self._droppers: dict[int, list[int]] = {}
        self._msg_in_drop: dict[int, int] = {}
        self._drop_reason: dict[int, str] = {}

    def dropper_table(self, sid: int) -> list[int]:
        return list(self._droppers.get(sid, [0] * NUM_PRIORITIES))

    def enqueue(self, pkt: Packet, now: int) -> bool:
        h = pkt.header
        if (
            self.capacity_bytes is not None
            and self._bytes + pkt.wire_bytes > self.capacity_bytes
        ):
            self.counters.packets_tail_dropped[h.stream_id] += 1
            self._log(now, "drop_tail", pkt)
            return False
        # A rejected dropper never existed from the queue's perspective,
        # so the table is updated only for accepted packets.
        if h.drop_flag and h.tail:
            tbl = self._droppers.setdefault(h.stream_id, [0] * NUM_PRIORITIES)
            tbl[h.priority_threshold] = max(tbl[h.priority_threshold], h.msg_id)
        if not self._fifo:
            self.rate_source.on_nonempty(now)
        self.rate_source.on_arrival(h.stream_id, pkt.wire_bytes, now)
        self._fifo.append((pkt, now))
        self._bytes += pkt.wire_bytes
        self._log(now, "enq", pkt)
        return True

    def dequeue(self, now: int) -> Optional[Packet]:
        while self._fifo:
            pkt, enq_t = self._fifo.popleft()
            self._bytes -= pkt.wire_bytes
            h = pkt.header
            sid = h.stream_id
            if h.head:
                tbl = self._droppers.get(sid)
                latest = max(tbl[: h.msg_priority + 1]) if tbl else 0
                reason = None
                if h.msg_id < latest:
                    reason = "msg"
                elif h.bitrate_threshold_kbps > 0 and h.bitrate_threshold_kbps > self.rate_source.bw_for(sid, now):
                    reason = "bitrate"
                if reason is not None:
                    self._msg_in_drop[sid] = h.msg_id
                    self._drop_reason[sid] = reason
                    if reason == "msg":
                        self.counters.msgs_dropped_by_msg[sid] += 1
                    else:
                        self.counters.msgs_dropped_by_bitrate[sid] += 1
            if self._msg_in_drop.get(sid) == h.msg_id:
                self.residence.append((now, now - enq_t))
                self._log(now, "drop_" + self._drop_reason[sid], pkt)
                if not self._fifo:
                    self.rate_source.on_empty(now)
                continue
            if not self._fifo:
                self.rate_source.on_empty(now)
            self.residence.append((now, now - enq_t))
            self._log(now, "deq", pkt)
            return pkt
        return None


class FifoQueue(_QueueBase):
    """Plain drop-tail buffer; the legacy/no-adaptation baseline."""

    def __init__(
        self,
        capacity_bytes: Optional[int] = None,
        recorder: Optional[EventRecorder] = None,
        name: str = "queue",
    ) -> None:
        super().__init__(capacity_bytes, recorder, name)

    def enqueue(self, pkt: Packet, now: int) -> bool:
        if (
            self.capacity_bytes is not None
            and self._bytes + pkt.wire_bytes > self.capacity_bytes
        ):
            self.counters.packets_tail_dropped[pkt.header.stream_id] += 1
            self._log(now, "drop_tail", pkt)
            return False
        self._fifo.append((pkt, now))
        self._bytes += pkt.wire_bytes
        self._log(now, "enq", pkt)
        return True

    def dequeue(self, now: int) -> Optional[Packet]:
        if not self._fifo:
            return None
        pkt, enq_t = self._fifo.popleft()
        self._bytes -= pkt.wire_bytes
        self.residence.append((now, now - enq_t))
        self._log(now, "deq", pkt)
        return pkt


class PDropQueue(_QueueBase):
    """Priority purge baseline: only when the buffer is full does the
    arrival of a message purge fully-queued lower-priority messages.

    Purge order is lowest priority first (highest numeric value), oldest
    first within a priority, stopping as soon as the incoming packet
    fits. A message in transmission or still arriving is never purged.
    """

    def __init__(
        self,
        capacity_bytes: int,
        recorder: Optional[EventRecorder] = None,
        name: str = "queue",
    ) -> None:
        super().__init__(capacity_bytes, recorder, name)
        self._emitting: Optional[tuple[int, int]] = None
        self._rejected: set[tuple[int, int]] = set()

    def enqueue(self, pkt: Packet, now: int) -> bool:
        h = pkt.header
        key = (h.stream_id, h.msg_id)
        if key in self._rejected:
            self.counters.packets_tail_dropped[h.stream_id] += 1
            self._log(now, "drop_tail", pkt)
            return False
        if self._bytes + pkt.wire_bytes > self.capacity_bytes:
            self._purge_for(pkt, now)
        if self._bytes + pkt.wire_bytes > self.capacity_bytes:
            self._rejected.add(key)
            self.counters.packets_tail_dropped[h.stream_id] += 1
            self._log(now, "drop_tail", pkt)
            return False
        self._fifo.append((pkt, now))
        self._bytes += pkt.wire_bytes
        self._log(now, "enq", pkt)
        return True

    def _purge_for(self, incoming: Packet, now: int) -> None:
        v = incoming.header.msg_priority
        groups: dict[tuple[int, int], dict] = {}
        for order, (pkt, enq_t) in enumerate(self._fifo):
            h = pkt.header
            key = (h.stream_id, h.msg_id)
            g = groups.setdefault(
                key,
                {"prio": h.msg_priority, "order": order, "head": False, "tail": False, "bytes": 0},
            )
            g["head"] = g["head"] or h.head
            g["tail"] = g["tail"] or h.tail
            g["bytes"] += pkt.wire_bytes
        candidates = [
            (key, g)
            for key, g in groups.items()
            if g["prio"] > v and g["head"] and g["tail"] and key != self._emitting
        ]
        candidates.sort(key=lambda kg: (-kg[1]["prio"], kg[1]["order"]))
        purged: set[tuple[int, int]] = set()
        freed = 0
        needed = self._bytes + incoming.wire_bytes - self.capacity_bytes
        for key, g in candidates:
            if freed >= needed:
                break
            purged.add(key)
            freed += g["bytes"]
            self.counters.msgs_dropped_by_msg[key[0]] += 1
        if not purged:
            return
        kept: deque[tuple[Packet, int]] = deque()
        for pkt, enq_t in self._fifo:
            key = (pkt.header.stream_id, pkt.header.msg_id)
            if key in purged:
                self._bytes -= pkt.wire_bytes
                self.residence.append((now, now - enq_t))
                self._log(now, "drop_msg", pkt)
            else:
                kept.append((pkt, enq_t))
        self._fifo = kept

    def dequeue(self, now: int) -> Optional[Packet]:
        if not self._fifo:
            return None
        pkt, enq_t = self._fifo.popleft()
        self._bytes -= pkt.wire_bytes
        h = pkt.header
        if h.head and not h.tail:
            self._emitting = (h.stream_id, h.msg_id)
        elif h.tail:
            self._emitting = None
        self.residence.append((now, now - enq_t))
        self._log(now, "deq", pkt)
        return pkt
