"""Network elements: trace-driven cellular link and legacy switch."""

from __future__ import annotations

from typing import Callable, Optional

from octosim.dropqueue import FifoQueue
from octosim.events import EventRecorder
from octosim.trace import BandwidthTrace
from octosim.types import Packet


class CellularLink:
    """Serves one queued packet (<= 1500 wire bytes) per trace
    opportunity; an opportunity with an empty queue is wasted."""

    def __init__(
        self,
        loop,
        trace: BandwidthTrace,
        queue,
        deliver: Callable[[Packet], None],
        *,
        end_us: int,
        downstream_delay_us: int = 0,
        rate_source=None,
        recorder: Optional[EventRecorder] = None,
        name: str = "cell",
    ) -> None:
        self.loop = loop
        self.queue = queue
        self.deliver = deliver
        self.end_us = end_us
        self.downstream_delay_us = downstream_delay_us
        self.rate_source = rate_source
        self.recorder = recorder
        self.name = name
        self.opportunities_fired = 0
        self.packets_served = 0
        self.bytes_served = 0
        self._ops = trace.iter_from(0)
        self._schedule_next()

    def _schedule_next(self) -> None:
        t = next(self._ops)
        if t <= self.end_us:
            self.loop.schedule(t, self._fire)

    def ingress(self, pkt: Packet) -> bool:
        return self.queue.enqueue(pkt, self.loop.now)

    def _fire(self) -> None:
        now = self.loop.now
        self.opportunities_fired += 1
        pkt = self.queue.dequeue(now)
        if pkt is not None:
            if self.rate_source is not None:
                self.rate_source.on_departure(pkt.wire_bytes, now)
            self.packets_served += 1
            self.bytes_served += pkt.wire_bytes
            if self.downstream_delay_us:
                self.loop.schedule(
                    now + self.downstream_delay_us, lambda p=pkt: self.deliver(p)
                )
            else:
                self.deliver(pkt)
        self._schedule_next()


class LegacySwitch:
    """Constant-rate FIFO drop-tail switch with no semantic logic."""

    def __init__(
        self,
        loop,
        rate_bps: float,
        capacity_bytes: int,
        forward: Callable[[Packet], None],
        *,
        recorder: Optional[EventRecorder] = None,
        name: str = "legacy",
    ) -> None:
        self.loop = loop
        self.rate_bps = rate_bps
        self.forward = forward
        self.queue = FifoQueue(capacity_bytes, recorder, name)
        self._busy = False
        self.packets_served = 0
        self.bytes_served = 0

    def ingress(self, pkt: Packet) -> bool:
        ok = self.queue.enqueue(pkt, self.loop.now)
        if ok and not self._busy:
            self._busy = True
            self._start_tx()
        return ok

    def _start_tx(self) -> None:
        pkt, _ = self.queue._fifo[0]
        tx_us = max(int(pkt.wire_bytes * 8e6 / self.rate_bps), 1)
        self.loop.schedule(self.loop.now + tx_us, self._complete_tx)

    def _complete_tx(self) -> None:
        pkt = self.queue.dequeue(self.loop.now)
        self.packets_served += 1
        self.bytes_served += pkt.wire_bytes
        self.forward(pkt)
        if len(self.queue):
            self._start_tx()
        else:
            self._busy = False
