"""Packet-level event recording shared by queues, links, and metrics."""

from __future__ import annotations

import csv
from typing import NamedTuple


class Event(NamedTuple):
    time_us: int
    element: str
    event: str  # enq | deq | drop_msg | drop_bitrate | drop_tail | deliver
    stream: int
    msg_id: int
    seq: int
    bytes: int


class EventRecorder:
    """In-memory event log; written out as CSV only when requested."""

    def __init__(self) -> None:
        self.events: list[Event] = []

    def log(
        self,
        time_us: int,
        element: str,
        event: str,
        stream: int = 0,
        msg_id: int = 0,
        seq: int = 0,
        nbytes: int = 0,
    ) -> None:
        self.events.append(Event(time_us, element, event, stream, msg_id, seq, nbytes))

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["time_us", "element", "event", "stream", "msg_id", "seq", "bytes"])
            w.writerows(self.events)
