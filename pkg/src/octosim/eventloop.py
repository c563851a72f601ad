"""Deterministic discrete-event loop with a microsecond virtual clock."""

from __future__ import annotations

import heapq
from typing import Callable


class EventLoop:
    """Events fire in (time, insertion-order) order; time never goes back."""

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    def schedule(self, at_us: int, fn: Callable[[], None]) -> None:
        if at_us < self.now:
            raise ValueError(f"cannot schedule at {at_us} before now={self.now}")
        heapq.heappush(self._heap, (at_us, self._seq, fn))
        self._seq += 1

    def schedule_in(self, delay_us: int, fn: Callable[[], None]) -> None:
        self.schedule(self.now + delay_us, fn)

    def run_until(self, end_us: int) -> None:
        while self._heap and self._heap[0][0] <= end_us:
            at, _, fn = heapq.heappop(self._heap)
            self.now = at
            fn()
        self.now = max(self.now, end_us)
