"""BBR-style congestion control: windowed max-bandwidth / min-RTT
filters, a four-mode state machine, pacing and cwnd gains.

Parameters follow the stock v1 defaults: startup gain 2.89 (exit after
max bandwidth grows <25% across 3 consecutive non-app-limited rounds),
drain gain 1/2.89, an eight-phase probing gain cycle, and a periodic
RTT probe every 10 s with cwnd clamped to 4 packets.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Optional


class Mode(enum.Enum):
    STARTUP = "startup"
    DRAIN = "drain"
    PROBE_BW = "probe_bw"
    PROBE_RTT = "probe_rtt"


@dataclass
class SentEntry:
    seq: int
    nbytes: int
    sent_at: int
    delivered_at_send: int
    delivered_time_at_send: int
    app_limited: bool


class WindowedMaxFilter:
    """Max over a trailing window counted in rounds."""

    def __init__(self, window_rounds: int = 10) -> None:
        self.window = window_rounds
        self._entries: deque[tuple[int, float]] = deque()  # (round, value)

    def update(self, rnd: int, value: float) -> None:
        while self._entries and self._entries[-1][1] <= value:
            self._entries.pop()
        self._entries.append((rnd, value))
        while self._entries and self._entries[0][0] <= rnd - self.window:
            self._entries.popleft()

    def get(self) -> float:
        return self._entries[0][1] if self._entries else 0.0


class BbrLite:
    STARTUP_GAIN = 2.89
    DRAIN_GAIN = 1 / 2.89
    CYCLE = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    CWND_GAIN = 2.0
    MIN_RTT_WINDOW_US = 10_000_000
    PROBE_RTT_INTERVAL_US = 10_000_000
    PROBE_RTT_DURATION_US = 200_000
    MIN_CWND_PACKETS = 4
    INIT_CWND_PACKETS = 10

    def __init__(self, now: int = 0, mtu: int = 1500, init_rtt_us: int = 100_000) -> None:
        self.mtu = mtu
        self.init_rtt_us = init_rtt_us
        self.max_bw = WindowedMaxFilter(window_rounds=10)
        self.min_rtt_us: Optional[int] = None
        self.min_rtt_stamp = now
        self.mode = Mode.STARTUP
        self.pacing_gain = self.STARTUP_GAIN
        self.delivered = 0
        self.delivered_time = now
        self.round_count = 0
        self.next_round_delivered = 0
        self.round_start = False
        self.full_bw = 0.0
        self.full_bw_count = 0
        self.filled_pipe = False
        self.cycle_idx = 2
        self.cycle_stamp = now
        self.app_limited_marker = 0
        self._probe_rtt_done_at: Optional[int] = None
        self._probe_rtt_round_base = 0
        self.lost_bytes = 0

    # --- rate/window views ---------------------------------------------

    @property
    def max_bw_bps(self) -> float:
        return self.max_bw.get()

    def bw_estimate_kbps(self) -> float:
        bw = self.max_bw.get()
        if bw > 0:
            return bw / 1000
        return self.pacing_rate_bps / 1000

    @property
    def pacing_rate_bps(self) -> float:
        bw = self.max_bw.get()
        if bw <= 0:
            # before the first sample: 10 packets per assumed RTT
            bw = self.INIT_CWND_PACKETS * self.mtu * 8 * 1e6 / self.init_rtt_us
        return self.pacing_gain * bw

    def _bdp_bytes(self) -> float:
        bw = self.max_bw.get()
        if bw <= 0 or self.min_rtt_us is None:
            return self.INIT_CWND_PACKETS * self.mtu
        return bw * self.min_rtt_us / 8e6

    @property
    def cwnd_bytes(self) -> int:
        if self.mode is Mode.PROBE_RTT:
            return self.MIN_CWND_PACKETS * self.mtu
        if self.max_bw.get() <= 0 or self.min_rtt_us is None:
            return self.INIT_CWND_PACKETS * self.mtu
        cwnd = int(self.CWND_GAIN * self._bdp_bytes())
        return max(cwnd, self.MIN_CWND_PACKETS * self.mtu)

    # --- sample processing ---------------------------------------------

    def mark_app_limited(self, inflight_bytes: int) -> None:
        self.app_limited_marker = max(self.delivered + inflight_bytes, 1)

    def is_app_limited(self) -> bool:
        return self.app_limited_marker != 0

    def on_ack(self, entry: SentEntry, now: int, inflight_bytes: int) -> None:
        self.delivered += entry.nbytes
        self.delivered_time = now
        if self.app_limited_marker and self.delivered > self.app_limited_marker:
            self.app_limited_marker = 0

        if entry.delivered_at_send >= self.next_round_delivered:
            self.round_count += 1
            self.next_round_delivered = self.delivered
            self.round_start = True
        else:
            self.round_start = False

        interval = now - entry.delivered_time_at_send
        if interval > 0:
            rate_bps = (self.delivered - entry.delivered_at_send) * 8e6 / interval
            if not entry.app_limited:
                self.max_bw.update(self.round_count, rate_bps)

        rtt = now - entry.sent_at
        expired = now - self.min_rtt_stamp > self.MIN_RTT_WINDOW_US
        if self.min_rtt_us is None or rtt <= self.min_rtt_us or expired:
            self.min_rtt_us = rtt
            self.min_rtt_stamp = now

        self._advance_mode(now, inflight_bytes, entry.app_limited, expired)

    def on_loss(self, nbytes: int) -> None:
        # unreliable transport: losses are not retransmitted and do not
        # feed back into the model beyond accounting
        self.lost_bytes += nbytes

    # --- mode machine --------------------------------------------------

    def _advance_mode(
        self, now: int, inflight: int, sample_app_limited: bool,
        min_rtt_expired: bool = False,
    ) -> None:
        if self.mode is Mode.STARTUP:
            self._check_full_pipe(sample_app_limited)
            if self.filled_pipe:
                self.mode = Mode.DRAIN
                self.pacing_gain = self.DRAIN_GAIN
        if self.mode is Mode.DRAIN and inflight <= self._bdp_bytes():
            self._enter_probe_bw(now)
        if self.mode is Mode.PROBE_BW:
            if self.min_rtt_us and now - self.cycle_stamp > self.min_rtt_us:
                self.cycle_idx = (self.cycle_idx + 1) % len(self.CYCLE)
                self.cycle_stamp = now
                self.pacing_gain = self.CYCLE[self.cycle_idx]
        # The expiry flag predates this ack's possible filter refresh, so
        # a periodic probe fires even when the expiring sample was accepted.
        if (
            self.mode is not Mode.PROBE_RTT
            and (min_rtt_expired
                 or now - self.min_rtt_stamp > self.PROBE_RTT_INTERVAL_US)
        ):
            self.mode = Mode.PROBE_RTT
            self.pacing_gain = 1.0
            self._probe_rtt_done_at = None
        if self.mode is Mode.PROBE_RTT:
            self._handle_probe_rtt(now, inflight)

    def _check_full_pipe(self, sample_app_limited: bool) -> None:
        if self.filled_pipe or not self.round_start or sample_app_limited:
            return
        bw = self.max_bw.get()
        if bw >= self.full_bw * 1.25:
            self.full_bw = bw
            self.full_bw_count = 0
            return
        self.full_bw_count += 1
        if self.full_bw_count >= 3:
            self.filled_pipe = True

    def _enter_probe_bw(self, now: int) -> None:
        self.mode = Mode.PROBE_BW
        self.cycle_idx = 2
        self.cycle_stamp = now
        self.pacing_gain = self.CYCLE[self.cycle_idx]

    def _handle_probe_rtt(self, now: int, inflight: int) -> None:
        if self._probe_rtt_done_at is None:
            if inflight <= self.MIN_CWND_PACKETS * self.mtu:
                self._probe_rtt_done_at = now + self.PROBE_RTT_DURATION_US
                self._probe_rtt_round_base = self.round_count
            return
        if now >= self._probe_rtt_done_at and self.round_count > self._probe_rtt_round_base:
            self.min_rtt_stamp = now
            if self.filled_pipe:
                self._enter_probe_bw(now)
            else:
                self.mode = Mode.STARTUP
                self.pacing_gain = self.STARTUP_GAIN
