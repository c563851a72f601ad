"""Shared domain types: messages, packets, and wire-size constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from octosim.header import OctopusHeader

MTU = 1500
HEADER_BYTES = 12
UDP_IP_OVERHEAD = 28
# One MTU-sized frame on the wire leaves this much room for payload.
MAX_PAYLOAD = MTU - HEADER_BYTES - UDP_IP_OVERHEAD

NUM_PRIORITIES = 8


@dataclass(frozen=True)
class MsgParams:
    """Per-message dropping parameters set by the application.

    All-zero defaults disable content adaptation for the message.
    msg_priority uses 0 for the most important messages (higher value =
    lower priority). bitrate_threshold_kbps of 0 disables the bandwidth
    dropping condition.
    """

    msg_priority: int = 0
    drop_flag: bool = False
    priority_threshold: int = 0
    bitrate_threshold_kbps: int = 0

    def validate(self) -> None:
        if not 0 <= self.msg_priority < NUM_PRIORITIES:
            raise ValueError(f"msg_priority {self.msg_priority} out of [0,7]")
        if not 0 <= self.priority_threshold < NUM_PRIORITIES:
            raise ValueError(
                f"priority_threshold {self.priority_threshold} out of [0,7]"
            )
        if not 0 <= self.bitrate_threshold_kbps < 2**32:
            raise ValueError("bitrate_threshold_kbps out of uint32 range")


@dataclass
class Message:
    """An atomic application unit; the granularity of semantic drops."""

    stream: int
    msg_id: int
    size: int
    params: MsgParams
    created_at: int  # simulation time, microseconds
    frame_tag: Any = None


@dataclass
class Packet:
    """One fragment of a message, carrying the 12-byte semantic header."""

    header: OctopusHeader
    payload_size: int
    seq: int = -1
    sent_at: int = 0

    @property
    def wire_bytes(self) -> int:
        # Payload plus semantic header plus UDP/IP allowance; what queues
        # and links account against capacity.
        return self.payload_size + HEADER_BYTES + UDP_IP_OVERHEAD
