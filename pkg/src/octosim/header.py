"""Bit-exact codec for the 12-byte per-packet semantic header.

Layout (big-endian multi-byte fields), documented with a worked example
in FORMAT.md:

    byte 0      flags: bit0 head, bit1 tail, bit2 drop_flag,
                bits 3-5 msg_priority, bits 6-7 reserved (0)
    byte 1      priority_threshold in the low 3 bits, high 5 reserved (0)
    bytes 2-3   stream_id (uint16)
    bytes 4-7   msg_id (uint32)
    bytes 8-11  bitrate_threshold_kbps (uint32)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

HEADER_LEN = 12

_FLAG_HEAD = 0x01
_FLAG_TAIL = 0x02
_FLAG_DROP = 0x04

_STRUCT = struct.Struct(">BBHII")


class HeaderError(ValueError):
    """Raised on out-of-range fields or a malformed buffer."""


@dataclass(frozen=True)
class OctopusHeader:
    head: bool = False
    tail: bool = False
    drop_flag: bool = False
    msg_priority: int = 0
    priority_threshold: int = 0
    stream_id: int = 0
    msg_id: int = 0
    bitrate_threshold_kbps: int = 0


def encode_header(h: OctopusHeader) -> bytes:
    """Serialize a header to exactly 12 bytes; reserved bits are zero."""
    if not 0 <= h.msg_priority <= 7:
        raise HeaderError(f"msg_priority {h.msg_priority} out of [0,7]")
    if not 0 <= h.priority_threshold <= 7:
        raise HeaderError(
            f"priority_threshold {h.priority_threshold} out of [0,7]"
        )
    if not 0 <= h.stream_id < 2**16:
        raise HeaderError(f"stream_id {h.stream_id} out of uint16 range")
    if not 0 <= h.msg_id < 2**32:
        raise HeaderError(f"msg_id {h.msg_id} out of uint32 range")
    if not 0 <= h.bitrate_threshold_kbps < 2**32:
        raise HeaderError("bitrate_threshold_kbps out of uint32 range")

    flags = (
        (_FLAG_HEAD if h.head else 0)
        | (_FLAG_TAIL if h.tail else 0)
        | (_FLAG_DROP if h.drop_flag else 0)
        | (h.msg_priority << 3)
    )
    return _STRUCT.pack(
        flags,
        h.priority_threshold,
        h.stream_id,
        h.msg_id,
        h.bitrate_threshold_kbps,
    )


def decode_header(buf: bytes) -> OctopusHeader:
    """Parse 12 bytes into a header; reserved bits are ignored."""
    if len(buf) != HEADER_LEN:
        raise HeaderError(f"expected {HEADER_LEN} bytes, got {len(buf)}")
    flags, threshold, stream_id, msg_id, bitrate = _STRUCT.unpack(buf)
    return OctopusHeader(
        head=bool(flags & _FLAG_HEAD),
        tail=bool(flags & _FLAG_TAIL),
        drop_flag=bool(flags & _FLAG_DROP),
        msg_priority=(flags >> 3) & 0x07,
        priority_threshold=threshold & 0x07,
        stream_id=stream_id,
        msg_id=msg_id,
        bitrate_threshold_kbps=bitrate,
    )
