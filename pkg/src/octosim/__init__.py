"""Discrete-event simulator for semantic in-network dropping of
real-time media streams over variable-bandwidth links."""

from octosim.config import (
    ConfigError,
    FlowConfig,
    LinkConfig,
    SCHEMES,
    ScenarioConfig,
    apply_scheme,
    load_scenario,
)
from octosim.header import HeaderError, OctopusHeader, decode_header, encode_header
from octosim.sim import RunResult, run_scenario
from octosim.trace import BandwidthTrace, TraceError, load_trace, resolve_trace
from octosim.types import HEADER_BYTES, MAX_PAYLOAD, MTU, MsgParams, Packet

__all__ = [
    "BandwidthTrace",
    "ConfigError",
    "FlowConfig",
    "HEADER_BYTES",
    "HeaderError",
    "LinkConfig",
    "MAX_PAYLOAD",
    "MTU",
    "MsgParams",
    "OctopusHeader",
    "Packet",
    "RunResult",
    "SCHEMES",
    "ScenarioConfig",
    "TraceError",
    "apply_scheme",
    "decode_header",
    "encode_header",
    "load_scenario",
    "load_trace",
    "resolve_trace",
    "run_scenario",
]

__version__ = "0.1.0"
