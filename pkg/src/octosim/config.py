"""Scenario configuration: JSON schema, defaults, and validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from octosim.types import MTU

DEFAULT_BUFFER_BYTES = 375_000
DEFAULT_RTT_MS = 60

ROUTER_KINDS = ("octopus", "pdrop", "droptail")
SENDER_KINDS = ("temporal", "spatial", "volumetric", "bulk", "oracle")
TOPOLOGY_KINDS = ("cellular-only", "legacy-only", "legacy-then-cellular")

SCHEMES = ("octopus", "octobbr", "pdrop", "droptail", "oracle", "stale-oracle")


class ConfigError(ValueError):
    """Raised for invalid or inconsistent scenario configuration."""


@dataclass
class LinkConfig:
    trace: str = "constant:12"
    buffer_bytes: int = DEFAULT_BUFFER_BYTES
    rtt_ms: int = DEFAULT_RTT_MS


@dataclass
class FlowConfig:
    sender: str = "spatial"
    # Policy parameters (fps, ratios, overhead factors, size means, ...);
    # generator-specific, with defaults applied by the apps module.
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    link: LinkConfig = field(default_factory=LinkConfig)
    flows: list[FlowConfig] = field(default_factory=lambda: [FlowConfig()])
    router: str = "octopus"
    endpoint_dropping: bool = True
    topology: str = "cellular-only"
    legacy_rate_mbps: float = 12.0
    legacy_buffer_bytes: int = DEFAULT_BUFFER_BYTES
    duration_s: float = 10.0
    seed: int = 1
    out_dir: str = "out"
    event_log: bool = False

    def validate(self) -> None:
        if self.router not in ROUTER_KINDS:
            raise ConfigError(f"unknown router kind {self.router!r}")
        if self.topology not in TOPOLOGY_KINDS:
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.duration_s < 0:
            raise ConfigError("duration must be non-negative")
        if self.link.buffer_bytes < MTU:
            raise ConfigError("link buffer must hold at least one MTU")
        if self.legacy_buffer_bytes < MTU:
            raise ConfigError("legacy buffer must hold at least one MTU")
        if not self.flows:
            raise ConfigError("at least one flow required")
        for f in self.flows:
            if f.sender not in SENDER_KINDS:
                raise ConfigError(f"unknown sender kind {f.sender!r}")


def scenario_from_dict(doc: dict[str, Any]) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    known = {
        "name", "link", "flows", "router", "endpoint_dropping", "topology",
        "legacy_rate_mbps", "legacy_buffer_bytes", "duration_s", "seed",
        "out_dir", "event_log",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")

    link = LinkConfig(**doc.get("link", {}))
    flows = [FlowConfig(**f) for f in doc.get("flows", [{}])]
    cfg = ScenarioConfig(
        name=doc.get("name", "scenario"),
        link=link,
        flows=flows,
        router=doc.get("router", "octopus"),
        endpoint_dropping=doc.get("endpoint_dropping", True),
        topology=doc.get("topology", "cellular-only"),
        legacy_rate_mbps=doc.get("legacy_rate_mbps", 12.0),
        legacy_buffer_bytes=doc.get("legacy_buffer_bytes", DEFAULT_BUFFER_BYTES),
        duration_s=doc.get("duration_s", 10.0),
        seed=doc.get("seed", 1),
        out_dir=doc.get("out_dir", "out"),
        event_log=doc.get("event_log", False),
    )
    cfg.validate()
    return cfg


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}"
        ) from e
    try:
        return scenario_from_dict(doc)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e


def apply_scheme(cfg: ScenarioConfig, scheme: str) -> ScenarioConfig:
    """Rewrite router/endpoint/sender settings for a named scheme.

    'octobbr' keeps the content-aware transport but disables the router
    dropping logic; 'droptail' disables adaptation everywhere.
    """
    import copy

    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r} (choose from {SCHEMES})")
    out = copy.deepcopy(cfg)
    if scheme == "octopus":
        out.router = "octopus"
        out.endpoint_dropping = True
    elif scheme == "octobbr":
        out.router = "droptail"
        out.endpoint_dropping = True
    elif scheme == "pdrop":
        out.router = "pdrop"
        out.endpoint_dropping = True
    elif scheme == "droptail":
        out.router = "droptail"
        out.endpoint_dropping = False
    elif scheme in ("oracle", "stale-oracle"):
        out.router = "droptail"
        out.endpoint_dropping = False
        offset = 5_000 if scheme == "stale-oracle" else 0
        out.flows = [FlowConfig(sender="oracle", params={"offset_us": offset})]
    out.validate()
    return out
