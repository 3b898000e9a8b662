"""SRv6 programmable dataplane and deterministic network simulator."""

from ._core import (
    ConfigError,
    Packet,
    ParseError,
    Srh,
    bench,
    flow_hash,
    hybrid,
    iwrr_schedule,
    owd,
    run,
    scenario_info,
    traceroute,
)

__all__ = [
    "ConfigError",
    "Packet",
    "ParseError",
    "Srh",
    "bench",
    "flow_hash",
    "hybrid",
    "iwrr_schedule",
    "owd",
    "run",
    "scenario_info",
    "traceroute",
]
