"""Packet-level simulator for TCP trunks: TCP-controlled tunnels that carry many user flows."""

from .netmodel import ConfigError, FlowKey, InvariantError, Packet
from .simkernel import RandomStream, Simulator

__version__ = "0.1.0"

__all__ = ["ConfigError", "FlowKey", "InvariantError", "Packet", "RandomStream", "Simulator"]
