"""Trunk receiver: deframe, decompress and restore user packets."""

from __future__ import annotations

from typing import Callable

from ..netmodel import Packet, packet_from_header
from .codec import Deframer, HeaderDecompressor


class TrunkReceiver:
    """Consumes the trunk connection's in-order byte stream.

    Restored packets are returned and, if ``deliver`` is set, handed to it in
    the order the transmitter forwarded them.
    """

    def __init__(self, deliver: Callable[[Packet], None] | None = None, name: str = "trunk"):
        self.name = name
        self.deliver = deliver
        self.deframer = Deframer()
        self.decompressor = HeaderDecompressor()
        self.restored = 0
        self.bytes_in = 0

    def receive(self, data: bytes, now: float = 0.0) -> list[Packet]:
        self.bytes_in += len(data)
        out = []
        for body in self.deframer.feed(data):
            header, n = self.decompressor.decompress(body)
            pkt = packet_from_header(header, body[n:], created_at=now)
            out.append(pkt)
        self.restored += len(out)
        if self.deliver is not None:
            for pkt in out:
                self.deliver(pkt)
        return out


def trunk_receive(rx: TrunkReceiver, payload: bytes, now: float = 0.0) -> list[Packet]:
    return rx.receive(payload, now)
