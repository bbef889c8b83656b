"""Trunk transmitter: shared user-packet buffer feeding the trunk's TCP connection."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Callable

from ..netmodel import FlowKey, InvariantError, Packet, header_image, zero_payload
from ..simkernel import RandomStream, Simulator
from ..tcpflow import MSS, TcpConn, TcpSender
from .codec import FULL_LEN, HeaderCompressor, frame
from .policy import (TrunkConfig, drop_probability, drop_threshold, exemption_threshold,
                     flow_window_estimate, trunk_buffer_capacity)

# largest framed user packet for a 1500-byte datagram: 2 + 42 + 1460
TRUNK_MSS = 2 + FULL_LEN + MSS


class AdmitVerdict(enum.Enum):
    ENQUEUED = "enqueued"
    DROPPED_PROBABILISTIC = "dropped_probabilistic"
    DROPPED_TAIL = "dropped_tail"


@dataclass(slots=True)
class FlowAccount:
    flow_key: FlowKey
    forwarded_since_drop: int = 0
    exemption_k: int = 0
    last_seen: float = 0.0
    in_buffer: int = 0
    k_at_drop: int = 0
    prob_drops: int = 0
    tail_drops: int = 0
    forwarded: int = 0

    @property
    def exempt(self) -> bool:
        # the K armed at the last managed drop stays binding even if the
        # current estimate has since shrunk
        return self.forwarded_since_drop < max(self.exemption_k, self.k_at_drop)


class TrunkTransmitter:
    """Admission (buffer limit, probabilistic drop, exemption) plus encapsulation.

    User packets go in through :meth:`admit`. Whenever the trunk connection
    has window to spare, :meth:`pump` moves buffered packets, compressed and
    framed, into it; ``output`` receives the resulting trunk segments.
    """

    def __init__(self, sim: Simulator, config: TrunkConfig, trunk_key: FlowKey,
                 output: Callable[[Packet], None], rng: RandomStream | None = None,
                 name: str = "trunk", mss: int = TRUNK_MSS):
        self.sim = sim
        self.config = config
        self.name = name
        self.capacity = trunk_buffer_capacity(config)
        self.threshold = drop_threshold(config, self.capacity)
        self.buffer: deque[Packet] = deque()
        self.accounts: dict[FlowKey, FlowAccount] = {}
        self._active: dict[FlowKey, FlowAccount] = {}
        self.compressor = HeaderCompressor()
        self.rng = rng if rng is not None else sim.stream(f"trunk:{name}")
        self.conn = TcpConn(trunk_key, mss, header_layers=2)
        self.sender = TcpSender(sim, self.conn, output, feeder=self._feed)
        self.arrivals = 0
        self.prob_drops = 0
        self.tail_drops = 0
        self.forwarded = 0
        self.bytes_forwarded = 0
        self.p3_violations = 0
        self.peak_occupancy = 0
        self.strict_p3 = False
        self.drop_hooks: list[Callable[[Packet, AdmitVerdict], None]] = []

    @property
    def occupancy(self) -> int:
        return len(self.buffer)

    def active_flow_count(self, now: float | None = None) -> int:
        now = self.sim.now if now is None else now
        horizon = now - self.config.activity_window
        active = self._active
        stale = [k for k, a in active.items() if a.in_buffer == 0 and a.last_seen < horizon]
        for k in stale:
            del active[k]
        return len(active)

    def admit(self, pkt: Packet, now: float | None = None) -> AdmitVerdict:
        now = self.sim.now if now is None else now
        self.arrivals += 1
        key = pkt.flow_key
        acct = self.accounts.get(key)
        if acct is None:
            acct = self.accounts[key] = FlowAccount(key)
        acct.last_seen = now
        self._active[key] = acct
        w = flow_window_estimate(self.conn, self.active_flow_count(now))
        acct.exemption_k = exemption_threshold(w)[1]

        occupancy = len(self.buffer)
        if occupancy >= self.capacity:
            self.tail_drops += 1
            acct.tail_drops += 1
            self._dropped(pkt, AdmitVerdict.DROPPED_TAIL)
            return AdmitVerdict.DROPPED_TAIL
        p = drop_probability(occupancy, self.threshold, self.capacity)
        if p > 0.0 and self.rng.next_uniform() < p and not acct.exempt:
            if acct.prob_drops and acct.forwarded_since_drop < acct.k_at_drop:
                self.p3_violations += 1
                if self.strict_p3:
                    raise InvariantError(
                        f"{self.name}: {key} dropped after {acct.forwarded_since_drop}"
                        f" forwarded, K was {acct.k_at_drop}")
            self.prob_drops += 1
            acct.prob_drops += 1
            acct.forwarded_since_drop = 0
            acct.k_at_drop = acct.exemption_k
            self._dropped(pkt, AdmitVerdict.DROPPED_PROBABILISTIC)
            return AdmitVerdict.DROPPED_PROBABILISTIC

        self.buffer.append(pkt)
        acct.in_buffer += 1
        if occupancy >= self.peak_occupancy:
            self.peak_occupancy = occupancy + 1
        self.sender.flush()
        return AdmitVerdict.ENQUEUED

    def _dropped(self, pkt: Packet, verdict: AdmitVerdict) -> None:
        for hook in self.drop_hooks:
            hook(pkt, verdict)

    def encapsulate(self, pkt: Packet) -> bytes:
        """Compress the user packet's header and frame it for the trunk stream."""
        compressed = self.compressor.compress(pkt.flow_key, header_image(pkt))
        payload = pkt.data if pkt.data is not None else zero_payload(pkt.payload_len)
        return frame(compressed + payload)

    def _feed(self) -> None:
        conn = self.conn
        buf = self.buffer
        limit = conn.cwnd
        while buf:
            head = buf[0]
            worst = 2 + FULL_LEN + head.payload_len
            # unsent and unacked messages both count against the window
            if conn.app_end - conn.snd_una + worst > limit and conn.app_end > conn.snd_una:
                break
            buf.popleft()
            msg = self.encapsulate(head)
            conn.write_message(msg)
            acct = self.accounts[head.flow_key]
            acct.in_buffer -= 1
            acct.forwarded_since_drop += 1
            acct.forwarded += 1
            self.forwarded += 1
            self.bytes_forwarded += len(msg)

    def pump(self) -> list[Packet]:
        """Move what the trunk window allows from the buffer into the trunk connection."""
        sent = []
        out = self.sender.output
        self.sender.output = lambda p: (sent.append(p), out(p))
        try:
            self.sender.flush()
        finally:
            self.sender.output = out
        return sent

    def check(self) -> None:
        total = self.prob_drops + self.tail_drops + self.forwarded + len(self.buffer)
        if self.arrivals != total:
            raise InvariantError(
                f"{self.name}: arrivals {self.arrivals} != prob {self.prob_drops} + tail "
                f"{self.tail_drops} + forwarded {self.forwarded} + buffered {len(self.buffer)}")
        if len(self.buffer) > self.capacity:
            raise InvariantError(f"{self.name}: buffer over capacity")
        buffered = sum(a.in_buffer for a in self.accounts.values())
        if buffered != len(self.buffer):
            raise InvariantError(f"{self.name}: per-flow residency {buffered} != {len(self.buffer)}")


def admit(tx: TrunkTransmitter, pkt: Packet, now: float | None = None) -> AdmitVerdict:
    return tx.admit(pkt, now)


def pump(tx: TrunkTransmitter) -> list[Packet]:
    return tx.pump()


def active_flow_count(tx: TrunkTransmitter, now: float | None = None) -> int:
    return tx.active_flow_count(now)
