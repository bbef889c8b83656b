"""Reno TCP: slow start, congestion avoidance, fast retransmit/recovery, RTO.

:class:`TcpConn` is the pure state machine; it takes the current time as an
argument and returns the segments it wants transmitted. :class:`TcpSender`
binds a connection to a :class:`~trunksim.simkernel.Simulator` (retransmission
timer, output callback) and :class:`TcpReceiver` generates cumulative ACKs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .netmodel import HEADER_BYTES, ConfigError, FlowKey, Packet
from .simkernel import Event, Simulator

MSS = 1460
INITIAL_SSTHRESH_SEGMENTS = 64
RTO_MIN = 0.2
RTO_MAX = 64.0
INITIAL_RTO = 1.0
DUPACK_THRESHOLD = 3


class ProtocolError(RuntimeError):
    """An ACK or RTT sample the sender could not have produced."""


@dataclass
class AckResult:
    cwnd: float
    packets: list[Packet] = field(default_factory=list)
    newly_acked: int = 0
    fast_retransmit: bool = False


class TcpConn:
    """Sender-side Reno state for one connection.

    In byte mode the application hands over a byte count (``write``) and
    segments are cut at ``mss``. In message mode (``write_message``) every
    message becomes exactly one segment and retransmissions resend the same
    bytes; the trunk uses this to keep one user packet per trunk segment.
    """

    def __init__(self, flow_key: FlowKey, mss: int = MSS, *, header_layers: int = 1,
                 max_window: int | None = None, rto_min: float = RTO_MIN,
                 rto_max: float = RTO_MAX, initial_rto: float = INITIAL_RTO,
                 partial_ack_retransmit: bool = True):
        if mss <= 0:
            raise ConfigError(f"mss must be positive, got {mss}")
        self.flow_key = flow_key
        self.mss = mss
        self.cwnd: float = float(mss)
        self.ssthresh: float = float(INITIAL_SSTHRESH_SEGMENTS * mss)
        self.snd_una = 0
        self.snd_nxt = 0
        self.snd_max = 0
        self.dup_acks = 0
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto_min = rto_min
        self.rto_max = rto_max
        self.rto = max(rto_min, initial_rto)
        self.in_recovery = False
        self.recover = 0
        self.max_window = max_window
        self.partial_ack_retransmit = partial_ack_retransmit
        self.header_layers = header_layers
        self.app_end: float = 0  # one past the last byte the application has written
        self.retx_timer: Event | None = None
        self._ip_id = 0
        self._rtt_seq: int | None = None
        self._rtt_time = 0.0
        self._messages: deque[tuple[int, bytes]] | None = None
        self._msg_at: dict[int, bytes] | None = None
        self.segments_sent = 0
        self.retransmits = 0
        self.fast_retransmits = 0
        self.timeouts = 0

    # application side

    def write(self, nbytes: float) -> None:
        if self._messages is not None:
            raise ProtocolError("connection is in message mode")
        self.app_end += nbytes

    def write_forever(self) -> None:
        self.write(math.inf)

    def write_message(self, data: bytes) -> None:
        if self._messages is None:
            if self.app_end:
                raise ProtocolError("connection is in byte mode")
            self._messages = deque()
            self._msg_at = {}
        seq = int(self.app_end)
        self._messages.append((seq, data))
        self._msg_at[seq] = data
        self.app_end += len(data)

    @property
    def send_buffer(self) -> float:
        """Bytes written but not yet transmitted for the first time."""
        return self.app_end - self.snd_max

    @property
    def flight(self) -> int:
        return self.snd_nxt - self.snd_una

    @property
    def outstanding(self) -> bool:
        return self.snd_max > self.snd_una

    def all_acked(self) -> bool:
        return self.snd_una >= self.app_end

    def window_room(self) -> float:
        limit = self.cwnd if self.max_window is None else min(self.cwnd, self.max_window)
        return limit - self.flight

    # segment construction

    def _segment_at(self, seq: int) -> tuple[int, bytes | None]:
        if self._msg_at is not None:
            data = self._msg_at[seq]
            return len(data), data
        return int(min(self.mss, self.app_end - seq)), None

    def _packet(self, seq: int, length: int, data: bytes | None, now: float) -> Packet:
        self._ip_id = (self._ip_id + 1) & 0xFFFF
        self.segments_sent += 1
        return Packet(self.flow_key, seq, length, size_total=length + HEADER_BYTES,
                      header_layers=self.header_layers, created_at=now,
                      ip_id=self._ip_id, data=data)

    def maybe_send(self, now: float = 0.0) -> list[Packet]:
        """Emit every segment the window allows."""
        out = []
        limit = self.cwnd if self.max_window is None else min(self.cwnd, self.max_window)
        while self.snd_nxt < self.app_end:
            seq = self.snd_nxt
            length, data = self._segment_at(seq)
            flight = seq - self.snd_una
            # an empty pipe always admits one segment
            if flight > 0 and flight + length > limit:
                break
            if seq >= self.snd_max:
                if self._rtt_seq is None:
                    self._rtt_seq = seq + length
                    self._rtt_time = now
            else:
                self.retransmits += 1
            out.append(self._packet(seq, length, data, now))
            self.snd_nxt = seq + length
            if self.snd_nxt > self.snd_max:
                self.snd_max = self.snd_nxt
        return out

    def _retransmit_head(self, now: float) -> Packet:
        length, data = self._segment_at(self.snd_una)
        self.retransmits += 1
        self._rtt_seq = None
        return self._packet(self.snd_una, length, data, now)

    # ACK / timer processing

    def on_ack(self, ack_seq: int, now: float = 0.0) -> AckResult:
        if ack_seq > self.snd_max:
            raise ProtocolError(f"{self.flow_key}: ack {ack_seq} beyond highest sent {self.snd_max}")
        mss = self.mss
        if ack_seq > self.snd_una:
            acked = ack_seq - self.snd_una
            if self._rtt_seq is not None and ack_seq >= self._rtt_seq:
                self.rtt_update(now - self._rtt_time)
                self._rtt_seq = None
            self.snd_una = ack_seq
            if self.snd_nxt < ack_seq:
                self.snd_nxt = ack_seq
            self._purge()
            self.dup_acks = 0
            if self.in_recovery:
                # deflate; only a full ack of the loss window ends recovery
                self.cwnd = self.ssthresh
                if ack_seq >= self.recover:
                    self.in_recovery = False
                elif self.partial_ack_retransmit:
                    # the next hole is already known lost
                    retx = self._retransmit_head(now)
                    return AckResult(self.cwnd, [retx] + self.maybe_send(now), acked, True)
            elif self.cwnd < self.ssthresh:
                self.cwnd += mss
            else:
                self.cwnd += mss * mss / self.cwnd
            return AckResult(self.cwnd, self.maybe_send(now), acked)

        if not self.outstanding:
            return AckResult(self.cwnd)
        self.dup_acks += 1
        if self.dup_acks == DUPACK_THRESHOLD and not self.in_recovery:
            self.ssthresh = max(self.flight // 2, 2 * mss)
            self.recover = self.snd_max
            retx = self._retransmit_head(now)
            self.fast_retransmits += 1
            self.cwnd = self.ssthresh + DUPACK_THRESHOLD * mss
            self.in_recovery = True
            return AckResult(self.cwnd, [retx] + self.maybe_send(now), 0, True)
        if self.in_recovery:
            self.cwnd += mss
            return AckResult(self.cwnd, self.maybe_send(now))
        return AckResult(self.cwnd)

    def on_timeout(self, now: float = 0.0) -> list[Packet]:
        if not self.outstanding:
            return []
        self.timeouts += 1
        self.ssthresh = max(self.flight // 2, 2 * self.mss)
        self.cwnd = float(self.mss)
        self.rto = min(self.rto * 2, self.rto_max)
        self.snd_nxt = self.snd_una
        self.dup_acks = 0
        self.in_recovery = False
        self._rtt_seq = None
        return self.maybe_send(now)

    def halve_window(self) -> None:
        """Apply a loss-style window halving without any packet loss."""
        self.ssthresh = max(self.flight // 2, 2 * self.mss)
        self.cwnd = float(self.ssthresh)

    def rtt_update(self, sample: float) -> float:
        if sample < 0:
            raise ProtocolError(f"negative RTT sample {sample}")
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self.rto = min(self.rto_max, max(self.rto_min, self.srtt + 4 * self.rttvar))
        return self.rto

    def _purge(self) -> None:
        msgs = self._messages
        if not msgs:
            return
        una = self.snd_una
        while msgs and msgs[0][0] + len(msgs[0][1]) <= una:
            seq, _ = msgs.popleft()
            del self._msg_at[seq]

    def unacked_messages(self) -> list[tuple[int, bytes]]:
        return list(self._messages or ())

    @property
    def window_packets(self) -> int:
        return int(self.cwnd // self.mss)


def open_connection(flow_key: FlowKey, mss: int = MSS, *, registry: set | None = None,
                    **kwargs) -> TcpConn:
    """Create a connection, rejecting a flow key already live in ``registry``."""
    if registry is not None:
        if flow_key in registry:
            raise ConfigError(f"duplicate flow key {flow_key}")
        registry.add(flow_key)
    return TcpConn(flow_key, mss, **kwargs)


class TcpSender:
    """Drives a :class:`TcpConn` inside a simulation.

    ``output`` receives every packet to transmit. ``feeder`` (if given) is
    called before each send opportunity so that a message-mode producer can
    top up the connection. ``on_complete`` fires once when every written
    byte has been acknowledged.
    """

    def __init__(self, sim: Simulator, conn: TcpConn, output: Callable[[Packet], None],
                 on_complete: Callable[[float], None] | None = None,
                 feeder: Callable[[], None] | None = None):
        self.sim = sim
        self.conn = conn
        self.output = output
        self.on_complete = on_complete
        self.feeder = feeder
        self.completed = False
        self.closed = False
        self._deadline: float | None = None

    def flush(self) -> None:
        if self.feeder is not None:
            self.feeder()
        self._emit(self.conn.maybe_send(self.sim.now))

    def write(self, nbytes: float) -> None:
        self.conn.write(nbytes)
        self.completed = False
        self.flush()

    def _emit(self, packets: list[Packet]) -> None:
        for p in packets:
            self.output(p)
        if self.conn.outstanding and self._deadline is None:
            self._arm(self.sim.now + self.conn.rto)

    def receive_ack(self, ack_seq: int) -> None:
        if self.closed:
            return
        conn = self.conn
        res = conn.on_ack(ack_seq, self.sim.now)
        for p in res.packets:
            self.output(p)
        if res.newly_acked:
            self._deadline = None
        elif res.fast_retransmit:
            # as in BSD, the retransmission restarts the timer
            self._arm(self.sim.now + conn.rto)
        self.flush()
        if res.newly_acked and not self.completed and conn.all_acked() and conn.app_end > 0:
            self.completed = True
            self._disarm()
            if self.on_complete is not None:
                self.on_complete(self.sim.now)

    def _arm(self, deadline: float) -> None:
        self._deadline = deadline
        ev = self.conn.retx_timer
        if ev is None or ev.cancelled:
            self.conn.retx_timer = self.sim.schedule(deadline, self._on_timer)
        elif ev.fire_time > deadline:
            ev.cancel()
            self.conn.retx_timer = self.sim.schedule(deadline, self._on_timer)
        # an earlier pending event re-checks the deadline when it fires

    def _disarm(self) -> None:
        self._deadline = None
        ev = self.conn.retx_timer
        if ev is not None:
            ev.cancel()
            self.conn.retx_timer = None

    def _on_timer(self) -> None:
        self.conn.retx_timer = None
        if self.closed or self._deadline is None:
            return
        now = self.sim.now
        if now < self._deadline:
            self.conn.retx_timer = self.sim.schedule(self._deadline, self._on_timer)
            return
        self._deadline = None
        packets = self.conn.on_timeout(now)
        self._emit(packets)
        self.flush()

    def close(self) -> None:
        self.closed = True
        self._disarm()


class TcpReceiver:
    """Cumulative-ACK receiver with out-of-order buffering.

    ``deliver(nbytes, data)`` is called for each segment as it becomes
    in-order; ``send_ack(ack_seq)`` once per arriving segment.
    """

    __slots__ = ("flow_key", "rcv_nxt", "deliver", "send_ack", "_ooo",
                 "segments_received", "duplicates", "bytes_delivered")

    def __init__(self, flow_key: FlowKey, deliver: Callable[[int, bytes | None], None] | None,
                 send_ack: Callable[[int], None]):
        self.flow_key = flow_key
        self.rcv_nxt = 0
        self.deliver = deliver
        self.send_ack = send_ack
        self._ooo: dict[int, tuple[int, bytes | None]] = {}
        self.segments_received = 0
        self.duplicates = 0
        self.bytes_delivered = 0

    def on_data(self, pkt: Packet) -> None:
        self.segments_received += 1
        seq = pkt.seq
        if seq == self.rcv_nxt:
            self._accept(pkt.payload_len, pkt.data)
            ooo = self._ooo
            while self.rcv_nxt in ooo:
                n, data = ooo.pop(self.rcv_nxt)
                self._accept(n, data)
        elif seq > self.rcv_nxt:
            if seq in self._ooo:
                self.duplicates += 1
            else:
                self._ooo[seq] = (pkt.payload_len, pkt.data)
        else:
            self.duplicates += 1
        self.send_ack(self.rcv_nxt)

    def _accept(self, n: int, data: bytes | None) -> None:
        self.rcv_nxt += n
        self.bytes_delivered += n
        if self.deliver is not None:
            self.deliver(n, data)
