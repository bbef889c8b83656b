"""Topology primitives: flow keys, packets, drop-tail links and static routing."""

from __future__ import annotations

import enum
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .simkernel import Simulator

HEADER_BYTES = 40  # one IPv4 + TCP header pair, no options
TCP = 6
UDP = 17


class ConfigError(ValueError):
    """Invalid topology or scenario configuration."""


class InvariantError(AssertionError):
    """A simulator bookkeeping invariant was violated."""


@dataclass(frozen=True, slots=True)
class FlowKey:
    src_node: int
    dst_node: int
    src_port: int
    dst_port: int
    proto: int = TCP

    def __post_init__(self):
        if not (0 <= self.src_port <= 0xFFFF and 0 <= self.dst_port <= 0xFFFF):
            raise ConfigError(f"port out of range in {self}")
        if self.proto not in (TCP, UDP):
            raise ConfigError(f"unsupported protocol {self.proto}")

    def __str__(self) -> str:
        p = "tcp" if self.proto == TCP else "udp"
        return f"{p}:{self.src_node}.{self.src_port}->{self.dst_node}.{self.dst_port}"


class Packet:
    """A simulated datagram.

    ``size_total`` is what links charge for. A bare user packet has one header
    layer; a trunk segment carrying a framed user packet in ``data`` has two.
    """

    __slots__ = ("flow_key", "seq", "payload_len", "size_total", "header_layers",
                 "created_at", "ip_id", "ack", "window", "data", "stamps")

    def __init__(self, flow_key: FlowKey, seq: int, payload_len: int, *,
                 size_total: int | None = None, header_layers: int = 1,
                 created_at: float = 0.0, ip_id: int = 0, ack: int = 0,
                 window: int = 0xFFFF, data: bytes | None = None):
        self.flow_key = flow_key
        self.seq = seq
        self.payload_len = payload_len
        self.size_total = payload_len + HEADER_BYTES if size_total is None else size_total
        self.header_layers = header_layers
        self.created_at = created_at
        self.ip_id = ip_id
        self.ack = ack
        self.window = window
        self.data = data
        self.stamps: list[tuple[int, float]] | None = None

    def header(self) -> bytes:
        return header_image(self)

    def wire_bytes(self) -> bytes:
        """Header image followed by payload bytes (zeros for synthetic data)."""
        if self.data is not None:
            return header_image(self) + self.data
        return header_image(self) + zero_payload(self.payload_len)

    def __repr__(self) -> str:
        return (f"Packet({self.flow_key}, seq={self.seq}, len={self.payload_len}, "
                f"size={self.size_total}, layers={self.header_layers})")


_HDR = struct.Struct("!BBHHHBBHII HHIIBBHHH")
_ZEROS: dict[int, bytes] = {}


def zero_payload(n: int) -> bytes:
    b = _ZEROS.get(n)
    if b is None:
        b = _ZEROS[n] = bytes(n)
    return b


def node_address(node_id: int) -> int:
    return 0x0A000000 | node_id


def address_node(addr: int) -> int:
    return addr & 0x00FFFFFF


def header_image(pkt: Packet) -> bytes:
    """Serialize the packet's IPv4 + TCP header (40 bytes, checksums zero)."""
    k = pkt.flow_key
    return _HDR.pack(
        0x45, 0, (HEADER_BYTES + pkt.payload_len) & 0xFFFF, pkt.ip_id & 0xFFFF, 0,
        64, k.proto, 0, node_address(k.src_node), node_address(k.dst_node),
        k.src_port, k.dst_port, pkt.seq & 0xFFFFFFFF, pkt.ack & 0xFFFFFFFF,
        0x50, 0x10, pkt.window & 0xFFFF, 0, 0,
    )


def packet_from_header(header: bytes, payload: bytes, created_at: float = 0.0) -> Packet:
    """Inverse of :func:`header_image` plus payload."""
    (_, _, total, ip_id, _, _, proto, _, src, dst,
     sport, dport, seq, ack, _, _, window, _, _) = _HDR.unpack(header)
    key = FlowKey(address_node(src), address_node(dst), sport, dport, proto)
    if total - HEADER_BYTES != len(payload):
        raise InvariantError(f"header length {total} disagrees with payload {len(payload)}")
    return Packet(key, seq, len(payload), created_at=created_at, ip_id=ip_id,
                  ack=ack, window=window, data=bytes(payload))


class LinkVerdict(enum.Enum):
    ACCEPTED = "accepted"
    TAIL_DROPPED = "tail_dropped"


class Link:
    """Point-to-point store-and-forward link with a drop-tail FIFO.

    ``queue_capacity`` counts packets and includes the one being serialized.
    """

    __slots__ = ("name", "src", "dst", "bandwidth", "propagation", "queue_capacity",
                 "queue", "busy", "arrivals", "departures", "drops", "in_propagation",
                 "bytes_departed", "flow_bytes", "sim", "deliver", "on_drop")

    def __init__(self, sim: Simulator, name: str, src: int, dst: int, bandwidth: float,
                 propagation: float, queue_capacity: int):
        if bandwidth <= 0:
            raise ConfigError(f"link {name}: bandwidth must be positive, got {bandwidth}")
        if propagation < 0:
            raise ConfigError(f"link {name}: propagation must be non-negative")
        if queue_capacity < 1:
            raise ConfigError(f"link {name}: queue capacity must be at least 1 packet")
        self.sim = sim
        self.name = name
        self.src = src
        self.dst = dst
        self.bandwidth = float(bandwidth)
        self.propagation = float(propagation)
        self.queue_capacity = int(queue_capacity)
        self.queue: deque[Packet] = deque()
        self.busy = False
        self.arrivals = 0
        self.departures = 0
        self.drops = 0
        self.in_propagation = 0
        self.bytes_departed = 0
        self.flow_bytes: dict[FlowKey, int] | None = None
        self.deliver: Callable[[int, Packet], None] | None = None
        self.on_drop: Callable[[Packet], None] | None = None

    def service_time(self, pkt: Packet) -> float:
        return pkt.size_total / self.bandwidth

    def enqueue(self, pkt: Packet) -> LinkVerdict:
        self.arrivals += 1
        if len(self.queue) >= self.queue_capacity:
            self.drops += 1
            if self.on_drop is not None:
                self.on_drop(pkt)
            return LinkVerdict.TAIL_DROPPED
        self.queue.append(pkt)
        if not self.busy:
            self.busy = True
            self.sim.schedule(self.sim.now + pkt.size_total / self.bandwidth, self._tx_done)
        return LinkVerdict.ACCEPTED

    def _tx_done(self) -> None:
        pkt = self.queue.popleft()
        self.departures += 1
        self.bytes_departed += pkt.size_total
        if self.flow_bytes is not None:
            k = pkt.flow_key
            self.flow_bytes[k] = self.flow_bytes.get(k, 0) + pkt.size_total
        self.in_propagation += 1
        sim = self.sim
        sim.schedule(sim.now + self.propagation, self._arrive, pkt)
        if self.queue:
            sim.schedule(sim.now + self.queue[0].size_total / self.bandwidth, self._tx_done)
        else:
            self.busy = False

    def _arrive(self, pkt: Packet) -> None:
        self.in_propagation -= 1
        if self.deliver is not None:
            self.deliver(self.dst, pkt)

    def check(self) -> None:
        if len(self.queue) > self.queue_capacity:
            raise InvariantError(f"link {self.name}: queue over capacity")
        if self.arrivals != self.departures + self.drops + len(self.queue):
            raise InvariantError(
                f"link {self.name}: arrivals {self.arrivals} != departures {self.departures}"
                f" + drops {self.drops} + queued {len(self.queue)}")


def link_enqueue(link: Link, pkt: Packet) -> LinkVerdict:
    return link.enqueue(pkt)


def link_service_time(link: Link, pkt: Packet) -> float:
    return link.service_time(pkt)


@dataclass
class Node:
    id: int
    name: str
    handlers: dict[FlowKey, Callable[[Packet], None]] = field(default_factory=dict)
    default_handler: Callable[[Packet], None] | None = None


class Network:
    """Nodes, directed links and static shortest-hop routes."""

    def __init__(self, sim: Simulator):
        self.sim = sim
        self.nodes: list[Node] = []
        self.by_name: dict[str, Node] = {}
        self.links: dict[str, Link] = {}
        self._out: dict[int, list[Link]] = {}
        self._routes: dict[tuple[int, int], Link] = {}
        self.record_stamps = False
        self.unroutable_drops = 0
        self.packet_drop_hooks: list[Callable[[Packet], None]] = []

    def add_node(self, name: str) -> Node:
        if name in self.by_name:
            raise ConfigError(f"duplicate node {name!r}")
        node = Node(len(self.nodes), name)
        self.nodes.append(node)
        self.by_name[name] = node
        self._out[node.id] = []
        return node

    def node(self, name: str) -> Node:
        try:
            return self.by_name[name]
        except KeyError:
            raise ConfigError(f"unknown node {name!r}") from None

    def add_link(self, name: str, src: str, dst: str, bandwidth: float,
                 propagation: float, queue_capacity: int) -> Link:
        if name in self.links:
            raise ConfigError(f"duplicate link {name!r}")
        a, b = self.node(src), self.node(dst)
        link = Link(self.sim, name, a.id, b.id, bandwidth, propagation, queue_capacity)
        link.deliver = self.receive
        link.on_drop = self._dropped
        self.links[name] = link
        self._out[a.id].append(link)
        self._routes.clear()
        return link

    def _dropped(self, pkt: Packet) -> None:
        for hook in self.packet_drop_hooks:
            hook(pkt)

    def build_routes(self) -> None:
        """Breadth-first next hops from every node; ties go to the first link added."""
        self._routes.clear()
        for origin in self.nodes:
            first_hop: dict[int, Link] = {}
            frontier = deque([origin.id])
            seen = {origin.id}
            while frontier:
                n = frontier.popleft()
                for link in self._out[n]:
                    if link.dst in seen:
                        continue
                    seen.add(link.dst)
                    first_hop[link.dst] = first_hop.get(n, link) if n != origin.id else link
                    frontier.append(link.dst)
            for dst, link in first_hop.items():
                self._routes[(origin.id, dst)] = link

    def require_route(self, src: int, dst: int) -> None:
        if src != dst and (src, dst) not in self._routes:
            raise ConfigError(
                f"no route from {self.nodes[src].name!r} to {self.nodes[dst].name!r}")

    def forward(self, node: int, pkt: Packet) -> Link:
        try:
            return self._routes[(node, pkt.flow_key.dst_node)]
        except KeyError:
            raise ConfigError(
                f"unreachable destination {pkt.flow_key.dst_node} from node {node}") from None

    def path(self, src: int, dst: int) -> list[Link]:
        hops = []
        n = src
        while n != dst:
            link = self._routes[(n, dst)]
            hops.append(link)
            n = link.dst
        return hops

    def path_delay(self, src: int, dst: int) -> float:
        """One-way propagation delay along the route."""
        return sum(link.propagation for link in self.path(src, dst))

    def send(self, node: int, pkt: Packet) -> LinkVerdict | None:
        if pkt.flow_key.dst_node == node:
            self.receive(node, pkt)
            return None
        return self._routes[(node, pkt.flow_key.dst_node)].enqueue(pkt)

    def receive(self, node: int, pkt: Packet) -> None:
        if self.record_stamps:
            if pkt.stamps is None:
                pkt.stamps = []
            pkt.stamps.append((node, self.sim.now))
        if pkt.flow_key.dst_node != node:
            self.send(node, pkt)
            return
        n = self.nodes[node]
        handler = n.handlers.get(pkt.flow_key, n.default_handler)
        if handler is None:
            self.unroutable_drops += 1
            return
        handler(pkt)

    def check_ledgers(self) -> None:
        for link in self.links.values():
            link.check()


def forward(network: Network, node: int, pkt: Packet) -> Link:
    return network.forward(node, pkt)
