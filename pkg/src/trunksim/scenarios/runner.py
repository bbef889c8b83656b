"""Build a network from a :class:`ScenarioConfig`, run it, and measure it."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

from ..netmodel import FlowKey, InvariantError, Link, Network, Packet
from ..simkernel import RandomStream, Simulator
from ..tcpflow import MSS, TcpReceiver, TcpSender, open_connection
from ..trunk.receiver import TrunkReceiver
from ..trunk.transmitter import TrunkTransmitter
from .config import ScenarioConfig, SiteSpec
from .metrics import MetricsReport, QueueStats, TrunkStats, summarize_delays
from .sources import GreedyFtp, WebSession

USER_PORT_BASE = 10_000
TRUNK_PORT_BASE = 4_000


@dataclass
class SiteState:
    spec: SiteSpec
    node: int
    dst: int
    ack_delay: float
    trunk: TrunkTransmitter | None = None
    trunk_rx: TrunkReceiver | None = None
    trunk_tcp_rx: TcpReceiver | None = None
    next_port: int = USER_PORT_BASE
    sources: list = field(default_factory=list)
    ack_rng: RandomStream | None = None


class Simulation:
    """One instance of a scenario under one seed."""

    def __init__(self, cfg: ScenarioConfig, seed: int | None = None, trace: bool = False):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else int(seed)
        self.sim = Simulator(self.seed, trace=trace)
        net = self.net = Network(self.sim)
        for name in cfg.nodes():
            net.add_node(name)
        for spec in cfg.links:
            net.add_link(spec.name, spec.src, spec.dst, spec.bandwidth, spec.propagation,
                         spec.capacity)
        net.build_routes()
        net.packet_drop_hooks.append(self._link_drop)
        self.bottleneck: Link | None = net.links[cfg.bottleneck] if cfg.bottleneck else None
        if self.bottleneck is not None:
            self.bottleneck.flow_bytes = {}

        self.live: set[FlowKey] = set()
        self.user_emitted = 0
        self.user_arrived = 0
        self.user_dropped = 0
        self.group_bytes: dict[str, int] = {}
        self.delay_samples: dict[str, list[float]] = defaultdict(list)
        self.flows_opened = 0
        self._snap: dict[str, tuple] = {}
        self._cwnd: dict[str, list[int]] = {}

        self.sites: dict[str, SiteState] = {}
        for i, spec in enumerate(cfg.sites):
            node, dst = net.node(spec.node).id, net.node(spec.dst).id
            net.require_route(node, dst)
            net.nodes[dst].default_handler = self._late_arrival
            st = SiteState(spec, node, dst, net.path_delay(node, dst) if node != dst else 0.0)
            if cfg.ack_jitter > 0:
                st.ack_rng = self.sim.stream(f"ack:{spec.name}")
            self.sites[spec.name] = st
            if spec.name in cfg.trunks:
                self._build_trunk(st, i)
            for kind, count in (("ftp", spec.ftp), ("web", spec.web), ("probe", spec.probes)):
                if count:
                    self.group_bytes[f"{spec.name}_{kind}"] = 0
            for j in range(spec.ftp):
                st.sources.append(GreedyFtp(self, spec.name, j, spec.ftp_window))
            for j in range(spec.web):
                st.sources.append(WebSession(self, spec.name, j, spec.page_size, "web"))
            for j in range(spec.probes):
                st.sources.append(WebSession(self, spec.name, j, spec.page_size, "probe"))

    # trunk plumbing

    def _build_trunk(self, st: SiteState, index: int) -> None:
        net, sim = self.net, self.sim
        port = TRUNK_PORT_BASE + index
        key = FlowKey(st.node, st.dst, port, port)
        name = st.spec.name
        tx = TrunkTransmitter(sim, self.cfg.trunks[name], key,
                              output=partial(net.send, st.node), rng=sim.stream(f"trunk:{name}"),
                              name=name)
        tx.drop_hooks.append(self._trunk_drop)
        rx = TrunkReceiver(deliver=partial(net.receive, st.dst), name=name)
        tcp_rx = TcpReceiver(key, deliver=lambda n, data: rx.receive(data, sim.now),
                             send_ack=partial(self._ack, st, tx.sender, [0.0]))
        net.nodes[st.dst].handlers[key] = tcp_rx.on_data
        st.trunk, st.trunk_rx, st.trunk_tcp_rx = tx, rx, tcp_rx
        self._cwnd[name] = [0, 0]

    # user flows

    def open_flow(self, site: str, group: str, nbytes: float,
                  on_complete: Callable[[float], None] | None = None,
                  max_window: int | None = None) -> TcpSender:
        st = self.sites[site]
        sim, net = self.sim, self.net
        port = self._take_port(st)
        key = FlowKey(st.node, st.dst, port, 80)
        conn = open_connection(key, MSS, registry=self.live,
                               max_window=None if max_window is None else max_window * MSS)
        conn.write(nbytes)
        sender = TcpSender(sim, conn, output=partial(self._ingress, st))
        receiver = TcpReceiver(key, deliver=partial(self._delivered, group),
                               send_ack=partial(self._ack, st, sender, [0.0]))

        def handle(pkt: Packet) -> None:
            self.user_arrived += 1
            receiver.on_data(pkt)

        net.nodes[st.dst].handlers[key] = handle
        if on_complete is not None:
            def done(now: float) -> None:
                sender.close()
                net.nodes[st.dst].handlers.pop(key, None)
                self.live.discard(key)
                on_complete(now)
            sender.on_complete = done
        self.flows_opened += 1
        sender.flush()
        return sender

    def _take_port(self, st: SiteState) -> int:
        for _ in range(0xFFFF):
            port = st.next_port
            st.next_port = port + 1 if port < 0xFFFF else USER_PORT_BASE
            if FlowKey(st.node, st.dst, port, 80) not in self.live:
                return port
        raise InvariantError(f"site {st.spec.name}: out of ports")

    def _ingress(self, st: SiteState, pkt: Packet) -> None:
        self.user_emitted += 1
        if st.trunk is not None:
            st.trunk.admit(pkt)
        else:
            self.net.send(st.node, pkt)

    def _ack(self, st: SiteState, sender: TcpSender, last: list, ack_seq: int) -> None:
        at = self.sim.now + st.ack_delay
        if st.ack_rng is not None:
            # jitter breaks drop-tail phase locking; ACKs of one connection never reorder
            at = max(at + self.cfg.ack_jitter * st.ack_rng.next_uniform(), last[0])
            last[0] = at
        self.sim.schedule(at, sender.receive_ack, ack_seq)

    def _delivered(self, group: str, nbytes: int, data) -> None:
        if self.sim.now >= self.cfg.warmup:
            self.group_bytes[group] += nbytes

    def record_delay(self, group: str, start: float, end: float) -> None:
        if end >= self.cfg.warmup:
            self.delay_samples[group].append(end - start)

    def _link_drop(self, pkt: Packet) -> None:
        if pkt.header_layers == 1:
            self.user_dropped += 1

    def _trunk_drop(self, pkt: Packet, verdict) -> None:
        self.user_dropped += 1

    def _late_arrival(self, pkt: Packet) -> None:
        if pkt.header_layers == 1:
            self.user_arrived += 1

    # measurement

    def _snapshot(self) -> None:
        for name, link in self.net.links.items():
            self._snap[f"link:{name}"] = (link.arrivals, link.drops, 0, 0)
        for name, st in self.sites.items():
            tx = st.trunk
            if tx is not None:
                self._snap[f"trunk:{name}"] = (tx.arrivals, tx.prob_drops + tx.tail_drops,
                                               tx.prob_drops, tx.tail_drops)
        if self.bottleneck is not None:
            self._snap["flow_bytes"] = tuple(self.bottleneck.flow_bytes.items())

    def _sample_cwnd(self) -> None:
        for name, st in self.sites.items():
            if st.trunk is not None:
                c = self._cwnd[name]
                c[0] += 1
                if st.trunk.conn.cwnd > 5 * st.trunk.conn.mss:
                    c[1] += 1
        nxt = self.sim.now + self.cfg.sample_interval
        if nxt <= self.cfg.duration:
            self.sim.schedule(nxt, self._sample_cwnd)

    def _halve(self) -> None:
        for st in self.sites.values():
            if st.trunk is not None:
                st.trunk.conn.halve_window()

    def run(self) -> MetricsReport:
        cfg, sim = self.cfg, self.sim
        sim.schedule(cfg.warmup, self._snapshot)
        if any(st.trunk is not None for st in self.sites.values()):
            sim.schedule(cfg.warmup, self._sample_cwnd)
        for t in cfg.halvings:
            sim.schedule(t, self._halve)
        for st in self.sites.values():
            for src in st.sources:
                src.start(st.spec.start_jitter)
        try:
            sim.run(cfg.duration)
            return collect_metrics(self)
        except InvariantError as e:
            raise InvariantError(f"{e} [t={sim.now:.6f} after {sim.events_fired} events, "
                                 f"seed {self.seed}]") from e

    def user_in_transit(self) -> int:
        """User packets inside the network, counted from queue and event state."""
        n = 0
        for link in self.net.links.values():
            n += sum(1 for p in link.queue if p.header_layers == 1)
        arrive = Link._arrive
        for _, _, ev in self.sim._heap:
            if (not ev.cancelled and getattr(ev.action, "__func__", None) is arrive
                    and ev.args[0].header_layers == 1):
                n += 1
        for st in self.sites.values():
            if st.trunk is not None:
                n += len(st.trunk.buffer)
                rcv_nxt = st.trunk_tcp_rx.rcv_nxt
                n += sum(1 for seq, _ in st.trunk.conn.unacked_messages() if seq >= rcv_nxt)
        return n

    def check_ledgers(self) -> dict[str, int]:
        self.net.check_ledgers()
        for st in self.sites.values():
            if st.trunk is not None:
                st.trunk.check()
        in_transit = self.user_in_transit()
        ledger = {"emitted": self.user_emitted, "arrived": self.user_arrived,
                  "dropped": self.user_dropped, "in_transit": in_transit}
        if self.user_emitted != self.user_arrived + self.user_dropped + in_transit:
            raise InvariantError(f"user packet ledger unbalanced: {ledger}")
        return ledger


def collect_metrics(run: Simulation) -> MetricsReport:
    """Summarize a finished run; raises :class:`InvariantError` if any ledger is off."""
    cfg = run.cfg
    ledger = run.check_ledgers()
    window = cfg.duration - cfg.warmup
    rep = MetricsReport(cfg.name, run.seed, window, ledger=ledger)
    for g, b in run.group_bytes.items():
        rep.throughput[g] = b / window
    snap = run._snap
    for name, link in run.net.links.items():
        a0, d0, _, _ = snap.get(f"link:{name}", (0, 0, 0, 0))
        rep.queues[f"link:{name}"] = QueueStats(link.arrivals - a0, link.drops - d0)
    for name, st in run.sites.items():
        tx = st.trunk
        if tx is None:
            continue
        a0, d0, p0, t0 = snap.get(f"trunk:{name}", (0, 0, 0, 0))
        rep.queues[f"trunk:{name}"] = QueueStats(
            tx.arrivals - a0, tx.prob_drops + tx.tail_drops - d0,
            tx.prob_drops - p0, tx.tail_drops - t0)
        ts = TrunkStats(p3_violations=tx.p3_violations, capacity=tx.capacity,
                        peak_occupancy=tx.peak_occupancy)
        ts.cwnd_samples, ts.cwnd_above5 = run._cwnd[name]
        if run.bottleneck is not None:
            before = dict(snap.get("flow_bytes", ()))
            key = tx.conn.flow_key
            sent = run.bottleneck.flow_bytes.get(key, 0) - before.get(key, 0)
            ts.link_share = sent / (run.bottleneck.bandwidth * window)
        rep.trunks[name] = ts
    for g in sorted(run.delay_samples):
        rep.delays[g] = summarize_delays(run.delay_samples[g])
    return rep


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> MetricsReport:
    return Simulation(cfg, seed).run()
