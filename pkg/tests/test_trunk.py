import pytest
from hypothesis import given, settings, strategies as st

from trunksim.netmodel import FlowKey, InvariantError, Packet
from trunksim.simkernel import Simulator
from trunksim.tcpflow import MSS, TcpReceiver
from trunksim.trunk import receiver as trunk_rx
from trunksim.trunk.policy import TrunkConfig
from trunksim.trunk.transmitter import (TRUNK_MSS, AdmitVerdict, FlowAccount, TrunkTransmitter,
                                        active_flow_count, admit, pump)

TRUNK_KEY = FlowKey(0, 1, 4000, 4000)
CFG = TrunkConfig(rtt_up=0.1, trunk_bw=150_000, pkt_size=1500)  # capacity 10, threshold 5


class FixedDraw:
    def __init__(self, u):
        self.u = u
        self.draws = 0

    def next_uniform(self):
        self.draws += 1
        return self.u


def user(flow, seq=0, n=MSS):
    return Packet(FlowKey(0, 1, 10000 + flow, 80), seq, n, ip_id=seq // MSS + 1)


def make(u=0.0, cfg=CFG):
    sim = Simulator()
    out = []
    tx = TrunkTransmitter(sim, cfg, TRUNK_KEY, output=out.append, rng=FixedDraw(u))
    return sim, tx, out


def fill(tx, n, flow=99):
    """Admit ``n`` filler packets; the first leaves at once, the rest queue."""
    u, tx.rng.u = tx.rng.u, 1.0
    for i in range(n):
        assert tx.admit(user(flow, i * MSS)) is AdmitVerdict.ENQUEUED
    tx.rng.u = u


def test_capacity_and_threshold():
    _, tx, _ = make()
    assert (tx.capacity, tx.threshold) == (10, 5)


def test_below_threshold_always_enqueued():
    _, tx, _ = make(u=0.0)
    fill(tx, 4)
    assert admit(tx, user(1)) is AdmitVerdict.ENQUEUED
    assert tx.rng.draws == 0


def test_full_buffer_drops_even_exempt_flow():
    _, tx, _ = make(u=0.99)
    fill(tx, 11)
    assert tx.occupancy == tx.capacity
    acct_key = user(1).flow_key
    tx.conn.cwnd = 10 * tx.conn.mss
    assert admit(tx, user(1)) is AdmitVerdict.DROPPED_TAIL
    assert tx.accounts[acct_key].exempt  # exempt, dropped anyway
    assert tx.accounts[acct_key].forwarded_since_drop == 0
    tx.check()


def test_exempt_flow_passes_above_threshold():
    _, tx, _ = make(u=0.0)
    fill(tx, 9)  # 8 buffered: p = 3/5
    key = user(1).flow_key
    tx.admit(user(1))  # creates the account (exempt: fresh flow, K > 0)
    acct = tx.accounts[key]
    acct.forwarded_since_drop = 5
    # one active flow besides the filler: W = 20, N = 2 gives w = 10, K = 18
    tx.conn.cwnd = 20 * tx.conn.mss
    assert admit(tx, user(1, MSS)) is AdmitVerdict.ENQUEUED
    assert acct.exemption_k == 18 and acct.exempt


def test_probabilistic_drop_resets_counter_and_arms_k():
    _, tx, _ = make(u=0.0)
    fill(tx, 9)
    key = user(1).flow_key
    tx.conn.cwnd = 2 * tx.conn.mss  # w = 1 -> K = 0: nobody exempt
    assert admit(tx, user(1)) is AdmitVerdict.DROPPED_PROBABILISTIC
    acct = tx.accounts[key]
    assert acct.forwarded_since_drop == 0 and acct.prob_drops == 1
    tx.check()


def test_tail_drop_keeps_counter():
    _, tx, _ = make(u=0.99)
    fill(tx, 11)
    key = user(1).flow_key
    tx.accounts.setdefault(key, FlowAccount(key))
    tx.accounts[key].forwarded_since_drop = 7
    assert tx.admit(user(1)) is AdmitVerdict.DROPPED_TAIL
    assert tx.accounts[key].forwarded_since_drop == 7


def test_pump_empty_buffer_emits_nothing():
    _, tx, _ = make()
    assert pump(tx) == []


def test_segment_layout_with_established_context():
    _, tx, out = make()
    tx.admit(user(1, 0))
    tx.conn.on_ack(tx.conn.snd_max)  # let the trunk window open
    tx.admit(user(1, MSS))
    first, second = out[0], out[-1]
    assert first.payload_len == 2 + 42 + MSS
    assert second.payload_len == 2 + 4 + MSS
    assert second.size_total == second.payload_len + 40
    assert second.size_total <= MSS + 6 + 2 + 40
    assert second.header_layers == 2


def test_full_trunk_window_holds_packets_back():
    _, tx, out = make()
    fill(tx, 3)
    assert len(out) == 1 and tx.occupancy == 2
    assert pump(tx) == []


def test_active_flow_count():
    sim, tx, _ = make()
    assert active_flow_count(tx, 0.0) == 0
    for f in range(3):
        tx.admit(user(f))
    assert active_flow_count(tx) >= 3
    # flows 1 and 2 are still buffered; flow 0 went straight into the trunk
    assert tx.active_flow_count(10.0) == 2


def test_trunk_mss_fits_a_full_header_packet():
    assert TRUNK_MSS == 2 + 42 + 1460 == 1504


def _wire(sim, tx, lose=frozenset(), delay=0.005):
    """Connect a transmitter to a receiver over a delay line; returns the restored list."""
    restored = []
    rx = trunk_rx.TrunkReceiver(deliver=restored.append)
    count = [0]
    tcp_rx = TcpReceiver(TRUNK_KEY, deliver=lambda n, data: rx.receive(data),
                         send_ack=lambda a: sim.schedule_in(delay, tx.sender.receive_ack, a))

    def send(p):
        count[0] += 1
        if count[0] not in lose:
            sim.schedule_in(delay, tcp_rx.on_data, p)

    tx.sender.output = send
    return restored, rx


def _interleaved(n_flows, total):
    seqs = [0] * n_flows
    pkts = []
    for i in range(total):
        f = (i * 7 + i // 3) % n_flows
        size = MSS if i % 5 else 512
        pkts.append(Packet(FlowKey(0, 1, 20000 + f, 80), seqs[f], size, ip_id=seqs[f] % 65536,
                           data=bytes([i % 256]) * size))
        seqs[f] += size
    return pkts


@pytest.mark.parametrize("lose", [frozenset(), frozenset({4}), frozenset({2, 3, 9, 30})])
def test_receiver_restores_admission_order(lose):
    sim = Simulator()
    big = TrunkConfig(rtt_up=1.0, trunk_bw=1_500_000)
    tx = TrunkTransmitter(sim, big, TRUNK_KEY, output=lambda p: None, rng=FixedDraw(0.0))
    restored, rx = _wire(sim, tx, lose)
    pkts = _interleaved(5, 100)
    for i, p in enumerate(pkts):
        sim.schedule(i * 0.001, tx.admit, p)
    sim.run(60)
    assert tx.forwarded == 100
    assert [(p.flow_key, p.seq, p.payload_len) for p in restored] == \
        [(p.flow_key, p.seq, p.payload_len) for p in pkts]
    assert [p.wire_bytes() for p in restored] == [p.wire_bytes() for p in pkts]
    assert rx.deframer.residual == b""


def test_trunk_receive_function():
    sim, tx, _ = make()
    p = user(3)
    restored = trunk_rx.trunk_receive(trunk_rx.TrunkReceiver(), tx.encapsulate(p))
    assert restored[0].wire_bytes() == p.wire_bytes()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.floats(0, 1), st.booleans()),
                min_size=1, max_size=300),
       st.integers(1, 40))
def test_accounting_identity_and_p3(events, cwnd_pkts):
    sim = Simulator(3)
    cfg = TrunkConfig(rtt_up=0.1, trunk_bw=300_000, drop_threshold_fraction=0.3)
    tx = TrunkTransmitter(sim, cfg, TRUNK_KEY, output=lambda p: None)
    tx.strict_p3 = True
    seqs = [0] * 8
    for flow, u, ack in events:
        tx.conn.cwnd = max(tx.conn.cwnd, cwnd_pkts * tx.conn.mss)
        tx.admit(Packet(FlowKey(0, 1, 30000 + flow, 80), seqs[flow], MSS))
        seqs[flow] += MSS
        if ack and tx.conn.outstanding and u < 0.5:
            tx.sender.receive_ack(tx.conn.snd_una + len(tx.conn.unacked_messages()[0][1]))
        tx.check()
        for a in tx.accounts.values():
            assert a.forwarded_since_drop >= 0 and a.exemption_k >= 0
    assert tx.p3_violations == 0
    assert tx.occupancy <= tx.capacity


def test_strict_p3_raises_on_violation(monkeypatch):
    _, tx, _ = make(u=0.0)
    tx.strict_p3 = True
    fill(tx, 9)
    tx.conn.cwnd = 2 * tx.conn.mss
    assert tx.admit(user(1)) is AdmitVerdict.DROPPED_PROBABILISTIC
    tx.accounts[user(1).flow_key].k_at_drop = 5
    # disable the exemption so the second drop lands inside the protected span
    monkeypatch.setattr(FlowAccount, "exempt", property(lambda self: False))
    with pytest.raises(InvariantError):
        tx.admit(user(1, MSS))
