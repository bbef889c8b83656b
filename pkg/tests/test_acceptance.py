"""End-to-end acceptance checks, numbered 1 to 12.

Each test records a one-line PASS/FAIL verdict that is printed in the
terminal summary. Heavy scenario runs are shared through module fixtures.
"""

import math
import random
import time

import pytest

from conftest import ACCEPTANCE
from trunksim.cli import report_csv
from trunksim.netmodel import FlowKey, Packet, header_image
from trunksim.scenarios import (Simulation, build_buffer_sizing, build_eight_sites,
                                build_trunk_fairness, build_web_vs_ftp)
from trunksim.trunk.codec import DELTA, Deframer, HeaderCompressor, HeaderDecompressor, frame
from trunksim.trunk.policy import drop_probability, exemption_threshold

FIG2_SEEDS = range(1, 5)
FIG3_OFF_SEEDS = range(1, 25)
FIG3_ON_SEEDS = range(1, 13)
FAIR_SEEDS = range(1, 5)
RUN_LIMIT = 60.0
WEB_LINK = 1_100_000


def verdict(n, ok, detail):
    ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[n])
    assert ok, ACCEPTANCE[n]


def run(cfg, seed):
    sim = Simulation(cfg, seed)
    for st in sim.sites.values():
        if st.trunk is not None:
            st.trunk.strict_p3 = True
    t0 = time.perf_counter()
    rep = sim.run()
    return rep, time.perf_counter() - t0


class Suite:
    def __init__(self, build, seeds):
        self.build = build
        self.reports, self.times = [], []
        for s in seeds:
            rep, dt = run(build(), s)
            self.reports.append(rep)
            self.times.append(dt)

    def delay(self, group):
        """Pooled mean and population std over every transfer of every seed."""
        stats = [r.delays[group] for r in self.reports if group in r.delays]
        n = sum(d.count for d in stats)
        mean = sum(d.mean * d.count for d in stats) / n
        second = sum((d.std ** 2 + d.mean ** 2) * d.count for d in stats) / n
        return mean, math.sqrt(max(second - mean * mean, 0.0))

    def throughput(self, group):
        return sum(r.throughput[group] for r in self.reports) / len(self.reports)

    def drop_rate(self, queue):
        arrivals = sum(r.queues[queue].arrivals for r in self.reports)
        return sum(r.queues[queue].drops for r in self.reports) / arrivals


@pytest.fixture(scope="module")
def fig2():
    return {v: Suite(lambda v=v: build_web_vs_ftp(v), FIG2_SEEDS) for v in "abc"}


@pytest.fixture(scope="module")
def fig3():
    return {"off": Suite(lambda: build_eight_sites(False), FIG3_OFF_SEEDS),
            "on": Suite(lambda: build_eight_sites(True), FIG3_ON_SEEDS)}


@pytest.fixture(scope="module")
def fairness():
    return Suite(build_trunk_fairness, FAIR_SEEDS)


@pytest.fixture(scope="module")
def sizing():
    return {h: run(build_buffer_sizing(h), 1)[0] for h in (1, 2, 3)}


def test_criterion_01_exemption_x_for_w10():
    t0 = time.perf_counter()
    x, k = exemption_threshold(10)
    dt = time.perf_counter() - t0
    verdict(1, x == 37 and dt < 1e-3, f"X={x} K={k} in {dt * 1e6:.0f} us")


def test_criterion_02_drop_probability_endpoints():
    bad = 0
    for cap in range(1, 129):
        for thr in range(1, cap + 1):
            for occ in range(cap + 1):
                p = drop_probability(occ, thr, cap)
                if occ == cap:
                    bad += p != 1.0
                elif occ <= thr:
                    bad += p != 0.0
                else:
                    bad += not 0.0 < p < 1.0
    verdict(2, bad == 0, f"{bad} bad cases over all capacities <= 128")


def _header_sequences(n, seed=2024):
    """Random flows of 2..9 headers: steady data mixed with ack/window moves, jumps and resizes."""
    rng = random.Random(seed)
    for i in range(n):
        key = FlowKey(rng.randrange(256), rng.randrange(256), rng.randrange(65536), 80)
        seq, ack, win, ip_id = (rng.getrandbits(32), rng.getrandbits(32),
                                rng.randrange(65536), rng.randrange(65536))
        size = 1460 if rng.random() < 0.8 else rng.randrange(0, 1461)
        out = []
        for _ in range(rng.randrange(2, 10)):
            kind = rng.random()
            steady = kind < 0.6
            if steady:
                pass
            elif kind < 0.7:
                ack = (ack + rng.randrange(-3000, 3000)) % 2 ** 32
                win = (win + rng.randrange(-300, 300)) % 65536
            elif kind < 0.8:
                seq = (seq + rng.randrange(-100_000, 100_000)) % 2 ** 32
            elif kind < 0.9:
                size = rng.randrange(0, 1461)
            else:
                ip_id = rng.randrange(65536)
            hdr = header_image(Packet(key, seq, size, ip_id=ip_id, ack=ack, window=win))
            out.append((hdr, steady and bool(out)))
            seq = (seq + size) % 2 ** 32
            ip_id = (ip_id + 1) % 65536
        yield i, out


def test_criterion_03_codec_round_trip_and_framing():
    tx, rx = HeaderCompressor(), HeaderDecompressor()
    mismatches = long_delta = steady_full = 0
    for i, seq in _header_sequences(100_000):
        for hdr, steady in seq:
            c = tx.compress(i, hdr)
            back, used = rx.decompress(c)
            mismatches += back != hdr or used != len(c)
            if c[0] == DELTA:
                long_delta += len(c) > 6
            elif steady:
                steady_full += 1
    split_errors = 0
    for n in range(1, 63):
        payload = bytes((7 * j + n) % 256 for j in range(n))
        wire = frame(payload)
        for cut in range(len(wire) + 1):
            d = Deframer()
            got = d.feed(wire[:cut]) + d.feed(wire[cut:])
            split_errors += got != [payload] or d.residual != b""
        d = Deframer()
        got = [p for b in wire for p in d.feed(bytes((b,)))]
        split_errors += got != [payload]
    ok = not (mismatches or long_delta or steady_full or split_errors)
    verdict(3, ok, f"1e5 sequences: {mismatches} mismatches, {long_delta} DELTA > 6 B, "
                   f"{steady_full} steady FULL; {split_errors} framing split errors")


def test_criterion_04_one_halving_fits_the_buffer(sizing):
    one, two, three = (sizing[h].trunks["S"] for h in (1, 2, 3))
    tails = [sizing[h].queues["trunk:S"].tail_drops for h in (1, 2, 3)]
    # the single halving loads the buffer right up to the half-capacity bound
    ok = tails[0] == 0 and one.peak_occupancy >= one.capacity // 2
    verdict(4, ok, f"capacity {one.capacity}; tail drops after 1/2/3 halvings {tails}; "
                   f"peak {one.peak_occupancy}/{two.peak_occupancy}/{three.peak_occupancy}")


def test_criterion_05_p3_never_violated(fig2, fig3):
    runs = [r for s in (*fig2.values(), *fig3.values()) for r in s.reports]
    v = sum(t.p3_violations for r in runs for t in r.trunks.values())
    prob = sum(q.prob_drops for r in runs for k, q in r.queues.items() if k.startswith("trunk:"))
    verdict(5, v == 0 and prob > 0, f"{v} violations across {len(runs)} runs "
                                    f"({prob} probabilistic drops checked)")


def test_criterion_06_ftp_starves_web(fig2):
    a, b = fig2["a"], fig2["b"]
    fair = WEB_LINK / 3
    tb = b.throughput("siteW_web")
    (_, sa), (_, sb) = a.delay("siteW_web"), b.delay("siteW_web")
    slow = max(a.times + b.times)
    ok = tb < 0.5 * fair and sb >= 5 * sa and slow < RUN_LIMIT
    verdict(6, ok, f"web {a.throughput('siteW_web') / 1e3:.0f} -> {tb / 1e3:.1f} KB/s "
                   f"(half fair share {fair / 2e3:.0f}); std {sa * 1e3:.1f} -> {sb * 1e3:.0f} ms "
                   f"({sb / sa:.0f}x); slowest run {slow:.1f} s")


def test_criterion_07_trunks_restore_web(fig2):
    b, c = fig2["b"], fig2["c"]
    tb, tc = b.throughput("siteW_web"), c.throughput("siteW_web")
    (mb, sb), (mc, sc) = b.delay("siteW_web"), c.delay("siteW_web")
    slow = max(c.times)
    ok = tc >= 1.5 * tb and mc < mb and sc < sb and slow < RUN_LIMIT
    verdict(7, ok, f"web {tb / 1e3:.1f} -> {tc / 1e3:.1f} KB/s ({tc / tb:.2f}x); "
                   f"mean {mb * 1e3:.0f} -> {mc * 1e3:.0f} ms; std {sb * 1e3:.0f} -> "
                   f"{sc * 1e3:.0f} ms; slowest run {slow:.1f} s")


def test_criterion_08_trunks_move_loss_off_the_core(fig3):
    off, on = fig3["off"], fig3["on"]
    d_off, d_on = off.drop_rate("link:bottleneck"), on.drop_rate("link:bottleneck")
    names = sorted(on.reports[0].trunks)
    rates = {n: on.drop_rate(f"trunk:{n}") for n in names}
    slow = max(off.times + on.times)
    ok = (d_off >= 0.05 and d_on <= 0.005 and sum(rates.values()) > 0
          and all(0.01 <= r <= 0.20 for r in rates.values()) and slow < RUN_LIMIT)
    verdict(8, ok, f"bottleneck drops {d_off:.2%} off, {d_on:.3%} on; trunk drops "
                   f"{min(rates.values()):.2%}..{max(rates.values()):.2%}; "
                   f"slowest run {slow:.1f} s")


def test_criterion_09_local_qos(fig3):
    off, on = fig3["off"], fig3["on"]
    sites = ("siteA", "siteB", "siteC")
    d_off = {s: off.delay(f"{s}_probe")[0] for s in sites}
    d_on = {s: on.delay(f"{s}_probe")[0] for s in sites}
    probes = [r.delays[f"{s}_probe"] for r in off.reports for s in sites
              if f"{s}_probe" in r.delays]
    baseline = sum(d.mean * d.count for d in probes) / sum(d.count for d in probes)
    agree = min(d_off.values()) >= 0.8 * max(d_off.values())
    ordered = d_on["siteB"] < d_on["siteC"] < d_on["siteA"]
    ok = agree and ordered and d_on["siteB"] <= 0.5 * baseline
    fmt = lambda d: "/".join(f"{d[s]:.2f}" for s in sites)
    verdict(9, ok, f"probe delay A/B/C off {fmt(d_off)} s (spread "
                   f"{min(d_off.values()) / max(d_off.values()):.2f}), on {fmt(d_on)} s; "
                   f"B/baseline {d_on['siteB'] / baseline:.2f}")


def test_criterion_10_trunks_share_fairly(fairness):
    shares = [t.link_share for r in fairness.reports for t in r.trunks.values()]
    above = [t.cwnd_above5_fraction for r in fairness.reports for t in r.trunks.values()]
    slow = max(fairness.times)
    ok = (all(0.18 <= s <= 0.32 for s in shares) and all(a >= 0.95 for a in above)
          and slow < RUN_LIMIT)
    verdict(10, ok, f"shares {min(shares):.3f}..{max(shares):.3f} over {len(shares)} "
                    f"trunk-runs; cwnd > 5 pkts {min(above):.1%} of the time at worst")


def test_criterion_11_ledgers_balance(fig2, fig3, fairness, sizing):
    reports = [r for s in (*fig2.values(), *fig3.values(), fairness) for r in s.reports]
    reports += list(sizing.values())
    bad = [r.scenario for r in reports
           if r.ledger["emitted"] != r.ledger["arrived"] + r.ledger["dropped"]
           + r.ledger["in_transit"]]
    # every report was produced after the per-queue and per-trunk checks passed
    verdict(11, not bad, f"{len(reports)} runs balanced" if not bad else f"unbalanced: {bad}")


def test_criterion_12_reruns_are_byte_identical(fig2, fig3, fairness, sizing):
    first = {r.scenario: r for s in (*fig2.values(), *fig3.values(), fairness)
             for r in s.reports[:1]}
    first.update({r.scenario: r for r in sizing.values()})
    builders = {**{f"fig2:{v}": (lambda v=v: build_web_vs_ftp(v)) for v in "abc"},
                "fig3:off": lambda: build_eight_sites(False),
                "fig3:on": lambda: build_eight_sites(True),
                "fairness:4x10": build_trunk_fairness,
                **{f"p1:{h}": (lambda h=h: build_buffer_sizing(h)) for h in (1, 2, 3)}}
    differ = [name for name, rep in first.items()
              if report_csv(run(builders[name](), rep.seed)[0]) != report_csv(rep)]
    verdict(12, not differ, f"{len(first)} scenarios rerun" if not differ
            else f"differ: {differ}")
