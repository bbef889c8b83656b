"""Ready-made scenarios: web vs. ftp (three variants), eight sites, and micro-benchmarks."""

from __future__ import annotations

from ..trunk.policy import TrunkConfig, trunk_buffer_capacity
from .config import LinkSpec, ScenarioConfig, SiteSpec

KB = 1000
PAGE = 8192
ACCESS_DELAY = 0.005
BOTTLENECK_DELAY = 0.005
ACCESS_QUEUE = 1000
ACK_JITTER_FRACTION = 0.1  # of the base round trip
RTT_UP = 0.1

WEB_LINK_BW = 1100 * KB
WEB_QUEUE = 64
EIGHT_SITE_BW = 1_250_000  # 10 Mbps
EIGHT_SITE_QUEUE = 130
# 25 ms per hop puts the eight-site base round trip at RTT_UP
EIGHT_SITE_DELAY = 0.025
EIGHT_SITE_THRESHOLD = 0.2
TOTAL_FTP = 280


def _jitter(ack_jitter: float | None, access_delay: float, bottleneck_delay: float) -> float:
    if ack_jitter is not None:
        return ack_jitter
    return ACK_JITTER_FRACTION * 2 * (access_delay + bottleneck_delay)


def _star(sites: list[str], bw: float, queue: int, access_bw: float,
          access_delay: float = ACCESS_DELAY, bottleneck_delay: float = BOTTLENECK_DELAY,
          access_queue: int = ACCESS_QUEUE) -> tuple[LinkSpec, ...]:
    links = [LinkSpec(f"access_{s}", s, "router", access_bw, access_delay, access_queue)
             for s in sites]
    links.append(LinkSpec("bottleneck", "router", "server", bw, bottleneck_delay, queue))
    return tuple(links)


def build_web_vs_ftp(variant: str, *, duration: float = 60.0, warmup: float = 10.0,
                     seed: int = 1, access_delay: float = ACCESS_DELAY,
                     bottleneck_delay: float = BOTTLENECK_DELAY,
                     ack_jitter: float | None = None) -> ScenarioConfig:
    """Ten closed-loop 8 KB web sessions sharing a 1100 KB/s port.

    ``a``: web alone. ``b``: plus two sites of 20 greedy ftp flows each.
    ``c``: load of ``b`` with one trunk per site.
    """
    variant = variant.lower()
    if variant not in ("a", "b", "c"):
        raise ValueError(f"variant must be a, b or c, got {variant!r}")
    site_names = ["siteW", "siteF1", "siteF2"]
    sites = [SiteSpec("siteW", "siteW", "server", web=10, page_size=PAGE)]
    if variant != "a":
        sites += [SiteSpec(n, n, "server", ftp=20) for n in ("siteF1", "siteF2")]
    trunks = {}
    if variant == "c":
        trunks = {s.name: TrunkConfig(rtt_up=RTT_UP, trunk_bw=WEB_LINK_BW) for s in sites}
    return ScenarioConfig(
        name=f"fig2:{variant}",
        links=_star(site_names, WEB_LINK_BW, WEB_QUEUE, 2 * WEB_LINK_BW,
                    access_delay, bottleneck_delay),
        sites=tuple(sites), trunks=trunks, duration=duration, warmup=warmup,
        seed=seed, bottleneck="bottleneck",
        ack_jitter=_jitter(ack_jitter, access_delay, bottleneck_delay))


def eight_site_loads() -> dict[str, int]:
    """Greedy ftp flows per site; the five unnamed sites split what A, B and C leave."""
    loads = {"siteA": 30, "siteB": 3, "siteC": 0}
    rest = [f"site{c}" for c in "DEFGH"]
    remaining = TOTAL_FTP - 30 - 3 - 30  # site C's 30 short sessions count toward the 280
    base, extra = divmod(remaining, len(rest))
    for i, s in enumerate(rest):
        loads[s] = base + (1 if i < extra else 0)
    return loads


def build_eight_sites(trunking: bool, *, duration: float = 60.0, warmup: float = 10.0,
                      seed: int = 1, access_delay: float = EIGHT_SITE_DELAY,
                      bottleneck_delay: float = EIGHT_SITE_DELAY,
                      drop_threshold_fraction: float = EIGHT_SITE_THRESHOLD,
                      ack_jitter: float | None = None) -> ScenarioConfig:
    """Eight user sites merged onto a 10 Mbps, 130-packet server link."""
    loads = eight_site_loads()
    names = list(loads)
    sites = []
    for n in names:
        web = 30 if n == "siteC" else 0
        sites.append(SiteSpec(n, n, "server", ftp=loads[n], web=web, probes=1, page_size=PAGE))
    trunks = {}
    if trunking:
        trunks = {n: TrunkConfig(rtt_up=RTT_UP, trunk_bw=EIGHT_SITE_BW,
                                 drop_threshold_fraction=drop_threshold_fraction)
                  for n in names}
    return ScenarioConfig(
        name=f"fig3:{'on' if trunking else 'off'}",
        links=_star(names, EIGHT_SITE_BW, EIGHT_SITE_QUEUE, 2 * EIGHT_SITE_BW,
                    access_delay, bottleneck_delay),
        sites=tuple(sites), trunks=trunks, duration=duration, warmup=warmup,
        seed=seed, bottleneck="bottleneck",
        ack_jitter=_jitter(ack_jitter, access_delay, bottleneck_delay))


def build_trunk_fairness(n_trunks: int = 4, flows_per_trunk: int = 10, *,
                         bandwidth: float = EIGHT_SITE_BW, queue: int = EIGHT_SITE_QUEUE,
                         duration: float = 60.0, warmup: float = 10.0,
                         seed: int = 1, ack_jitter: float | None = None) -> ScenarioConfig:
    """Equal-RTT trunks, each carrying greedy flows, sharing one FIFO port."""
    names = [f"T{i + 1}" for i in range(n_trunks)]
    sites = tuple(SiteSpec(n, n, "server", ftp=flows_per_trunk) for n in names)
    trunks = {n: TrunkConfig(rtt_up=RTT_UP, trunk_bw=bandwidth) for n in names}
    return ScenarioConfig(
        name=f"fairness:{n_trunks}x{flows_per_trunk}",
        links=_star(names, bandwidth, queue, 2 * bandwidth),
        sites=sites, trunks=trunks, duration=duration, warmup=warmup, seed=seed,
        bottleneck="bottleneck", ack_jitter=_jitter(ack_jitter, ACCESS_DELAY, BOTTLENECK_DELAY))


def build_buffer_sizing(halvings: int = 1, *, flows: int = 4, rtt_up: float = RTT_UP,
                        bandwidth: float = EIGHT_SITE_BW, at: float = 20.0,
                        spacing: float = 0.2, duration: float = 30.0,
                        seed: int = 1, drop_threshold_fraction: float = 1.0) -> ScenarioConfig:
    """One trunk whose user flows together keep a full buffer's worth in flight.

    The path's base RTT equals ``rtt_up`` and nothing is lost in the
    network, so the only congestion signal is the forced window halving(s)
    at ``at`` (then every ``spacing`` seconds). The default threshold equals
    the capacity, which turns probabilistic dropping off and leaves tail
    drops as the only way to lose a packet.
    """
    tcfg = TrunkConfig(rtt_up=rtt_up, trunk_bw=bandwidth,
                       drop_threshold_fraction=drop_threshold_fraction)
    cap = trunk_buffer_capacity(tcfg)
    per_flow = -(-cap // flows)
    one_way = rtt_up / 2
    links = (
        LinkSpec("access_S", "S", "router", 2 * bandwidth, one_way / 2, 10_000),
        LinkSpec("bottleneck", "router", "server", bandwidth, one_way / 2, 10_000),
    )
    sites = (SiteSpec("S", "S", "server", ftp=flows, ftp_window=per_flow),)
    return ScenarioConfig(
        name=f"p1:{halvings}", links=links, sites=sites, trunks={"S": tcfg},
        duration=duration, warmup=min(at - 1.0, 10.0), seed=seed, bottleneck="bottleneck",
        halvings=tuple(at + i * spacing for i in range(halvings)))


BUILTINS = {
    "fig2:a": lambda **kw: build_web_vs_ftp("a", **kw),
    "fig2:b": lambda **kw: build_web_vs_ftp("b", **kw),
    "fig2:c": lambda **kw: build_web_vs_ftp("c", **kw),
    "fig3:on": lambda **kw: build_eight_sites(True, **kw),
    "fig3:off": lambda **kw: build_eight_sites(False, **kw),
}


def builtin(name: str, **kwargs) -> ScenarioConfig:
    try:
        return BUILTINS[name](**kwargs)
    except KeyError:
        raise KeyError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") from None
