"""Scenario description types."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..netmodel import ConfigError
from ..trunk.policy import TrunkConfig


@dataclass(frozen=True)
class LinkSpec:
    name: str
    src: str
    dst: str
    bandwidth: float  # bytes/second
    propagation: float  # seconds
    capacity: int  # packets


@dataclass(frozen=True)
class SiteSpec:
    """Traffic originating at one node and bound for ``dst``.

    ``web`` and ``probes`` are closed-loop sessions of back-to-back
    ``page_size`` transfers; ``ftp`` are greedy bulk flows, optionally capped
    at ``ftp_window`` packets of window.
    """

    name: str
    node: str
    dst: str
    ftp: int = 0
    web: int = 0
    probes: int = 0
    page_size: int = 8192
    ftp_window: int | None = None
    start_jitter: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    links: tuple[LinkSpec, ...]
    sites: tuple[SiteSpec, ...]
    trunks: dict[str, TrunkConfig] = field(default_factory=dict)
    duration: float = 60.0
    warmup: float = 10.0
    seed: int = 1
    bottleneck: str | None = None
    sample_interval: float = 0.01
    halvings: tuple[float, ...] = ()
    ack_jitter: float = 0.0  # extra uniform [0, ack_jitter) seconds on each ACK

    def __post_init__(self):
        self.validate()

    @property
    def trunking(self) -> bool:
        return bool(self.trunks)

    def nodes(self) -> list[str]:
        seen: dict[str, None] = {}
        for link in self.links:
            seen.setdefault(link.src)
            seen.setdefault(link.dst)
        return list(seen)

    def site(self, name: str) -> SiteSpec:
        for s in self.sites:
            if s.name == name:
                return s
        raise KeyError(name)

    def validate(self) -> None:
        if not self.duration > self.warmup >= 0:
            raise ConfigError(f"scenario.duration/warmup: need duration > warmup >= 0, "
                              f"got {self.duration}/{self.warmup}")
        if self.sample_interval <= 0:
            raise ConfigError("scenario.sample_interval must be positive")
        if not self.ack_jitter >= 0:
            raise ConfigError(f"scenario.ack_jitter must be >= 0, got {self.ack_jitter}")
        names = set()
        for link in self.links:
            where = f"link.{link.name}"
            if link.name in names:
                raise ConfigError(f"{where}: duplicate link name")
            names.add(link.name)
            if not link.src or not link.dst:
                raise ConfigError(f"{where}: missing endpoint")
            if link.src == link.dst:
                raise ConfigError(f"{where}: src and dst are the same node")
            if not link.bandwidth > 0:
                raise ConfigError(f"{where}.bandwidth must be positive, got {link.bandwidth}")
            if not link.propagation >= 0:
                raise ConfigError(f"{where}.propagation must be >= 0, got {link.propagation}")
            if link.capacity < 1:
                raise ConfigError(f"{where}.capacity must be >= 1 packet, got {link.capacity}")
        nodes = set(self.nodes())
        site_names = set()
        for s in self.sites:
            where = f"site.{s.name}"
            if s.name in site_names:
                raise ConfigError(f"{where}: duplicate site name")
            site_names.add(s.name)
            for attr in ("node", "dst"):
                if getattr(s, attr) not in nodes:
                    raise ConfigError(f"{where}.{attr}: unknown node {getattr(s, attr)!r}")
            for attr in ("ftp", "web", "probes"):
                if getattr(s, attr) < 0:
                    raise ConfigError(f"{where}.{attr} must be >= 0")
            if s.page_size <= 0:
                raise ConfigError(f"{where}.page_size must be positive")
            if s.ftp_window is not None and s.ftp_window < 1:
                raise ConfigError(f"{where}.ftp_window must be >= 1 packet")
            if s.start_jitter < 0:
                raise ConfigError(f"{where}.start_jitter must be >= 0")
        for site in self.trunks:
            if site not in site_names:
                raise ConfigError(f"trunk.{site}: no such site")
        if self.bottleneck is not None and self.bottleneck not in names:
            raise ConfigError(f"scenario.bottleneck: unknown link {self.bottleneck!r}")
        for t in self.halvings:
            if not 0 <= t <= self.duration:
                raise ConfigError(f"scenario.halvings: time {t} outside the run")
