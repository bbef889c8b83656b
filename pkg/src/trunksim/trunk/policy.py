"""Buffer sizing, drop probability and per-flow exemption formulas."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from ..netmodel import TCP, ConfigError, Packet


class TrunkClass(enum.Enum):
    TCP = "tcp-trunk"
    UDP = "udp-trunk"


def classify(pkt: Packet) -> TrunkClass:
    """User TCP and UDP traffic ride separate trunks."""
    return TrunkClass.TCP if pkt.flow_key.proto == TCP else TrunkClass.UDP


@dataclass(frozen=True)
class TrunkConfig:
    rtt_up: float = 0.1
    trunk_bw: float = 1_250_000.0
    pkt_size: int = 1500
    drop_threshold_fraction: float = 0.5
    activity_window: float | None = None  # defaults to 2 * rtt_up

    def __post_init__(self):
        if not self.rtt_up >= 0:
            raise ConfigError(f"rtt_up must be >= 0, got {self.rtt_up}")
        if not self.trunk_bw > 0:
            raise ConfigError(f"trunk_bw must be > 0, got {self.trunk_bw}")
        if not self.pkt_size > 0:
            raise ConfigError(f"pkt_size must be > 0, got {self.pkt_size}")
        if not 0 < self.drop_threshold_fraction <= 1:
            raise ConfigError(
                f"drop_threshold_fraction must be in (0, 1], got {self.drop_threshold_fraction}")
        if self.activity_window is None:
            object.__setattr__(self, "activity_window", 2 * self.rtt_up)
        elif self.activity_window < 0:
            raise ConfigError(f"activity_window must be >= 0, got {self.activity_window}")


def trunk_buffer_capacity(cfg: TrunkConfig) -> int:
    """Packets needed to hold one upper-bound RTT of traffic at the trunk's peak rate."""
    # rounding first keeps 0.3 * 1e6 / 1500 from ceiling to 201
    return max(1, math.ceil(round(cfg.rtt_up * cfg.trunk_bw / cfg.pkt_size, 9)))


def drop_threshold(cfg: TrunkConfig, capacity: int | None = None) -> int:
    if capacity is None:
        capacity = trunk_buffer_capacity(cfg)
    return min(capacity, max(1, math.floor(cfg.drop_threshold_fraction * capacity)))


def drop_probability(occupancy: int, threshold: int, capacity: int) -> float:
    """Linear ramp from 0 at ``threshold`` to 1 at ``capacity``.

    A full buffer always drops, which takes precedence when
    ``threshold == capacity``.
    """
    if occupancy >= capacity:
        return 1.0
    if occupancy <= threshold:
        return 0.0
    return (occupancy - threshold) / (capacity - threshold)


def flow_window_estimate(trunk_conn, n_active: int) -> int:
    """Per-flow congestion window guess in packets: trunk window split N ways."""
    w = int(trunk_conn.cwnd // trunk_conn.mss)
    if n_active <= 0:
        return w
    return max(1, w // n_active)


def exemption_threshold(w_per_flow: int) -> tuple[int, int]:
    """Return ``(x, k)``.

    ``x`` approximates the packets a Reno flow with window ``w`` sends while
    climbing back from w/2 to w (w/2 + (w/2+1) + ... + w ~ 3w^2/8) and ``k``
    is half of it, the minimum forwarded between two managed drops.
    """
    if w_per_flow < 0:
        raise ValueError("window must be non-negative")
    x = 3 * w_per_flow * w_per_flow // 8
    return x, x // 2
