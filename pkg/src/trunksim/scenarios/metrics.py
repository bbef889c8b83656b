"""Run statistics: throughput, drop rates, transfer delays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DelayStats:
    mean: float
    std: float
    max: float
    count: int


def summarize_delays(samples) -> DelayStats:
    """Mean, population standard deviation and maximum of ``samples``."""
    a = np.asarray(samples, dtype=float)
    if a.size == 0:
        raise ValueError("no delay samples")
    return DelayStats(float(a.mean()), float(a.std()), float(a.max()), int(a.size))


@dataclass
class QueueStats:
    arrivals: int = 0
    drops: int = 0
    prob_drops: int = 0
    tail_drops: int = 0

    @property
    def drop_rate(self) -> float:
        return self.drops / self.arrivals if self.arrivals else 0.0


@dataclass
class TrunkStats:
    cwnd_samples: int = 0
    cwnd_above5: int = 0
    link_share: float = 0.0
    p3_violations: int = 0
    capacity: int = 0
    peak_occupancy: int = 0

    @property
    def cwnd_above5_fraction(self) -> float:
        return self.cwnd_above5 / self.cwnd_samples if self.cwnd_samples else 0.0


@dataclass
class MetricsReport:
    """Everything measured over ``[warmup, duration]`` of one run."""

    scenario: str
    seed: int
    window: float
    throughput: dict[str, float] = field(default_factory=dict)  # bytes/s per source group
    queues: dict[str, QueueStats] = field(default_factory=dict)  # link:<name>, trunk:<site>
    delays: dict[str, DelayStats] = field(default_factory=dict)
    trunks: dict[str, TrunkStats] = field(default_factory=dict)
    ledger: dict[str, int] = field(default_factory=dict)

    def drop_rate(self, queue: str) -> float:
        return self.queues[queue].drop_rate

    def rows(self) -> list[tuple[str, str, float, str]]:
        """Flatten to ``(metric, entity, value, unit)`` rows in a stable order."""
        out: list[tuple[str, str, float, str]] = []
        for g in sorted(self.throughput):
            out.append(("throughput", g, self.throughput[g], "B/s"))
        for q in sorted(self.queues):
            s = self.queues[q]
            out.append(("arrivals", q, s.arrivals, "pkts"))
            out.append(("drops", q, s.drops, "pkts"))
            out.append(("drop_rate", q, s.drop_rate, "ratio"))
            if q.startswith("trunk:"):
                out.append(("prob_drops", q, s.prob_drops, "pkts"))
                out.append(("tail_drops", q, s.tail_drops, "pkts"))
        for g in sorted(self.delays):
            d = self.delays[g]
            out.append(("delay_mean", g, d.mean, "s"))
            out.append(("delay_std", g, d.std, "s"))
            out.append(("delay_max", g, d.max, "s"))
            out.append(("delay_count", g, d.count, "transfers"))
        for t in sorted(self.trunks):
            s = self.trunks[t]
            out.append(("link_share", f"trunk:{t}", s.link_share, "ratio"))
            out.append(("cwnd_above5", f"trunk:{t}", s.cwnd_above5_fraction, "ratio"))
            out.append(("p3_violations", f"trunk:{t}", s.p3_violations, "count"))
            out.append(("buffer_capacity", f"trunk:{t}", s.capacity, "pkts"))
            out.append(("buffer_peak", f"trunk:{t}", s.peak_occupancy, "pkts"))
        for k in sorted(self.ledger):
            out.append(("ledger", k, self.ledger[k], "pkts"))
        return out

    @classmethod
    def empty(cls, scenario: str = "", seed: int = 0, window: float = 1.0) -> MetricsReport:
        return cls(scenario, seed, window)


def aggregate(reports: list[MetricsReport]) -> list[tuple[str, str, float, float, str]]:
    """Cross-seed ``(metric, entity, mean, std, unit)`` for rows present in every report."""
    tables = [{(m, e): (v, u) for m, e, v, u in r.rows()} for r in reports]
    if not tables:
        return []
    keys = [k for k in tables[0] if all(k in t for t in tables[1:])]
    out = []
    for k in keys:
        vals = np.array([t[k][0] for t in tables], dtype=float)
        out.append((k[0], k[1], float(vals.mean()), float(vals.std()), tables[0][k][1]))
    return out
