"""Traffic drivers: greedy bulk transfers and closed-loop short transfers."""

from __future__ import annotations

import math


class GreedyFtp:
    """One long-lived flow with an unbounded backlog."""

    def __init__(self, host, site: str, index: int, max_window: int | None = None):
        self.host = host
        self.site = site
        self.group = f"{site}_ftp"
        self.max_window = max_window
        self.stream = host.sim.stream(f"src:{site}:ftp{index}")
        self.sender = None

    def start(self, jitter: float) -> None:
        at = self.stream.uniform(0.0, jitter)
        self.host.sim.schedule(at, self._open)

    def _open(self) -> None:
        self.sender = self.host.open_flow(self.site, self.group, math.inf,
                                          max_window=self.max_window)


class WebSession:
    """Back-to-back transfers of ``page_size`` bytes with no think time.

    Each transfer is a fresh connection; its delay runs from the moment it is
    opened until the sender sees its last byte acknowledged.
    """

    def __init__(self, host, site: str, index: int, page_size: int, kind: str = "web"):
        if page_size <= 0:
            raise ValueError("page_size must be positive")
        self.host = host
        self.site = site
        self.group = f"{site}_{kind}"
        self.page_size = page_size
        self.stream = host.sim.stream(f"src:{site}:{kind}{index}")
        self.completed: list[tuple[float, float]] = []
        self.started = 0
        self._t0 = 0.0

    def start(self, jitter: float) -> None:
        at = self.stream.uniform(0.0, jitter)
        self.host.sim.schedule(at, self._next)

    def _next(self) -> None:
        self.started += 1
        self._t0 = self.host.sim.now
        self.host.open_flow(self.site, self.group, self.page_size, on_complete=self._done)

    def _done(self, now: float) -> None:
        self.completed.append((self._t0, now))
        self.host.record_delay(self.group, self._t0, now)
        self._next()


def web_session_source(host, site: str, page_size: int = 8192, index: int = 0,
                       kind: str = "web") -> WebSession:
    return WebSession(host, site, index, page_size, kind)
