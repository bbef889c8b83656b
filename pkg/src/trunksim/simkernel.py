"""Discrete-event engine: virtual clock, event heap and seeded random streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from typing import Any, Callable


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class Event:
    """A scheduled callback. Keep the handle to cancel it later."""

    __slots__ = ("fire_time", "sequence", "action", "args", "cancelled")

    def __init__(self, fire_time: float, sequence: int, action: Callable, args: tuple):
        self.fire_time = fire_time
        self.sequence = sequence
        self.action = action
        self.args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __repr__(self) -> str:
        name = getattr(self.action, "__qualname__", repr(self.action))
        return f"Event(t={self.fire_time!r}, seq={self.sequence}, {name})"


@dataclass(frozen=True)
class RunSummary:
    events_fired: int
    final_clock: float


class Simulator:
    """Single-threaded event loop.

    Events are ordered by ``(fire_time, sequence)`` where ``sequence`` is the
    insertion counter, so simultaneous events fire in scheduling order.
    """

    def __init__(self, seed: int = 0, trace: bool = False):
        self.seed = int(seed)
        self.now = 0.0
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self._streams: dict[str, RandomStream] = {}
        self.events_fired = 0
        self.trace: list[tuple[float, int, str]] | None = [] if trace else None

    def schedule(self, at: float, action: Callable, *args: Any) -> Event:
        if at < self.now:
            raise SchedulingError(f"cannot schedule at {at!r}, clock is {self.now!r}")
        ev = Event(at, self._seq, action, args)
        self._seq += 1
        heapq.heappush(self._heap, (at, ev.sequence, ev))
        return ev

    def schedule_in(self, delay: float, action: Callable, *args: Any) -> Event:
        return self.schedule(self.now + delay, action, *args)

    @staticmethod
    def cancel(handle: Event) -> None:
        handle.cancelled = True

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)

    def run(self, until: float) -> RunSummary:
        """Fire every event with ``fire_time <= until`` in order."""
        heap = self._heap
        pop = heapq.heappop
        trace = self.trace
        fired = 0
        while heap and heap[0][0] <= until:
            t, seq, ev = pop(heap)
            if ev.cancelled:
                continue
            self.now = t
            if trace is not None:
                trace.append((t, seq, getattr(ev.action, "__qualname__", "?")))
            ev.action(*ev.args)
            fired += 1
        # an exhausted queue leaves the clock at the last event fired
        if heap and self.now < until:
            self.now = until
        self.events_fired += fired
        return RunSummary(fired, self.now)

    def stream(self, label: str) -> RandomStream:
        """Return the random stream named ``label``, creating it on first use."""
        s = self._streams.get(label)
        if s is None:
            s = self._streams[label] = RandomStream(self.seed, label)
        return s

    def serialized_trace(self) -> bytes:
        if self.trace is None:
            raise RuntimeError("simulator was built without trace=True")
        return "\n".join(f"{t!r} {s} {name}" for t, s, name in self.trace).encode()


def derive_seed(seed: int, label: str) -> int:
    """Hash ``(seed, label)`` into an independent 64-bit seed."""
    digest = hashlib.blake2b(f"{int(seed)}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class RandomStream:
    """Uniform draws on [0, 1) with 53-bit resolution.

    Streams with the same ``(seed, stream_id)`` produce the same sequence on
    every platform; different labels give unrelated sequences.
    """

    __slots__ = ("stream_id", "seed", "draws", "_rng")

    def __init__(self, seed: int, stream_id: str):
        self.stream_id = stream_id
        self.seed = derive_seed(seed, stream_id)
        self.draws = 0
        self._rng = random.Random(self.seed)

    def next_uniform(self) -> float:
        self.draws += 1
        return self._rng.random()

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_uniform()


def next_uniform(stream: RandomStream) -> float:
    return stream.next_uniform()
