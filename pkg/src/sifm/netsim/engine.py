"""Deterministic discrete-event engine with integer-microsecond time."""

from __future__ import annotations

import heapq
from typing import Any, Callable, NamedTuple, Optional

US_PER_S = 1_000_000
US_PER_MS = 1_000


def seconds(value: float) -> int:
    return int(round(value * US_PER_S))


def millis(value: float) -> int:
    return int(round(value * US_PER_MS))


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current time."""


class Event(NamedTuple):
    time: int
    seq: int
    callback: Callable[..., Any]
    args: tuple


class Simulator:
    """Clock plus a priority queue ordered by (time, insertion sequence).

    Events scheduled for the same instant run in the order they were scheduled.
    """

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[tuple] = []
        self._seq = 0
        self.processed = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, at: int, callback: Callable[..., Any], *args: Any) -> None:
        if at < self.now:
            raise SchedulingError(f"event at {at} us is in the past (now={self.now} us)")
        heapq.heappush(self._heap, (at, self._seq, callback, args))
        self._seq += 1

    def after(self, delay: int, callback: Callable[..., Any], *args: Any) -> None:
        if delay < 0:
            raise SchedulingError(f"negative delay {delay} us")
        heapq.heappush(self._heap, (self.now + delay, self._seq, callback, args))
        self._seq += 1

    def peek_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Optional[Event]:
        """Remove the next event and advance the clock; ``None`` when empty."""
        if not self._heap:
            return None
        event = Event(*heapq.heappop(self._heap))
        self.now = event.time
        return event

    def run(self, until: Optional[int] = None) -> int:
        """Run events with time <= ``until`` (all events if ``None``)."""
        heap = self._heap
        pop = heapq.heappop
        count = 0
        while heap:
            if until is not None and heap[0][0] > until:
                break
            time, _, callback, args = pop(heap)
            self.now = time
            callback(*args)
            count += 1
        if until is not None and until > self.now:
            self.now = until
        self.processed += count
        return count
