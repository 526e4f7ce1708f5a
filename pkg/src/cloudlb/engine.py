"""Deterministic discrete-event core.

Simulation time is kept in integer microseconds, so equal instants compare
exactly. Ties at the same instant are broken by insertion order.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, TextIO

__all__ = [
    "SimTime",
    "US_PER_MS",
    "US_PER_HOUR",
    "EventKind",
    "Event",
    "EventQueue",
    "RunStats",
    "SchedulingError",
    "SimulationAborted",
    "run",
    "format_time",
    "ms_to_us",
]

SimTime = int

US_PER_MS = 1_000
US_PER_HOUR = 3_600_000_000


def ms_to_us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


class EventKind(enum.IntEnum):
    ARRIVAL = 0
    DISPATCH_TO_DC = 1
    ASSIGN_TO_VM = 2
    TASK_COMPLETE = 3
    RESPONSE_RETURN = 4
    MIGRATE_REQUEST = 5
    HOUR_BOUNDARY = 6


class Event(NamedTuple):
    time: SimTime
    seq: int
    kind: EventKind
    payload: tuple = ()


_new_event = tuple.__new__
_push = heapq.heappush


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock."""


class SimulationAborted(RuntimeError):
    """A handler failed; carries the event being processed."""

    def __init__(self, event: Event, cause: BaseException):
        self.event = event
        super().__init__(
            f"run aborted at t={format_time(event.time)} ms while handling "
            f"{event.kind.name} {event.payload}: {cause}")


class EventQueue:
    """Min-queue of events ordered by ``(time, seq)``."""

    def __init__(self, start: SimTime = 0):
        self._heap: list[Event] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self.now: SimTime = start

    def __len__(self) -> int:
        return len(self._heap) - len(self._cancelled)

    @property
    def scheduled(self) -> int:
        """Number of events ever scheduled on this queue."""
        return self._seq

    def schedule(self, time: SimTime, kind: EventKind, payload: tuple = ()) -> Event:
        if time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at t={format_time(time)} ms: "
                f"clock is already at {format_time(self.now)} ms")
        ev = _new_event(Event, (time, self._seq, kind, payload))
        self._seq += 1
        _push(self._heap, ev)
        return ev

    def schedule_many(self, items) -> None:
        """Bulk-insert ``(time, kind, payload)`` triples."""
        heap = self._heap
        seq = self._seq
        now = self.now
        for time, kind, payload in items:
            if time < now:
                raise SchedulingError(f"cannot schedule {kind.name} in the past")
            heap.append(Event(time, seq, kind, payload))
            seq += 1
        self._seq = seq
        heapq.heapify(heap)

    def cancel(self, event: Event) -> None:
        self._cancelled.add(event.seq)

    def peek_time(self) -> SimTime | None:
        self._skip_cancelled()
        return self._heap[0].time if self._heap else None

    def pop(self) -> Event:
        self._skip_cancelled()
        if not self._heap:
            raise IndexError("pop from an empty event queue")
        ev = heapq.heappop(self._heap)
        self.now = ev.time
        return ev

    def _skip_cancelled(self) -> None:
        heap = self._heap
        cancelled = self._cancelled
        while heap and heap[0].seq in cancelled:
            cancelled.discard(heapq.heappop(heap).seq)


@dataclass
class RunStats:
    clock: SimTime
    processed: int
    cancelled: int
    remaining: int


Handler = Callable[[Event], None]


def format_time(t: SimTime) -> str:
    """Milliseconds with three decimals, formatted without float rounding."""
    sign = "-" if t < 0 else ""
    q, r = divmod(abs(int(t)), US_PER_MS)
    return f"{sign}{q}.{r:03d}"


def run(queue: EventQueue, handlers: Mapping[EventKind, Handler],
        until: SimTime | None = None, trace: TextIO | None = None) -> RunStats:
    """Pop and dispatch events in ``(time, seq)`` order.

    Every event with ``time <= until`` is processed (all events when *until*
    is None). Handlers may schedule further events. When *until* is given
    the clock is advanced to it at the end of the run.
    """
    missing = [k.name for k in EventKind if k not in handlers]
    if missing:
        raise ValueError(f"no handler for event kinds: {', '.join(missing)}")
    table = [handlers[k] for k in EventKind]
    heap = queue._heap
    cancelled = queue._cancelled
    pop = heapq.heappop
    limit = math.inf if until is None else until
    processed = 0
    dropped = 0
    last = queue.now
    # plain indexing below: 0 = time, 1 = seq, 2 = kind
    while heap:
        if heap[0][0] > limit:
            break
        ev = pop(heap)
        if cancelled and ev[1] in cancelled:
            cancelled.discard(ev[1])
            dropped += 1
            continue
        if ev[0] < last:
            raise SimulationAborted(ev, SchedulingError("event popped out of time order"))
        queue.now = last = ev[0]
        if trace is not None:
            trace.write(f"{format_time(ev.time)}\t{ev.kind.name}\t"
                        f"{','.join(map(str, ev.payload))}\n")
        try:
            table[ev[2]](ev)
        except SchedulingError as exc:
            raise SimulationAborted(ev, exc) from exc
        processed += 1
    if until is not None and until > queue.now:
        queue.now = until
    return RunStats(clock=queue.now, processed=processed, cancelled=dropped,
                    remaining=len(queue))
