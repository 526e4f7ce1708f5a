"""Task execution on a single VM.

Accounting is fixed-point. Task sizes are integer work units of 1e-12 MI and
time is integer microseconds, so a VM of ``mips`` MI/s delivers exactly
``mips * 1e6`` units per microsecond.

Time-shared VMs run egalitarian processor sharing tracked through a virtual
clock: with ``n`` tasks present every one of them receives
``floor(dt * rate / n)`` units over ``dt`` microseconds. Space-shared VMs run
one task at a time in FCFS order.

Completion instants are the first whole microsecond at which less than half
a micro-MI of the task remains. When a time-shared task is retired, whatever
it received beyond (or short of) its size is handed to the tasks still
present, and a space-shared task taken from the queue inherits the unused
remainder of its predecessor's last microsecond. Within a busy period both
modes therefore deliver exactly ``rate`` units per microsecond, and their
makespans agree.
"""

from __future__ import annotations

import heapq
from collections import deque
from fractions import Fraction

from cloudlb.config import SchedulingMode, VmSpec
from cloudlb.engine import SimTime

__all__ = ["VmRuntime", "work_units", "work_us", "service_time", "run_task_set",
           "UNITS_PER_MI"]

UNITS_PER_MI = 10**12
# remaining work below this counts as done; it absorbs the per-event flooring
SLACK = UNITS_PER_MI // 2_000_000


def work_units(length: float) -> int:
    """Task size in work units (1e-12 MI)."""
    return round(Fraction(length) * UNITS_PER_MI)


def _rate(mips: float):
    r = Fraction(mips) * (UNITS_PER_MI // 1_000_000)
    return r.numerator if r.denominator == 1 else r


def _ceil_div(a, b) -> int:
    return int(-(-a // b))


def _finish_after(left, n, rate) -> int:
    """Microseconds until *left* units drop below the slack at share rate/n."""
    left -= SLACK
    return _ceil_div(left * n, rate) if left > 0 else 0


def work_us(length: float, mips: float) -> int:
    """Unshared execution time of *length* MI at *mips* MI/s, in whole microseconds."""
    return _finish_after(work_units(length), 1, _rate(mips))


def service_time(req) -> SimTime:
    if req.service_start is None or req.service_end is None:
        raise ValueError(f"request {req.id} has no service interval")
    return req.service_end - req.service_start


class VmRuntime:
    """One VM's task set under a fixed scheduling mode."""

    def __init__(self, spec: VmSpec, mode: SchedulingMode):
        self.spec = spec
        self.mode = mode
        self.time_shared = mode is SchedulingMode.TIME_SHARED
        self.last_update: SimTime = 0
        self.busy_us: SimTime = 0
        self.rate = _rate(spec.mips)  # work units per microsecond
        self._members: set[int] = set()
        # time-shared state
        self._vclock = 0
        self._finish: list = []  # heap of (virtual finish, admission seq, req id)
        self._seq = 0
        # space-shared state: running (id, finish), busy-period start and work
        self._running: tuple[int, SimTime] | None = None
        self._waiting: deque = deque()
        self._period_start: SimTime = 0
        self._period_work = 0

    def __repr__(self):
        return (f"VmRuntime(id={self.spec.id}, mode={self.mode.value}, "
                f"active={self.active_count}, waiting={self.waiting_count})")

    @property
    def active_count(self) -> int:
        if self.time_shared:
            return len(self._finish)
        return 0 if self._running is None else 1

    @property
    def waiting_count(self) -> int:
        return len(self._waiting)

    def holds(self, req_id: int) -> bool:
        return req_id in self._members

    def _advance(self, now: SimTime) -> None:
        dt = now - self.last_update
        if dt < 0:
            raise RuntimeError(f"VM clock moved backwards ({self.last_update} -> {now})")
        if dt:
            if self.time_shared:
                n = len(self._finish)
                if n == 1:
                    self._vclock += dt * self.rate
                elif n:
                    self._vclock += int(dt * self.rate // n)
                else:
                    dt = 0
            elif self._running is None:
                dt = 0
            self.busy_us += dt
        self.last_update = now

    def _start(self, req_id: int, work: int) -> None:
        self._period_work += work
        finish = self._period_start + _finish_after(self._period_work, 1, self.rate)
        self._running = (req_id, max(finish, self.last_update))

    def admit(self, req_id: int, work: int, now: SimTime) -> bool:
        """Place a task of *work* units on the VM.

        Returns True if it starts executing now.
        """
        if work <= 0:
            raise ValueError("task work must be positive")
        if req_id in self._members:
            raise RuntimeError(f"request {req_id} is already on VM {self.spec.id}")
        self._advance(now)
        self._members.add(req_id)
        if self.time_shared:
            if not self._finish:
                self._vclock = 0
            heapq.heappush(self._finish, (self._vclock + work, self._seq, req_id))
            self._seq += 1
            return True
        if self._running is None:
            self._period_start, self._period_work = now, 0
            self._start(req_id, work)
            return True
        self._waiting.append((req_id, work))
        return False

    def next_completion(self) -> tuple[SimTime, int] | None:
        if self.time_shared:
            if not self._finish:
                return None
            vfinish, _, rid = self._finish[0]
            return (self.last_update
                    + _finish_after(vfinish - self._vclock, len(self._finish), self.rate), rid)
        return None if self._running is None else self._running[::-1]

    def complete(self, req_id: int, now: SimTime) -> int | None:
        """Retire the task finishing at *now*.

        Returns the id of a queued task that starts executing at *now*
        (space-shared only), else None.
        """
        if self.time_shared:
            if not self._finish or self._finish[0][2] != req_id:
                raise RuntimeError(f"request {req_id} is not the next task to finish on "
                                   f"VM {self.spec.id}")
            self._advance(now)
            vfinish = self._finish[0][0]
            if self._vclock + SLACK < vfinish:
                raise RuntimeError(f"request {req_id} still has work left at {now}")
            heapq.heappop(self._finish)
            self._members.discard(req_id)
            if self._finish:
                # give the others what the finished task got beyond its size
                self._vclock += (self._vclock - vfinish) // len(self._finish)
            return None
        if self._running is None or self._running[0] != req_id:
            raise RuntimeError(f"request {req_id} is not running on VM {self.spec.id}")
        if self._running[1] != now:
            raise RuntimeError(f"request {req_id} finishes at {self._running[1]}, not {now}")
        self._advance(now)
        self._members.discard(req_id)
        self._running = None
        if self._waiting:
            rid, work = self._waiting.popleft()
            self._start(rid, work)
            return rid
        return None

    def completion_times(self) -> dict[int, SimTime]:
        """Projected finish time of every task assuming no further arrivals."""
        out = {}
        if self.time_shared:
            t, v = self.last_update, self._vclock
            pending = sorted(self._finish)
            n = len(pending)
            for vfinish, _, rid in pending:
                dt = _finish_after(vfinish - v, n, self.rate)
                t += dt
                v += dt * self.rate if n == 1 else int(dt * self.rate // n)
                n -= 1
                if n:
                    v += (v - vfinish) // n
                out[rid] = t
            return out
        if self._running is not None:
            rid, t = self._running
            out[rid] = t
            cum = self._period_work
            for rid, work in self._waiting:
                cum += work
                t = max(t, self._period_start + _finish_after(cum, 1, self.rate))
                out[rid] = t
        return out


def run_task_set(spec: VmSpec, mode: SchedulingMode,
                 tasks: list[tuple[SimTime, float]]) -> list[SimTime]:
    """Completion time of each ``(arrival_us, length_mi)`` task on one VM.

    Admissions at the same instant as a completion are processed after it;
    simultaneous arrivals keep list order.
    """
    vm = VmRuntime(spec, mode)
    order = sorted(range(len(tasks)), key=lambda i: (tasks[i][0], i))
    done: dict[int, SimTime] = {}
    k = 0
    while k < len(order) or vm.next_completion() is not None:
        nxt = vm.next_completion()
        if k < len(order) and (nxt is None or tasks[order[k]][0] < nxt[0]):
            i = order[k]
            vm.admit(i, work_units(tasks[i][1]), tasks[i][0])
            k += 1
        else:
            t, rid = nxt
            vm.complete(rid, t)
            done[rid] = t
    return [done[i] for i in range(len(tasks))]
