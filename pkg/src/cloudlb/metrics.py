"""Per-request samples and the summary tables built from them.

All stored times are simulation microseconds; tables report milliseconds.
"""

from __future__ import annotations

import math
from collections import Counter
from operator import attrgetter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from cloudlb.engine import US_PER_HOUR, US_PER_MS, SimTime

__all__ = [
    "ResponseSample",
    "ServiceSample",
    "RunningStats",
    "SummaryRow",
    "SummaryTable",
    "MetricsStore",
    "summarize",
    "hourly_loading",
]


class ResponseSample(NamedTuple):
    ub: int
    request_id: int
    created: SimTime
    returned: SimTime
    dc: int = -1
    migrations: int = 0

    @property
    def response(self) -> SimTime:
        return self.returned - self.created


class ServiceSample(NamedTuple):
    dc: int
    request_id: int
    service_start: SimTime
    service_end: SimTime
    queue_wait: SimTime = 0
    migration: SimTime = 0
    vm: int = -1

    @property
    def service(self) -> SimTime:
        return self.service_end - self.service_start

    @property
    def processing(self) -> SimTime:
        """Time inside the data-center layer: hops, waiting and execution."""
        return self.migration + self.queue_wait + self.service


class RunningStats:
    """Streaming count/sum/min/max; integer input keeps the sum exact."""

    __slots__ = ("count", "total", "min", "max")

    def __init__(self):
        self.count = 0
        self.total = 0
        self.min = None
        self.max = None

    def add(self, x) -> None:
        self.count += 1
        self.total += x
        if self.min is None or x < self.min:
            self.min = x
        if self.max is None or x > self.max:
            self.max = x

    def merge(self, other: RunningStats) -> None:
        if not other.count:
            return
        self.count += other.count
        self.total += other.total
        self.min = other.min if self.min is None else min(self.min, other.min)
        self.max = other.max if self.max is None else max(self.max, other.max)

    @property
    def mean(self):
        return self.total / self.count if self.count else math.nan


@dataclass(frozen=True)
class SummaryRow:
    entity: str
    count: int
    avg_ms: float
    min_ms: float
    max_ms: float

    @classmethod
    def from_stats(cls, entity: str, st: RunningStats) -> SummaryRow:
        return cls(entity, st.count, float(st.total / st.count) / US_PER_MS,
                   float(st.min) / US_PER_MS, float(st.max) / US_PER_MS)


@dataclass(frozen=True)
class SummaryTable:
    """Avg/min/max per entity plus an overall row; ``empty`` when no samples."""

    metric: str
    rows: tuple[SummaryRow, ...] = ()
    overall: SummaryRow | None = None

    @property
    def empty(self) -> bool:
        return not self.rows

    def row(self, entity: str) -> SummaryRow:
        for r in self.rows:
            if r.entity == entity:
                return r
        raise KeyError(entity)

    def to_dict(self) -> dict:
        if self.empty:
            return {"metric": self.metric, "empty": True, "rows": [], "overall": None}
        return {
            "metric": self.metric,
            "empty": False,
            "rows": [r.__dict__.copy() for r in self.rows],
            "overall": self.overall.__dict__.copy(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SummaryTable:
        rows = tuple(SummaryRow(**r) for r in d["rows"])
        overall = SummaryRow(**d["overall"]) if d.get("overall") else None
        return cls(d["metric"], rows, overall)

    def format(self, entity_header: str = "Entity") -> str:
        lines = [f"{entity_header:<12}{'Avg (ms)':>12}{'Min (ms)':>12}{'Max (ms)':>12}{'Count':>10}"]
        if self.empty:
            lines.append("(no samples)")
            return "\n".join(lines)
        for r in self.rows + (self.overall,):
            lines.append(f"{r.entity:<12}{r.avg_ms:>12.3f}{r.min_ms:>12.3f}"
                         f"{r.max_ms:>12.3f}{r.count:>10d}")
        return "\n".join(lines)


class MetricsStore:
    """Retained samples plus per-entity statistics.

    Samples can be recorded one by one (``record_response`` /
    ``record_service``), which updates the statistics immediately, or from
    the simulator once per finished request through ``record_request``.
    Requests are folded into the statistics in one vectorised pass the first
    time the statistics are read, and their samples are built on demand.
    """

    def __init__(self, ub_names, dc_names, duration_hours: float = 0):
        self.ub_names = tuple(ub_names)
        self.dc_names = tuple(dc_names)
        self.duration_hours = duration_hours
        self._responses: list[ResponseSample] = []
        self._services: list[ServiceSample] = []
        self._requests: list = []
        self._unfolded = 0  # requests[_unfolded:] are not in the stats yet
        self._response_stats: dict[int, RunningStats] = {}
        self._processing_stats: dict[int, RunningStats] = {}
        self._service_stats: dict[int, RunningStats] = {}
        self._loading: dict[int, Counter] = {}

    @property
    def recorded(self) -> int:
        return len(self._responses) + len(self._requests)

    @property
    def responses(self) -> list[ResponseSample]:
        return self._responses + [
            ResponseSample(r.source_ub, r.id, r.created, r.returned, r.assigned_dc, r.migrations)
            for r in self._requests]

    @property
    def services(self) -> list[ServiceSample]:
        return self._services + [
            ServiceSample(r.assigned_dc, r.id, r.service_start, r.service_end, r.queue_wait,
                          r.migration_us, r.assigned_vm)
            for r in self._requests]

    @property
    def response_stats(self) -> dict[int, RunningStats]:
        self._fold()
        return self._response_stats

    @property
    def processing_stats(self) -> dict[int, RunningStats]:
        self._fold()
        return self._processing_stats

    @property
    def service_stats(self) -> dict[int, RunningStats]:
        self._fold()
        return self._service_stats

    @property
    def loading(self) -> dict[int, Counter]:
        self._fold()
        return self._loading

    def _dc_stats(self, dc: int):
        proc = self._processing_stats.get(dc)
        if proc is None:
            proc = self._processing_stats[dc] = RunningStats()
            self._service_stats[dc] = RunningStats()
            self._loading[dc] = Counter()
        return proc, self._service_stats[dc], self._loading[dc]

    def _ub_stats(self, ub: int) -> RunningStats:
        st = self._response_stats.get(ub)
        if st is None:
            st = self._response_stats[ub] = RunningStats()
        return st

    def record_response(self, s: ResponseSample) -> None:
        if s.returned < s.created:
            raise ValueError(f"request {s.request_id}: returned before it was created")
        self._responses.append(s)
        self._ub_stats(s.ub).add(s.returned - s.created)

    def record_service(self, s: ServiceSample) -> None:
        if s.service_end < s.service_start:
            raise ValueError(f"request {s.request_id}: service ends before it starts")
        if s.queue_wait < 0 or s.migration < 0:
            raise ValueError(f"request {s.request_id}: negative wait or migration time")
        self._services.append(s)
        proc, svc, load = self._dc_stats(s.dc)
        service = s.service_end - s.service_start
        proc.add(s.migration + s.queue_wait + service)
        svc.add(service)
        load[int(s.service_end // US_PER_HOUR)] += 1

    def record_request(self, r) -> None:
        """Record both samples of a finished request (a ``workload.Request``)."""
        self._requests.append(r)

    def _fold(self) -> None:
        batch = self._requests[self._unfolded:]
        if not batch:
            return
        names = ("created", "dc_arrival", "service_start", "service_end", "returned",
                 "source_ub", "assigned_dc")
        table = np.array(list(map(attrgetter(*names), batch)), dtype=np.int64).T
        cols = dict(zip(names, table))
        stamps = table[:5]
        bad = np.flatnonzero((np.diff(stamps, axis=0) < 0).any(axis=0))
        if bad.size:
            raise ValueError(f"request {batch[bad[0]].id}: timestamps out of order")
        self._unfolded = len(self._requests)
        end = cols["service_end"]
        _fold_groups(cols["source_ub"], cols["returned"] - cols["created"], self._ub_stats)
        _fold_groups(cols["assigned_dc"], end - cols["dc_arrival"],
                     lambda d: self._dc_stats(d)[0])
        _fold_groups(cols["assigned_dc"], end - cols["service_start"],
                     lambda d: self._dc_stats(d)[1])
        hours = end // US_PER_HOUR
        span = int(hours.max()) + 1
        counts = np.bincount(cols["assigned_dc"] * span + hours)
        for key in np.flatnonzero(counts).tolist():
            dc, hour = divmod(key, span)
            self._dc_stats(dc)[2][hour] += int(counts[key])


def _fold_groups(keys: np.ndarray, values: np.ndarray, stats_for) -> None:
    """Merge exact per-key count/sum/min/max of *values* into RunningStats."""
    order = np.argsort(keys, kind="stable")
    k, v = keys[order], values[order]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    part = RunningStats()
    for key, n, total, lo, hi in zip(k[starts].tolist(), np.diff(np.r_[starts, k.size]).tolist(),
                                     np.add.reduceat(v, starts).tolist(),
                                     np.minimum.reduceat(v, starts).tolist(),
                                     np.maximum.reduceat(v, starts).tolist()):
        part.count, part.total, part.min, part.max = n, total, lo, hi
        stats_for(key).merge(part)


def _table(metric: str, stats: dict[int, RunningStats], names) -> SummaryTable:
    rows = []
    overall = RunningStats()
    for idx in sorted(stats):
        st = stats[idx]
        if st.count:
            rows.append(SummaryRow.from_stats(names[idx], st))
            overall.merge(st)
    if not rows:
        return SummaryTable(metric)
    return SummaryTable(metric, tuple(rows), SummaryRow.from_stats("Overall", overall))


def summarize(store: MetricsStore) -> dict[str, SummaryTable]:
    """Response time per user base, processing and execution time per data center.

    ``processing`` (hops between data centers + waiting for a VM + execution)
    is the data-center service-time family; ``service`` is execution alone.
    """
    return {
        "response": _table("response", store.response_stats, store.ub_names),
        "processing": _table("processing", store.processing_stats, store.dc_names),
        "service": _table("service", store.service_stats, store.dc_names),
    }


def hourly_loading(store: MetricsStore) -> dict[str, list[int]]:
    """Requests serviced per hour (by completion hour) for every data center."""
    hours = math.ceil(store.duration_hours)
    for counts in store.loading.values():
        if counts:
            hours = max(hours, max(counts) + 1)
    return {name: [store.loading.get(i, Counter()).get(h, 0) for h in range(hours)]
            for i, name in enumerate(store.dc_names)}
