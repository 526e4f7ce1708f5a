"""Per-user-base request traffic with a diurnal peak/off-peak profile."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from cloudlb.config import SimulationConfig, UserBase
from cloudlb.engine import US_PER_HOUR, SimTime

__all__ = [
    "Request",
    "is_peak_hour",
    "arrival_rate",
    "generate_arrivals",
    "rng_streams",
    "generate_workload",
]


@dataclass(slots=True, eq=False)
class Request:
    id: int
    source_ub: int
    created: SimTime
    length: float
    size: int
    # uniform jitter (us) applied to the outbound and return legs
    jitter_out: int = 0
    jitter_back: int = 0
    assigned_dc: int | None = None
    assigned_vm: int | None = None
    dc_arrival: SimTime | None = None
    service_start: SimTime | None = None
    service_end: SimTime | None = None
    returned: SimTime | None = None
    migrations: int = 0
    outbound_us: int = 0
    migration_us: int = 0
    return_us: int = 0
    visited: int = 0  # bitmask of data centers this request has reached

    @property
    def queue_wait(self) -> SimTime:
        """Time spent at data centers waiting for a VM (network excluded)."""
        return self.service_start - self.dc_arrival - self.migration_us

    @property
    def service(self) -> SimTime:
        return self.service_end - self.service_start

    @property
    def processing(self) -> SimTime:
        """From reaching the first data center to the end of execution."""
        return self.service_end - self.dc_arrival

    @property
    def response(self) -> SimTime:
        return self.returned - self.created


def is_peak_hour(ub: UserBase, hour: int) -> bool:
    start, end = ub.peak_hours
    h = hour % 24
    if start <= end:
        return start <= h < end
    return h >= start or h < end


def arrival_rate(ub: UserBase, hour: int) -> float:
    """Mean arrivals per millisecond during hour-of-day *hour*."""
    users = ub.users_peak if is_peak_hour(ub, hour) else ub.users_offpeak
    return users * ub.requests_per_user_per_hour / 3_600_000


def generate_arrivals(ub: UserBase, window: tuple[int, int], rng: np.random.Generator,
                      ids: Iterator[int] | None = None, source: int = 0) -> list[Request]:
    """Inhomogeneous Poisson arrivals in ``[t0, t1)`` microseconds, by thinning.

    Candidates are drawn at the largest hourly rate found in the window and
    kept with probability ``rate(hour) / max_rate``. The generator state
    advances, so consecutive windows yield concatenable streams.
    """
    t0, t1 = window
    if not t0 < t1:
        raise ValueError(f"empty window [{t0}, {t1})")
    if ids is None:
        ids = itertools.count()
    first_hour = t0 // US_PER_HOUR
    last_hour = (t1 - 1) // US_PER_HOUR
    hourly = np.array([arrival_rate(ub, h) for h in range(first_hour, last_hour + 1)])
    peak = hourly.max()
    if peak <= 0:
        return []
    lam = peak / 1000.0  # per microsecond
    span = t1 - t0
    gaps = []
    total = 0.0
    expected = lam * span
    while total < span:
        batch = rng.exponential(1.0 / lam, size=int(expected + 5 * np.sqrt(expected) + 16))
        gaps.append(batch)
        total += batch.sum()
    times = t0 + np.cumsum(np.concatenate(gaps))
    times = times[times < t1]
    hours = (times // US_PER_HOUR).astype(np.int64) - first_hour
    keep = rng.random(times.size) * peak < hourly[hours]
    stamps = np.floor(times[keep]).astype(np.int64).tolist()
    length, size = ub.request_length, ub.request_size
    return [Request(next(ids), source, t, length, size) for t in stamps]


def rng_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators derived from one 64-bit seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def generate_workload(cfg: SimulationConfig) -> list[Request]:
    """All requests of a run, ordered by user base then creation time.

    Each user base owns one arrival stream and one jitter stream, so the
    traffic seen by every policy is identical for a given seed.
    """
    n = len(cfg.user_bases)
    streams = rng_streams(cfg.seed, 2 * n)
    ids = itertools.count()
    horizon = int(round(cfg.duration * US_PER_HOUR))
    jitter_us = int(round(cfg.latency.jitter_ms * 1000))
    out: list[Request] = []
    for i, ub in enumerate(cfg.user_bases):
        reqs = generate_arrivals(ub, (0, horizon), streams[2 * i], ids, source=i)
        if jitter_us and reqs:
            jit = streams[2 * i + 1]
            fwd = jit.integers(-jitter_us, jitter_us + 1, size=len(reqs)).tolist()
            back = jit.integers(-jitter_us, jitter_us + 1, size=len(reqs)).tolist()
            for r, a, b in zip(reqs, fwd, back):
                r.jitter_out = a
                r.jitter_back = b
        out.extend(reqs)
    return out
