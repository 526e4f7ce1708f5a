"""Expected availability of a resource over a measurement period.

    availability = (mp - r_l * d_e) / mp

``mp`` is the measurement period, ``r_l`` the expected number of
resource-loss events in that period and ``d_e`` the expected downtime per
loss event (same time unit as ``mp``). The result is clamped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["AvailabilityParams", "AvailabilityRating", "expected_availability", "is_available"]


@dataclass(frozen=True)
class AvailabilityParams:
    mp: float
    r_l: float
    d_e: float


@dataclass(frozen=True)
class AvailabilityRating:
    a_e: float
    raw: float
    clamped: bool = False

    @property
    def percent(self) -> float:
        return 100.0 * self.a_e


def expected_availability(p: AvailabilityParams) -> AvailabilityRating:
    if p.mp <= 0:
        raise ValueError(f"measurement period must be > 0, got {p.mp}")
    if p.r_l < 0 or p.d_e < 0:
        raise ValueError("loss rate and downtime must be non-negative")
    raw = (p.mp - p.r_l * p.d_e) / p.mp
    a_e = min(max(raw, 0.0), 1.0)
    return AvailabilityRating(a_e=a_e, raw=raw, clamped=a_e != raw)


def is_available(p: AvailabilityParams, threshold: float) -> bool:
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return expected_availability(p).a_e >= threshold
