import numpy as np
import pytest

from cloudlb.config import (
    DataCenter,
    LatencyMatrix,
    PolicyKind,
    SchedulingMode,
    SimulationConfig,
    UserBase,
    VmSpec,
)


def make_config(ubs=1, dcs=1, vms=1, regions=None, mips=200_000, users=1000, rate=12.0,
                length=100.0, hours=1.0, policy=PolicyKind.ROUND_ROBIN,
                mode=SchedulingMode.TIME_SHARED, threshold=1, seed=0, intra=25.0,
                inter=100.0, jitter=0.0, peak=(0, 24)) -> SimulationConfig:
    """Small symmetric scenario: user base i and data center i sit in region i."""
    regions = max(ubs, dcs) if regions is None else regions
    return SimulationConfig(
        regions=regions,
        user_bases=tuple(UserBase(f"UB{i + 1}", i % regions, users_peak=users,
                                  users_offpeak=users // 10, peak_hours=peak,
                                  requests_per_user_per_hour=rate, request_length=length)
                         for i in range(ubs)),
        data_centers=tuple(DataCenter(f"DC{i + 1}", i % regions,
                                      tuple(VmSpec(j, mips=mips) for j in range(vms)))
                           for i in range(dcs)),
        latency=LatencyMatrix.uniform(regions, intra, inter, jitter_ms=jitter),
        policy=policy,
        scheduling_mode=mode,
        throttle_threshold=threshold,
        duration=hours,
        seed=seed,
    )


def random_config(rng: np.random.Generator) -> SimulationConfig:
    """A valid scenario drawn at random, small enough to run in well under a second.

    Loads range from idle to heavily saturated so throttled runs migrate and
    queue.
    """
    regions = int(rng.integers(1, 5))
    n_ub = int(rng.integers(1, 5))
    n_dc = int(rng.integers(1, 4))
    delays = rng.integers(0, 80, size=(regions, regions)).astype(float)
    delays = np.triu(delays) + np.triu(delays, 1).T
    ubs = []
    for i in range(n_ub):
        peak = int(rng.integers(1, 60))
        start, end = (int(x) for x in rng.integers(0, 25, size=2))
        ubs.append(UserBase(f"UB{i + 1}", int(rng.integers(regions)), users_peak=peak,
                            users_offpeak=int(rng.integers(0, peak + 1)),
                            peak_hours=(start, end),
                            requests_per_user_per_hour=float(rng.uniform(0, 60)),
                            request_length=float(rng.integers(1, 400))))
    dcs = tuple(DataCenter(f"DC{i + 1}", int(rng.integers(regions)),
                           tuple(VmSpec(j, mips=float(rng.choice([500, 1000, 2000, 200_000])))
                                 for j in range(int(rng.integers(1, 4)))))
                for i in range(n_dc))
    return SimulationConfig(
        regions=regions,
        user_bases=tuple(ubs),
        data_centers=dcs,
        latency=LatencyMatrix(tuple(tuple(r) for r in delays.tolist()),
                              float(rng.integers(0, 6))),
        policy=list(PolicyKind)[int(rng.integers(3))],
        scheduling_mode=list(SchedulingMode)[int(rng.integers(2))],
        throttle_threshold=int(rng.integers(1, 4)),
        duration=float(rng.choice([0.25, 0.5, 1.0])),
        seed=int(rng.integers(2**63)),
    )


@pytest.fixture
def tiny():
    return make_config
