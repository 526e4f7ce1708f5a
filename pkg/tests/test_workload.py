import itertools
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from cloudlb.config import PolicyKind, UserBase
from cloudlb.engine import US_PER_HOUR
from cloudlb.workload import (
    arrival_rate,
    generate_arrivals,
    generate_workload,
    is_peak_hour,
    rng_streams,
)

from conftest import make_config

UB = UserBase("UB1", 0, users_peak=1000, users_offpeak=0, peak_hours=(3, 9),
              requests_per_user_per_hour=12)
ALWAYS_PEAK = UserBase("UB1", 0, users_peak=1000, users_offpeak=100, peak_hours=(0, 24))


def test_rate_inside_peak():
    assert arrival_rate(UB, 4) == pytest.approx(1 / 300)


def test_rate_zero_off_peak():
    assert arrival_rate(UB, 12) == 0


def test_peak_end_hour_is_off_peak():
    assert is_peak_hour(UB, 3) and is_peak_hour(UB, 8)
    assert not is_peak_hour(UB, 9)
    assert arrival_rate(UB, 9) == 0


def test_peak_window_wrapping_midnight():
    ub = UserBase("UB1", 0, peak_hours=(22, 2))
    assert [h for h in range(24) if is_peak_hour(ub, h)] == [0, 1, 22, 23]
    assert is_peak_hour(ub, 24 + 23)  # hour of day, not hour of run


def test_zero_rate_gives_no_arrivals():
    ub = UserBase("UB1", 0, users_peak=0, users_offpeak=0)
    assert generate_arrivals(ub, (0, 24 * US_PER_HOUR), np.random.default_rng(0)) == []


def test_empty_window_rejected():
    with pytest.raises(ValueError):
        generate_arrivals(UB, (5, 5), np.random.default_rng(0))


def test_times_inside_window_and_sorted():
    rng = np.random.default_rng(3)
    window = (US_PER_HOUR // 2, 10 * US_PER_HOUR + 17)
    reqs = generate_arrivals(UB, window, rng)
    t = [r.created for r in reqs]
    assert t == sorted(t)
    assert all(window[0] <= x < window[1] for x in t)
    assert all(isinstance(x, int) for x in t)
    assert all(3 <= x // US_PER_HOUR < 9 for x in t)  # off-peak rate is zero


def test_same_seed_same_stream():
    a = generate_arrivals(UB, (0, 24 * US_PER_HOUR), np.random.default_rng(9))
    b = generate_arrivals(UB, (0, 24 * US_PER_HOUR), np.random.default_rng(9))
    assert [(r.id, r.created) for r in a] == [(r.id, r.created) for r in b]


def test_mean_count_matches_rate_times_length():
    T = US_PER_HOUR // 6
    lam_t = arrival_rate(ALWAYS_PEAK, 0) * T / 1000
    counts = np.array([len(generate_arrivals(ALWAYS_PEAK, (0, T), np.random.default_rng(s)))
                       for s in range(1000)])
    sigma = np.sqrt(lam_t)
    assert abs(counts.mean() - lam_t) < 3 * sigma
    assert abs(counts.mean() - lam_t) < 3 * sigma / np.sqrt(len(counts))  # standard error
    assert counts.var() == pytest.approx(lam_t, rel=0.15)  # Poisson: variance = mean


def test_inter_arrival_times_are_exponential():
    rng = np.random.default_rng(2024)
    lam = arrival_rate(ALWAYS_PEAK, 0) / 1000  # per microsecond
    reqs = generate_arrivals(ALWAYS_PEAK, (0, int(10_050 / lam)), rng)
    gaps = np.diff([r.created for r in reqs])[:10_000]
    assert gaps.size == 10_000
    result = stats.kstest(gaps, "expon", args=(0, 1 / lam))
    assert result.pvalue > 0.01


def test_off_peak_hours_are_thinned():
    ub = UserBase("UB1", 0, users_peak=1000, users_offpeak=100, peak_hours=(0, 12))
    reqs = generate_arrivals(ub, (0, 24 * US_PER_HOUR), np.random.default_rng(1))
    hours = np.array([r.created // US_PER_HOUR for r in reqs])
    peak, off = np.sum(hours < 12), np.sum(hours >= 12)
    assert peak / off == pytest.approx(10, rel=0.1)


def test_consecutive_windows_concatenate():
    rng = np.random.default_rng(4)
    ids = itertools.count()
    first = generate_arrivals(ALWAYS_PEAK, (0, US_PER_HOUR), rng, ids)
    second = generate_arrivals(ALWAYS_PEAK, (US_PER_HOUR, 2 * US_PER_HOUR), rng, ids)
    assert first[-1].created < US_PER_HOUR <= second[0].created
    both = [r.created for r in first + second]
    assert both == sorted(both)
    assert [r.id for r in first + second] == list(range(len(both)))
    # the generator state moved on: the second window is not a shifted copy
    assert [r.created - US_PER_HOUR for r in second[:5]] != [r.created for r in first[:5]]


def test_streams_are_independent_and_reproducible():
    a = [g.random() for g in rng_streams(5, 4)]
    b = [g.random() for g in rng_streams(5, 4)]
    assert a == b and len(set(a)) == 4


def test_workload_ids_unique_and_deterministic():
    cfg = make_config(ubs=3, dcs=3, hours=2, jitter=6, users=100)
    w1, w2 = generate_workload(cfg), generate_workload(cfg)
    assert [r.id for r in w1] == list(range(len(w1)))
    assert [(r.source_ub, r.created, r.jitter_out, r.jitter_back) for r in w1] == \
        [(r.source_ub, r.created, r.jitter_out, r.jitter_back) for r in w2]
    assert all(-6000 <= r.jitter_out <= 6000 and -6000 <= r.jitter_back <= 6000 for r in w1)
    assert {r.source_ub for r in w1} == {0, 1, 2}


def test_workload_depends_on_seed_only_not_policy():
    cfg = make_config(ubs=2, dcs=2, users=50)
    a = generate_workload(cfg)
    b = generate_workload(replace(cfg, policy=PolicyKind.THROTTLED))
    c = generate_workload(replace(cfg, seed=1))
    assert [r.created for r in a] == [r.created for r in b]
    assert [r.created for r in a] != [r.created for r in c]
