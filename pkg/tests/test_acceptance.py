"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import itertools
import time

import numpy as np
import pytest

from cloudlb import cli
from cloudlb.availability import AvailabilityParams, expected_availability
from cloudlb.balancer import (
    EsceState,
    RoundRobinState,
    ThrottledState,
    esce_next,
    rr_next,
    throttled_next,
)
from cloudlb.compare import compare_policies, overload_scenario
from cloudlb.config import PolicyKind, SchedulingMode, VmSpec, default_paper_config
from cloudlb.metrics import hourly_loading, summarize
from cloudlb.scheduler import run_task_set
from cloudlb.simulation import simulate

from conftest import random_config
from test_scheduler import fluid


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    return emit


@pytest.fixture(scope="module")
def default_day():
    t = time.perf_counter()
    res = simulate(default_paper_config())
    return res, time.perf_counter() - t


def test_1_availability_worked_example(report):
    t = time.perf_counter()
    a_e = expected_availability(AvailabilityParams(60, 1, 1)).a_e
    took = time.perf_counter() - t
    ok = abs(a_e - 0.983333333333) < 1e-9 and took < 1
    report(1, ok, f"a_e={a_e:.9f} ({100 * a_e:.2f}%), {took * 1e3:.2f} ms")
    assert ok


def test_2_default_day_response_band(report, default_day):
    res, took = default_day
    rows = summarize(res.store)["response"].rows
    avg_ok = all(45 <= r.avg_ms <= 55 for r in rows)
    span_ok = all(35 <= r.min_ms and r.max_ms <= 65 for r in rows)
    ok = len(rows) == 6 and avg_ok and span_ok and took < 10
    report(2, ok, f"avg {min(r.avg_ms for r in rows):.3f}..{max(r.avg_ms for r in rows):.3f} ms, "
                  f"min {min(r.min_ms for r in rows):.3f}, max {max(r.max_ms for r in rows):.3f} "
                  f"ms, {took:.1f} s")
    assert ok


def test_3_symmetric_user_bases_agree(report, default_day):
    res, _ = default_day
    avgs = [r.avg_ms for r in summarize(res.store)["response"].rows]
    spread = (max(avgs) - min(avgs)) / float(np.mean(avgs))
    ok = spread < 0.02
    report(3, ok, f"max pairwise difference {100 * spread:.3f}% of the mean")
    assert ok


def test_4_policy_ordering_under_overload(report):
    t = time.perf_counter()
    cfg = overload_scenario(default_paper_config())
    cmp = compare_policies(cfg, range(20))
    took = time.perf_counter() - t
    rr, esce, thr = (cmp.summary(p) for p in ("rr", "esce", "throttled"))
    ratio = thr.processing_avg / rr.processing_avg
    order = esce.response_avg <= rr.response_avg <= thr.response_avg
    ok = ratio >= 1.5 and order and took < 120
    report(4, ok, f"service throttled/rr = {ratio:.3f} (need >= 1.5); response "
                  f"esce {esce.response_avg:.1f}, rr {rr.response_avg:.1f}, "
                  f"throttled {thr.response_avg:.1f} ms (need esce <= rr <= throttled); "
                  f"{took:.1f} s")
    assert ok


def test_5_scheduler_matches_fluid_oracle(report):
    t = time.perf_counter()
    worst = {}
    for mode in SchedulingMode:
        rng = np.random.default_rng(5)
        err = 0.0
        for _ in range(1000):
            k = int(rng.integers(1, 7))
            tasks = [(int(a) * 10, float(x)) for a, x in
                     zip(rng.integers(0, 3000, k), rng.uniform(100, 300, k))]
            arr = np.array([a for a, _ in tasks], dtype=float)
            got = np.array(run_task_set(VmSpec(0, mips=10_000), mode, tasks)) - arr
            ref = fluid(10_000, tasks, mode is SchedulingMode.TIME_SHARED) - arr
            err = max(err, float(np.max(np.abs(got - ref) / ref)))
        worst[mode.value] = err
    took = time.perf_counter() - t
    ok = max(worst.values()) <= 1e-3 and took < 60
    report(5, ok, ", ".join(f"{m} worst relative error {e:.2e}" for m, e in worst.items())
           + f"; {took:.1f} s")
    assert ok


def test_6_repeated_runs_are_byte_identical(report, tmp_path):
    t = time.perf_counter()
    outs = [tmp_path / "one", tmp_path / "two"]
    codes = [cli.main(["simulate", "--policy", "throttled", "--mode", "ss", "--seed", "7",
                       "--hours", "2", "--out", str(o), "--trace"]) for o in outs]
    took = time.perf_counter() - t
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
               for f in ("summary.json", "trace.tsv"))
    ok = codes == [0, 0] and same and took < 30
    report(6, ok, f"summary.json and trace.tsv identical: {same}, {took:.1f} s")
    assert ok


def test_7_conservation_on_random_configs(report):
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = []
    for i in range(100):
        cfg = random_config(rng)
        # the run itself checks the throttled cap and the ESCE argmin at every step
        res = simulate(cfg, check_invariants=True)
        if res.generated != res.returned:
            failures.append(f"config {i}: generated {res.generated}, returned {res.returned}")
        if sum(map(sum, hourly_loading(res.store).values())) != res.returned:
            failures.append(f"config {i}: hourly loading does not add up")
        for table in summarize(res.store).values():
            for row in table.rows + ((table.overall,) if table.overall else ()):
                if not row.min_ms <= row.avg_ms <= row.max_ms:
                    failures.append(f"config {i}: {table.metric} row {row.entity}")
    took = time.perf_counter() - t
    ok = not failures and took < 120
    report(7, ok, f"100 configs, {len(failures)} failures, {took:.1f} s")
    assert ok, failures[:5]


def test_8_balancers_match_brute_force(report):
    t = time.perf_counter()
    checked = mismatches = 0
    for n in range(1, 7):
        for counts in itertools.product(range(5), repeat=n):
            counts = list(counts)
            checked += 1
            if esce_next(EsceState(counts[:])) != counts.index(min(counts)):
                mismatches += 1
            for threshold in range(1, 5):
                below = [v for v, c in enumerate(counts) if c < threshold]
                want = below[0] if below else None
                if throttled_next(ThrottledState(counts[:], threshold=threshold)) != want:
                    mismatches += 1
            for cursor in range(n):
                state = RoundRobinState(counts[:], next_index=cursor)
                if rr_next(state) != cursor or state.next_index != (cursor + 1) % n:
                    mismatches += 1
    took = time.perf_counter() - t
    ok = mismatches == 0 and took < 10
    report(8, ok, f"{checked} states, {mismatches} mismatches, {took:.1f} s")
    assert ok
