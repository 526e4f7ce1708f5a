import numpy as np
import pytest

from cloudlb.config import SchedulingMode, VmSpec
from cloudlb.scheduler import (
    UNITS_PER_MI,
    VmRuntime,
    run_task_set,
    service_time,
    work_units,
    work_us,
)
from cloudlb.workload import Request

TS, SS = SchedulingMode.TIME_SHARED, SchedulingMode.SPACE_SHARED
VM1000 = VmSpec(0, mips=1000)


def fluid(mips, tasks, shared):
    """Float reference: exact processor sharing or FCFS, jumping event to event."""
    arrivals = np.array([a for a, _ in tasks], dtype=float)
    left = np.array([length for _, length in tasks], dtype=float) * 1e6 / mips  # in us
    done = np.full(len(tasks), np.nan)
    order = np.lexsort((np.arange(len(tasks)), arrivals))
    t = 0.0
    while np.isnan(done).any():
        present = (arrivals <= t) & np.isnan(done)
        future = arrivals[arrivals > t]
        horizon = future.min() if future.size else np.inf
        if not present.any():
            t = horizon
            continue
        if shared:
            n = present.sum()
            step = min(left[present].min() * n, horizon - t)
            left[present] -= step / n
        else:
            head = next(i for i in order if present[i])
            step = min(left[head], horizon - t)
            left[head] -= step
        t += step
        finished = present & (left <= 1e-9)
        done[finished] = t
        left[finished] = 0
    return done


def test_idle_vm_runs_at_full_speed():
    assert run_task_set(VM1000, TS, [(7, 100)]) == [7 + 100_000]
    assert run_task_set(VM1000, SS, [(7, 100)]) == [7 + 100_000]
    assert work_us(100, 1000) == 100_000


def test_two_equal_tasks():
    assert run_task_set(VM1000, TS, [(0, 100), (0, 100)]) == [200_000, 200_000]
    assert run_task_set(VM1000, SS, [(0, 100), (0, 100)]) == [100_000, 200_000]


def test_short_and_long_task_share_then_long_runs_alone():
    assert run_task_set(VM1000, TS, [(0, 100), (0, 200)]) == [200_000, 300_000]


def test_work_units_are_exact():
    assert work_units(100) == 100 * UNITS_PER_MI
    assert work_units(0.1) == UNITS_PER_MI // 10
    assert work_us(1, 3) == 333_334


@pytest.mark.parametrize("mode", [TS, SS])
def test_matches_fluid_reference(mode):
    rng = np.random.default_rng(11 if mode is TS else 12)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 7))
        tasks = [(int(a) * 10, float(x)) for a, x in
                 zip(rng.integers(0, 3000, k), rng.uniform(100, 300, k))]
        got = np.array(run_task_set(VmSpec(0, mips=10_000), mode, tasks), dtype=float)
        ref = fluid(10_000, tasks, mode is TS)
        arr = np.array([a for a, _ in tasks], dtype=float)
        worst = max(worst, float(np.max(np.abs((got - arr) - (ref - arr)) / (ref - arr))))
    assert worst <= 1e-3


@pytest.mark.parametrize("mips", [1000, 3333, 200_000, 333.3, 7])
def test_makespan_is_the_same_in_both_modes(mips):
    rng = np.random.default_rng(int(mips * 10))
    for _ in range(300):
        k = int(rng.integers(1, 9))
        tasks = [(int(a) * 10, float(x) if rng.random() < 0.5 else float(round(x)) or 1.0)
                 for a, x in zip(rng.integers(0, 400, k), rng.uniform(0.01, 300, k))]
        vm = VmSpec(0, mips=mips)
        assert max(run_task_set(vm, TS, tasks)) == max(run_task_set(vm, SS, tasks))


@pytest.mark.parametrize("mode", [TS, SS])
def test_busy_time_matches_work_when_saturated(mode):
    vm = VmRuntime(VmSpec(0, mips=2000), mode)
    for i in range(5):
        vm.admit(i, work_units(50 + 10 * i), 0)
    while (nxt := vm.next_completion()) is not None:
        vm.complete(nxt[1], nxt[0])
    total_mi = sum(50 + 10 * i for i in range(5))
    assert vm.busy_us == pytest.approx(total_mi / 2000 * 1e6, abs=1)
    assert vm.active_count == 0 and vm.waiting_count == 0


def test_space_shared_finishes_in_admission_order():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k = int(rng.integers(2, 8))
        arrivals = np.sort(rng.integers(0, 50_000, k))
        tasks = [(int(a), float(x)) for a, x in zip(arrivals, rng.uniform(1, 100, k))]
        done = run_task_set(VM1000, SS, tasks)
        assert done == sorted(done)


def test_contention_stretches_time_shared_service():
    done = run_task_set(VM1000, TS, [(0, 100), (50_000, 100)])
    assert done[0] - 0 > 100_000
    assert done[1] - 50_000 > 100_000


def test_space_shared_queueing():
    vm = VmRuntime(VM1000, SS)
    assert vm.admit(1, work_units(100), 0) is True
    assert vm.admit(2, work_units(100), 10) is False
    assert vm.waiting_count == 1
    assert vm.completion_times() == {1: 100_000, 2: 200_000}
    assert vm.complete(1, 100_000) == 2
    assert vm.next_completion() == (200_000, 2)


def test_projection_agrees_with_execution():
    vm = VmRuntime(VmSpec(0, mips=3333), TS)
    for i, length in enumerate([10, 40, 25, 25, 7]):
        vm.admit(i, work_units(length), 100 * i)
    projected = vm.completion_times()
    while (nxt := vm.next_completion()) is not None:
        vm.complete(nxt[1], nxt[0])
        assert projected[nxt[1]] == nxt[0]


def test_duplicate_admission_is_rejected():
    vm = VmRuntime(VM1000, TS)
    vm.admit(1, 10, 0)
    with pytest.raises(RuntimeError, match="already"):
        vm.admit(1, 10, 5)


def test_zero_work_is_rejected():
    with pytest.raises(ValueError):
        VmRuntime(VM1000, SS).admit(1, 0, 0)


@pytest.mark.parametrize("mode", [TS, SS])
def test_completing_the_wrong_task_is_rejected(mode):
    vm = VmRuntime(VM1000, mode)
    vm.admit(1, work_units(100), 0)
    vm.admit(2, work_units(200), 0)
    with pytest.raises(RuntimeError):
        vm.complete(2, 100_000)


@pytest.mark.parametrize("mode", [TS, SS])
def test_early_completion_is_rejected(mode):
    vm = VmRuntime(VM1000, mode)
    vm.admit(1, work_units(100), 0)
    with pytest.raises(RuntimeError):
        vm.complete(1, 99_999)


def test_clock_cannot_run_backwards():
    vm = VmRuntime(VM1000, TS)
    vm.admit(1, 10, 100)
    with pytest.raises(RuntimeError, match="backwards"):
        vm.admit(2, 10, 50)


def test_service_time_needs_both_ends():
    req = Request(id=4, source_ub=0, created=0, length=100.0, size=100)
    with pytest.raises(ValueError, match="4"):
        service_time(req)
    req.service_start, req.service_end = 10, 35
    assert service_time(req) == 25
