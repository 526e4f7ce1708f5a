"""Two-level request routing.

The service broker sends each request to the closest data center. Inside a
data center a VM load balancer picks the VM: round robin, ESCE (fewest
in-flight allocations) or throttled (first VM below a concurrency cap).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from cloudlb.config import PolicyKind, SimulationConfig

__all__ = [
    "BrokerTable",
    "build_broker_table",
    "broker_select",
    "RoundRobinState",
    "EsceState",
    "ThrottledState",
    "rr_next",
    "esce_next",
    "throttled_next",
    "notify_allocate",
    "notify_release",
    "new_state",
    "select_vm",
]


@dataclass(frozen=True)
class BrokerTable:
    """Per user base, data-center indices by ascending one-way delay."""

    preferences: tuple[tuple[int, ...], ...]


def build_broker_table(cfg: SimulationConfig) -> BrokerTable:
    lat = cfg.latency
    prefs = []
    for ub in cfg.user_bases:
        order = sorted(range(len(cfg.data_centers)),
                       key=lambda d: (lat.delay(ub.region, cfg.data_centers[d].region), d))
        prefs.append(tuple(order))
    return BrokerTable(tuple(prefs))


def broker_select(ub: int, table: BrokerTable) -> int:
    return table.preferences[ub][0]


@dataclass
class _Counts:
    active: list[int]
    # None means every VM may be used
    eligible: list[bool] | None = field(default=None, kw_only=True)

    @property
    def vm_count(self) -> int:
        return len(self.active)

    def usable(self, vm: int) -> bool:
        return self.eligible is None or self.eligible[vm]


@dataclass
class RoundRobinState(_Counts):
    next_index: int = 0


@dataclass
class EsceState(_Counts):
    pass


@dataclass
class ThrottledState(_Counts):
    threshold: int = 1


def rr_next(state: RoundRobinState, vm_count: int | None = None) -> int:
    """Return the cursor VM and advance the cursor, skipping ineligible VMs."""
    n = len(state.active) if vm_count is None else vm_count
    if n < 1:
        raise ValueError("round robin needs at least one VM")
    if state.eligible is None:
        vm = state.next_index
        state.next_index = (vm + 1) % n
        return vm
    for _ in range(n):
        vm = state.next_index
        state.next_index = (vm + 1) % n
        if state.usable(vm):
            return vm
    raise RuntimeError("no eligible VM")


def esce_next(state: EsceState) -> int:
    """Eligible VM with the fewest active allocations; lowest id on ties."""
    best = -1
    best_count = None
    for vm, count in enumerate(state.active):
        if state.usable(vm) and (best_count is None or count < best_count):
            best, best_count = vm, count
    if best < 0:
        raise RuntimeError("no eligible VM")
    return best


def throttled_next(state: ThrottledState) -> int | None:
    """Lowest-id eligible VM below the threshold, or None when saturated."""
    for vm, count in enumerate(state.active):
        if count < state.threshold and state.usable(vm):
            return vm
    return None


def notify_allocate(state: _Counts, vm: int) -> None:
    state.active[vm] += 1


def notify_release(state: _Counts, vm: int) -> None:
    if state.active[vm] <= 0:
        raise RuntimeError(f"release on VM {vm} without a matching allocation")
    state.active[vm] -= 1


def new_state(policy: PolicyKind, vm_count: int, threshold: int = 1,
              eligible: list[bool] | None = None) -> _Counts:
    active = [0] * vm_count
    if policy is PolicyKind.ROUND_ROBIN:
        return RoundRobinState(active, eligible=eligible)
    if policy is PolicyKind.ESCE:
        return EsceState(active, eligible=eligible)
    return ThrottledState(active, threshold=threshold, eligible=eligible)


def select_vm(state: _Counts) -> int | None:
    if isinstance(state, ThrottledState):
        return throttled_next(state)
    if isinstance(state, EsceState):
        return esce_next(state)
    return rr_next(state)
