"""One simulation run: workload -> broker -> VM balancer -> VM -> metrics.

Request life cycle (one event per step)::

    ARRIVAL          created at the user base, routed to the closest DC
    DISPATCH_TO_DC   reaches that DC; the VM balancer picks a VM
    MIGRATE_REQUEST  (throttled) reaches another DC after being moved on
    ASSIGN_TO_VM     (throttled) leaves a DC wait queue for a freed VM
    TASK_COMPLETE    execution finished, response leaves the DC
    RESPONSE_RETURN  response reaches the user base

Runs continue after ``duration`` until every request has returned.
"""

from __future__ import annotations

import gc
import math
from collections import deque
from dataclasses import dataclass, field
from typing import TextIO

from cloudlb import balancer as lb
from cloudlb.availability import AvailabilityParams, is_available
from cloudlb.config import PolicyKind, SimulationConfig, validate_config
from cloudlb.engine import (
    US_PER_HOUR,
    EventKind,
    EventQueue,
    RunStats,
    ms_to_us,
    run,
)
from cloudlb.metrics import MetricsStore
from cloudlb.scheduler import VmRuntime, work_units
from cloudlb.workload import Request, generate_workload

__all__ = ["InvariantViolation", "SimulationResult", "Simulation", "simulate"]


class InvariantViolation(RuntimeError):
    """A balancer or conservation invariant failed during a run."""


@dataclass
class _DcRuntime:
    index: int
    region: int
    vms: list[VmRuntime]
    balancer: object
    pending: list = field(default_factory=list)  # next TASK_COMPLETE event per VM
    waiting: deque = field(default_factory=deque)
    present: int = 0
    peak_present: int = 0


@dataclass
class SimulationResult:
    config: SimulationConfig
    store: MetricsStore
    requests: list[Request]
    stats: RunStats
    generated: int
    returned: int
    peak_present: dict[str, int]

    @property
    def dropped(self) -> int:
        return self.generated - self.returned

    @property
    def migrated(self) -> int:
        return sum(1 for r in self.requests if r.migrations)


class Simulation:
    def __init__(self, cfg: SimulationConfig, *, check_invariants: bool = True,
                 trace: TextIO | None = None):
        problems = validate_config(cfg)
        if problems:
            raise ValueError("invalid configuration: " + "; ".join(problems))
        self.cfg = cfg
        self.check = check_invariants
        self.trace = trace
        self.queue = EventQueue()
        self.prefs = lb.build_broker_table(cfg).preferences
        self.lat_us = [[ms_to_us(d) for d in row] for row in cfg.latency.one_way_delay]
        self.ub_region = [ub.region for ub in cfg.user_bases]
        self.throttled = cfg.policy is PolicyKind.THROTTLED
        self._select = lb.esce_next if cfg.policy is PolicyKind.ESCE else lb.rr_next
        self.esce_check = check_invariants and cfg.policy is PolicyKind.ESCE
        self.cap_check = check_invariants and self.throttled
        self.dcs: list[_DcRuntime] = []
        for i, dc in enumerate(cfg.data_centers):
            vms = [VmRuntime(spec, cfg.scheduling_mode) for spec in dc.vms]
            state = lb.new_state(cfg.policy, len(vms), cfg.throttle_threshold,
                                 self._eligibility(dc))
            self.dcs.append(_DcRuntime(i, dc.region, vms, state, [None] * len(vms)))
        # task size (work units) of each user base's requests
        self._work = [work_units(ub.request_length) for ub in cfg.user_bases]
        self.store = MetricsStore(tuple(ub.id for ub in cfg.user_bases),
                                  tuple(dc.id for dc in cfg.data_centers),
                                  duration_hours=cfg.duration)
        self.requests: list[Request] = []

    def _eligibility(self, dc) -> list[bool] | None:
        av = self.cfg.availability
        if not av.enabled:
            return None
        return [is_available(AvailabilityParams(av.measurement_period_min, vm.loss_rate,
                                                vm.downtime_min), av.threshold)
                for vm in dc.vms]

    # ------------------------------------------------------------------
    # handlers

    def _on_arrival(self, ev) -> None:
        req = self.requests[ev.payload[0]]
        follower = self._next_arrival[req.id]
        if follower is not None:
            self.queue.schedule(follower.created, EventKind.ARRIVAL, (follower.id,))
        d = self.prefs[req.source_ub][0]
        leg = self.lat_us[self.ub_region[req.source_ub]][self.dcs[d].region] + req.jitter_out
        if leg < 0:
            leg = 0
        req.outbound_us = leg
        self.queue.schedule(ev.time + leg, EventKind.DISPATCH_TO_DC, (req.id, d))

    def _on_dispatch(self, ev) -> None:
        rid, d = ev.payload
        req = self.requests[rid]
        req.dc_arrival = ev.time
        self._enter(req, d, ev.time)

    def _on_migrate(self, ev) -> None:
        rid, d = ev.payload
        self._enter(self.requests[rid], d, ev.time)

    def _enter(self, req: Request, d: int, now) -> None:
        dc = self.dcs[d]
        req.visited |= 1 << d
        present = dc.present = dc.present + 1
        if present > dc.peak_present:
            dc.peak_present = present
        state = dc.balancer
        if self.throttled:
            vm = lb.throttled_next(state)
            if vm is None:
                self._throttle(req, dc, now)
                return
        else:
            vm = self._select(state)
            if self.esce_check:
                lowest = min(c for i, c in enumerate(state.active) if state.usable(i))
                if state.active[vm] != lowest:
                    raise InvariantViolation(
                        f"ESCE picked VM {vm} with {state.active[vm]} active, min is {lowest}")
        state.active[vm] += 1
        if self.cap_check and state.active[vm] > state.threshold:
            self._cap_violation(dc, vm)
        req.assigned_dc = d
        req.assigned_vm = vm
        if dc.vms[vm].admit(req.id, self._work[req.source_ub], now):
            req.service_start = now
            self._reschedule(dc, vm)

    def _throttle(self, req: Request, dc: _DcRuntime, now) -> None:
        for t in self.prefs[req.source_ub]:
            if req.visited & (1 << t):
                continue
            if lb.throttled_next(self.dcs[t].balancer) is not None:
                hop = self.lat_us[dc.region][self.dcs[t].region]
                req.migrations += 1
                req.migration_us += hop
                dc.present -= 1
                self.queue.schedule(now + hop, EventKind.MIGRATE_REQUEST, (req.id, t))
                return
        dc.waiting.append(req)

    def _cap_violation(self, dc: _DcRuntime, vm: int):
        state = dc.balancer
        raise InvariantViolation(
            f"VM {vm} at DC {dc.index} holds {state.active[vm]} tasks, "
            f"threshold is {state.threshold}")

    def _allocate(self, req: Request, dc: _DcRuntime, vm: int) -> None:
        state = dc.balancer
        lb.notify_allocate(state, vm)
        if self.cap_check and state.active[vm] > state.threshold:
            self._cap_violation(dc, vm)
        req.assigned_dc = dc.index
        req.assigned_vm = vm

    def _admit(self, req: Request, dc: _DcRuntime, vm: int, now) -> None:
        runtime = dc.vms[vm]
        if runtime.admit(req.id, self._work[req.source_ub], now):
            req.service_start = now
            self._reschedule(dc, vm)

    def _reschedule(self, dc: _DcRuntime, vm: int) -> None:
        old = dc.pending[vm]
        nxt = dc.vms[vm].next_completion()
        if old is not None:
            if nxt is not None and old.time == nxt[0] and old.payload[2] == nxt[1]:
                return
            self.queue.cancel(old)
        dc.pending[vm] = None if nxt is None else self.queue.schedule(
            nxt[0], EventKind.TASK_COMPLETE, (dc.index, vm, nxt[1]))

    def _on_assign(self, ev) -> None:
        rid, d, vm = ev.payload
        self._admit(self.requests[rid], self.dcs[d], vm, ev.time)

    def _on_complete(self, ev) -> None:
        d, vm, rid = ev.payload
        now = ev.time
        dc = self.dcs[d]
        dc.pending[vm] = None
        started = dc.vms[vm].complete(rid, now)
        req = self.requests[rid]
        req.service_end = now
        if started is not None:
            self.requests[started].service_start = now
        lb.notify_release(dc.balancer, vm)
        dc.present -= 1
        leg = self.lat_us[dc.region][self.ub_region[req.source_ub]] + req.jitter_back
        if leg < 0:
            leg = 0
        req.return_us = leg
        self.queue.schedule(now + leg, EventKind.RESPONSE_RETURN, (rid,))
        self._reschedule(dc, vm)
        if dc.waiting:
            free = lb.throttled_next(dc.balancer)
            if free is not None:
                nxt = dc.waiting.popleft()
                self._allocate(nxt, dc, free)
                self.queue.schedule(now, EventKind.ASSIGN_TO_VM, (nxt.id, d, free))

    def _on_return(self, ev) -> None:
        req = self.requests[ev.payload[0]]
        req.returned = ev.time
        self.store.record_request(req)

    def _on_hour(self, ev) -> None:
        if self.cfg.availability.enabled:
            for dc, spec in zip(self.dcs, self.cfg.data_centers):
                dc.balancer.eligible = self._eligibility(spec)

    # ------------------------------------------------------------------

    def run(self) -> SimulationResult:
        # a run allocates millions of objects but no reference cycles, so the
        # cyclic collector would only cost time
        gc_was_enabled = gc.isenabled()
        gc.disable()
        try:
            return self._run()
        finally:
            if gc_was_enabled:
                gc.enable()

    def _run(self) -> SimulationResult:
        cfg = self.cfg
        self.requests = generate_workload(cfg)
        q = self.queue
        hours = math.ceil(cfg.duration)
        # arrivals are chained per user base to keep the queue short
        self._next_arrival = [None] * len(self.requests)
        heads = {}
        for r in reversed(self.requests):
            self._next_arrival[r.id] = heads.get(r.source_ub)
            heads[r.source_ub] = r
        q.schedule_many([(h * US_PER_HOUR, EventKind.HOUR_BOUNDARY, (h,)) for h in range(hours)]
                        + [(r.created, EventKind.ARRIVAL, (r.id,))
                           for _, r in sorted(heads.items())])
        handlers = {
            EventKind.ARRIVAL: self._on_arrival,
            EventKind.DISPATCH_TO_DC: self._on_dispatch,
            EventKind.ASSIGN_TO_VM: self._on_assign,
            EventKind.TASK_COMPLETE: self._on_complete,
            EventKind.RESPONSE_RETURN: self._on_return,
            EventKind.MIGRATE_REQUEST: self._on_migrate,
            EventKind.HOUR_BOUNDARY: self._on_hour,
        }
        stats = run(q, handlers, trace=self.trace)
        returned = self.store.recorded
        if self.check:
            if q.scheduled != stats.processed + stats.cancelled + stats.remaining:
                raise InvariantViolation("event conservation failed")
            if returned != len(self.requests):
                raise InvariantViolation(
                    f"{len(self.requests) - returned} requests never returned")
            for dc in self.dcs:
                if dc.waiting or any(dc.balancer.active):
                    raise InvariantViolation(f"DC {dc.index} not drained at end of run")
        return SimulationResult(
            config=cfg,
            store=self.store,
            requests=self.requests,
            stats=stats,
            generated=len(self.requests),
            returned=returned,
            peak_present={cfg.data_centers[dc.index].id: dc.peak_present for dc in self.dcs},
        )


def simulate(cfg: SimulationConfig, **kwargs) -> SimulationResult:
    return Simulation(cfg, **kwargs).run()
