"""Seed-averaged comparison of the three balancing policies.

Every policy sees the same traffic for a given seed (streams are derived
from the seed alone), so per-seed differences come from the policies.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from cloudlb.balancer import build_broker_table
from cloudlb.config import PolicyKind, SchedulingMode, SimulationConfig
from cloudlb.metrics import summarize
from cloudlb.simulation import simulate

__all__ = [
    "DEFAULT_PAIRING",
    "PolicyRun",
    "PolicySummary",
    "Comparison",
    "run_policy",
    "compare_policies",
    "overload_scenario",
    "write_comparison",
]

# RR is run preemptively, ESCE and throttled without preemption
DEFAULT_PAIRING: dict[PolicyKind, SchedulingMode] = {
    PolicyKind.ROUND_ROBIN: SchedulingMode.TIME_SHARED,
    PolicyKind.ESCE: SchedulingMode.SPACE_SHARED,
    PolicyKind.THROTTLED: SchedulingMode.SPACE_SHARED,
}


@dataclass(frozen=True)
class PolicyRun:
    """Overall figures of one (policy, seed) run, in milliseconds."""

    policy: str
    mode: str
    seed: int
    requests: int
    migrated: int
    response_avg: float
    response_min: float
    response_max: float
    processing_avg: float
    processing_min: float
    processing_max: float
    service_avg: float


@dataclass(frozen=True)
class PolicySummary:
    """Means over seeds of the per-run figures."""

    policy: str
    mode: str
    seeds: int
    response_avg: float
    response_min: float
    response_max: float
    processing_avg: float
    processing_min: float
    processing_max: float
    service_avg: float
    migrated: float


@dataclass(frozen=True)
class Comparison:
    summaries: tuple[PolicySummary, ...]
    runs: tuple[PolicyRun, ...]

    def summary(self, policy: PolicyKind | str) -> PolicySummary:
        name = policy.value if isinstance(policy, PolicyKind) else policy
        for s in self.summaries:
            if s.policy == name:
                return s
        raise KeyError(name)

    @property
    def verdicts(self) -> dict[str, bool | float]:
        """Orderings between the policies' seed-averaged means.

        ``processing`` (hops, waiting and execution inside the data-center
        layer) is the service-time family compared here.
        """
        names = {s.policy for s in self.summaries}
        if not {"rr", "esce", "throttled"} <= names:
            return {}
        rr, esce, thr = (self.summary(p) for p in ("rr", "esce", "throttled"))
        ratio = thr.processing_avg / rr.processing_avg if rr.processing_avg else math.inf
        lowest = min(self.summaries, key=lambda s: s.response_avg).policy
        return {
            "throttled_over_rr_processing": ratio,
            "throttled_processing_highest": thr.processing_avg > max(rr.processing_avg,
                                                                     esce.processing_avg),
            "esce_lowest_response": lowest == "esce",
            "response_esce_le_rr_le_throttled": (esce.response_avg <= rr.response_avg
                                                 <= thr.response_avg),
        }

    def to_dict(self) -> dict:
        return {
            "summaries": [asdict(s) for s in self.summaries],
            "runs": [asdict(r) for r in self.runs],
            "verdicts": self.verdicts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Comparison:
        return cls(tuple(PolicySummary(**s) for s in d["summaries"]),
                   tuple(PolicyRun(**r) for r in d["runs"]))

    def format(self) -> str:
        head = (f"{'Policy':<11}{'Mode':<5}{'Resp avg':>14}{'Resp min':>14}{'Resp max':>14}"
                f"{'Proc avg':>14}{'Exec avg':>14}{'Migrated':>10}")
        rows = [f"{s.policy:<11}{s.mode:<5}{s.response_avg:>14.3f}{s.response_min:>14.3f}"
                f"{s.response_max:>14.3f}{s.processing_avg:>14.3f}{s.service_avg:>14.3f}"
                f"{s.migrated:>10.1f}" for s in self.summaries]
        return "\n".join([head, *rows])


def run_policy(cfg: SimulationConfig, policy: PolicyKind, mode: SchedulingMode,
               seed: int) -> PolicyRun:
    result = simulate(replace(cfg, policy=policy, scheduling_mode=mode, seed=seed),
                      check_invariants=False)
    tables = summarize(result.store)
    resp, proc, svc = tables["response"].overall, tables["processing"].overall, \
        tables["service"].overall
    if resp is None:
        nan = math.nan
        return PolicyRun(policy.value, mode.value, seed, 0, 0, nan, nan, nan, nan, nan, nan, nan)
    return PolicyRun(policy.value, mode.value, seed, result.generated, result.migrated,
                     resp.avg_ms, resp.min_ms, resp.max_ms,
                     proc.avg_ms, proc.min_ms, proc.max_ms, svc.avg_ms)


def _mean(runs: list[PolicyRun], field: str) -> float:
    return float(np.mean([getattr(r, field) for r in runs]))


def compare_policies(cfg: SimulationConfig, seeds, pairing=None) -> Comparison:
    """Run every policy of *pairing* on every seed and average the overall rows.

    *pairing* maps each policy to its scheduling mode (default: RR
    time-shared, ESCE and throttled space-shared). The remaining fields of
    *cfg* are shared by all runs.
    """
    pairing = DEFAULT_PAIRING if pairing is None else pairing
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    runs: list[PolicyRun] = []
    summaries = []
    for policy, mode in pairing.items():
        mine = [run_policy(cfg, policy, mode, s) for s in seeds]
        runs += mine
        summaries.append(PolicySummary(
            policy.value, mode.value, len(seeds),
            *(_mean(mine, f) for f in ("response_avg", "response_min", "response_max",
                                       "processing_avg", "processing_min", "processing_max",
                                       "service_avg", "migrated"))))
    return Comparison(tuple(summaries), tuple(runs))


def overload_scenario(cfg: SimulationConfig, load_factor: float = 2.0,
                      service_ms: float = 10_000.0) -> SimulationConfig:
    """One simulated hour in which every user base offers *load_factor* times
    the throughput of its closest data center's fleet (its share of it, if
    the data center is shared).

    Request length is raised so one request keeps the slowest VM busy for
    *service_ms*; this keeps the request count small enough for multi-seed
    comparisons while the load ratio stays what it is for the default sizes.
    Network, fleet and threshold are left untouched.
    """
    if load_factor <= 0 or service_ms <= 0:
        raise ValueError("load_factor and service_ms must be positive")
    slowest = min(vm.mips for dc in cfg.data_centers for vm in dc.vms)
    length = slowest * service_ms / 1000.0
    home = [prefs[0] for prefs in build_broker_table(cfg).preferences]
    ubs = []
    for ub, d in zip(cfg.user_bases, home):
        # a data center serving several user bases splits its capacity
        share = sum(vm.mips for vm in cfg.data_centers[d].vms) / home.count(d)
        users = math.ceil(load_factor * share / length * 3600 / ub.requests_per_user_per_hour)
        ubs.append(replace(ub, users_peak=users, users_offpeak=min(ub.users_offpeak, users),
                           peak_hours=(0, 24), request_length=length))
    return replace(cfg, user_bases=tuple(ubs), duration=1)


def write_comparison(cmp: Comparison, path) -> dict:
    data = cmp.to_dict()
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return data
