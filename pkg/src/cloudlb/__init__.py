"""Discrete-event simulation of load balancing across regional cloud data centers."""

from cloudlb.availability import AvailabilityParams, expected_availability, is_available
from cloudlb.compare import compare_policies, overload_scenario
from cloudlb.config import (
    PolicyKind,
    SchedulingMode,
    SimulationConfig,
    default_paper_config,
    load_config,
    parse_config,
    serialize_config,
    validate_config,
)
from cloudlb.metrics import hourly_loading, summarize
from cloudlb.simulation import simulate

__all__ = [
    "AvailabilityParams",
    "expected_availability",
    "is_available",
    "compare_policies",
    "overload_scenario",
    "PolicyKind",
    "SchedulingMode",
    "SimulationConfig",
    "default_paper_config",
    "load_config",
    "parse_config",
    "serialize_config",
    "validate_config",
    "hourly_loading",
    "summarize",
    "simulate",
]
