"""Scenario description: regions, user bases, data centers, VMs and network.

Scenarios are plain frozen dataclasses. They can be written to and read from
a line-oriented ``[section]`` / ``key = value`` text format; the schema is
documented in ``configs/SCHEMA.md``.
"""

from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field, replace

from cloudlb.availability import AvailabilityParams, is_available

__all__ = [
    "PolicyKind",
    "SchedulingMode",
    "UserBase",
    "VmSpec",
    "DataCenter",
    "LatencyMatrix",
    "AvailabilityConfig",
    "SimulationConfig",
    "ConfigError",
    "ConfigSyntaxError",
    "ConfigSchemaError",
    "parse_config",
    "serialize_config",
    "load_config",
    "validate_config",
    "default_paper_config",
]


class PolicyKind(enum.Enum):
    """VM load-balancing policy applied inside every data center."""

    ROUND_ROBIN = "rr"
    ESCE = "esce"
    THROTTLED = "throttled"


class SchedulingMode(enum.Enum):
    """How a VM shares its throughput among the tasks it holds."""

    TIME_SHARED = "ts"  # preemptive, processor sharing
    SPACE_SHARED = "ss"  # non-preemptive, FCFS


@dataclass(frozen=True)
class UserBase:
    id: str
    region: int
    users_peak: int = 1000
    users_offpeak: int = 100
    peak_hours: tuple[int, int] = (3, 9)
    requests_per_user_per_hour: float = 12
    request_size: int = 100
    request_length: float = 100


@dataclass(frozen=True)
class VmSpec:
    id: int
    mips: float = 200_000
    memory: int = 1024**3
    bandwidth: int = 1_000_000
    # inputs to the expected-availability rating, only used when enabled
    loss_rate: float = 0
    downtime_min: float = 0


@dataclass(frozen=True)
class DataCenter:
    id: str
    region: int
    vms: tuple[VmSpec, ...]


@dataclass(frozen=True)
class LatencyMatrix:
    """Symmetric one-way delays in milliseconds between regions.

    ``jitter_ms`` is the half-width of the uniform jitter added to every
    user-base <-> data-center leg.
    """

    one_way_delay: tuple[tuple[float, ...], ...]
    jitter_ms: float = 0

    @property
    def size(self) -> int:
        return len(self.one_way_delay)

    def delay(self, a: int, b: int) -> float:
        return self.one_way_delay[a][b]

    @classmethod
    def uniform(cls, regions: int, intra_ms: float, inter_ms: float,
                jitter_ms: float = 0) -> LatencyMatrix:
        rows = tuple(
            tuple(intra_ms if i == j else inter_ms for j in range(regions))
            for i in range(regions)
        )
        return cls(rows, jitter_ms)


@dataclass(frozen=True)
class AvailabilityConfig:
    """VM admission filter based on the expected-availability rating."""

    enabled: bool = False
    threshold: float = 0.95
    measurement_period_min: float = 60


@dataclass(frozen=True)
class SimulationConfig:
    regions: int
    user_bases: tuple[UserBase, ...]
    data_centers: tuple[DataCenter, ...]
    latency: LatencyMatrix
    policy: PolicyKind = PolicyKind.ROUND_ROBIN
    scheduling_mode: SchedulingMode = SchedulingMode.TIME_SHARED
    throttle_threshold: int = 1
    duration: float = 24
    seed: int = 0
    availability: AvailabilityConfig = field(default_factory=AvailabilityConfig)

    def with_policy(self, policy: PolicyKind,
                    mode: SchedulingMode | None = None) -> SimulationConfig:
        return replace(self, policy=policy,
                       scheduling_mode=self.scheduling_mode if mode is None else mode)


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigSyntaxError(ConfigError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ConfigSchemaError(ConfigError):
    def __init__(self, message: str, field_name: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


# --------------------------------------------------------------------------
# text format

_UB_PREFIX = "userbase "
_DC_PREFIX = "datacenter "


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _fmt_list(values) -> str:
    return ", ".join(_fmt(v) for v in values)


def serialize_config(cfg: SimulationConfig) -> str:
    """Render *cfg* in the documented text format (inverse of parse_config)."""
    out = ["[simulation]",
           f"regions = {cfg.regions}",
           f"policy = {cfg.policy.value}",
           f"scheduling_mode = {cfg.scheduling_mode.value}",
           f"throttle_threshold = {cfg.throttle_threshold}",
           f"duration_hours = {_fmt(cfg.duration)}",
           f"seed = {cfg.seed}",
           "",
           "[latency]",
           f"jitter_ms = {_fmt(cfg.latency.jitter_ms)}"]
    for i, row in enumerate(cfg.latency.one_way_delay):
        out.append(f"region{i} = {_fmt_list(row)}")
    av = cfg.availability
    out += ["",
            "[availability]",
            f"enabled = {_fmt(av.enabled)}",
            f"threshold = {_fmt(av.threshold)}",
            f"measurement_period_min = {_fmt(av.measurement_period_min)}"]
    for ub in cfg.user_bases:
        out += ["",
                f"[{_UB_PREFIX}{ub.id}]",
                f"region = {ub.region}",
                f"users_peak = {ub.users_peak}",
                f"users_offpeak = {ub.users_offpeak}",
                f"peak_start = {ub.peak_hours[0]}",
                f"peak_end = {ub.peak_hours[1]}",
                f"requests_per_user_per_hour = {_fmt(ub.requests_per_user_per_hour)}",
                f"request_size = {ub.request_size}",
                f"request_length = {_fmt(ub.request_length)}"]
    for dc in cfg.data_centers:
        out += ["",
                f"[{_DC_PREFIX}{dc.id}]",
                f"region = {dc.region}",
                f"vm_mips = {_fmt_list(v.mips for v in dc.vms)}",
                f"vm_memory = {_fmt_list(v.memory for v in dc.vms)}",
                f"vm_bandwidth = {_fmt_list(v.bandwidth for v in dc.vms)}"]
        if any(v.loss_rate or v.downtime_min for v in dc.vms):
            out += [f"vm_loss_rate = {_fmt_list(v.loss_rate for v in dc.vms)}",
                    f"vm_downtime_min = {_fmt_list(v.downtime_min for v in dc.vms)}"]
    return "\n".join(out) + "\n"


def _number(text: str, name: str, integer: bool = False):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    if integer:
        raise ConfigSchemaError(f"expected an integer, got {text!r}", name)
    try:
        return float(text)
    except ValueError:
        raise ConfigSchemaError(f"expected a number, got {text!r}", name) from None


def _numbers(text: str, name: str, integer: bool = False) -> tuple:
    parts = [p for p in text.split(",")]
    if not text.strip():
        return ()
    return tuple(_number(p, name, integer) for p in parts)


def _bool(text: str, name: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigSchemaError(f"expected true/false, got {text!r}", name)


class _Section:
    """Key lookup that remembers which keys were consumed."""

    def __init__(self, name: str, proxy):
        self.name = name
        self.proxy = proxy
        self.used: set[str] = set()

    def get(self, key: str, default=None, *, required: bool = False):
        self.used.add(key)
        if key in self.proxy:
            return self.proxy[key]
        if required:
            raise ConfigSchemaError("missing required key", f"[{self.name}] {key}")
        return default

    def path(self, key: str) -> str:
        return f"[{self.name}] {key}"

    def check_unknown(self):
        extra = sorted(set(self.proxy) - self.used)
        if extra:
            raise ConfigSchemaError("unknown key", self.path(extra[0]))


def parse_config(text: str) -> SimulationConfig:
    """Parse a scenario document; omitted optional keys take their defaults.

    Raises ConfigSyntaxError (with line number) for malformed text and
    ConfigSchemaError (naming the offending field) for structural problems.
    Semantic invariants are checked separately by :func:`validate_config`.
    """
    parser = configparser.ConfigParser(
        interpolation=None, strict=True, default_section="__defaults__",
        inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.DuplicateSectionError as exc:
        section = exc.section
        for prefix, what in ((_UB_PREFIX, "user base"), (_DC_PREFIX, "data center")):
            if section.startswith(prefix):
                ident = section[len(prefix):].strip()
                raise ConfigSchemaError(f"duplicate {what} id {ident!r}",
                                        f"[{section}]") from None
        raise ConfigSyntaxError(f"duplicate section [{section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigSyntaxError(
            f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigSyntaxError("key/value outside of any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigSyntaxError("malformed line (expected 'key = value')", line) from None

    known = {"simulation", "latency", "availability"}
    for name in parser.sections():
        if name not in known and not name.startswith((_UB_PREFIX, _DC_PREFIX)):
            raise ConfigSchemaError("unknown section", f"[{name}]")
    if "simulation" not in parser:
        raise ConfigSchemaError("missing section", "[simulation]")

    sim = _Section("simulation", parser["simulation"])
    regions = _number(sim.get("regions", required=True), sim.path("regions"), True)
    policy_text = sim.get("policy", PolicyKind.ROUND_ROBIN.value).strip().lower()
    try:
        policy = PolicyKind(policy_text)
    except ValueError:
        raise ConfigSchemaError(f"unknown policy {policy_text!r}", sim.path("policy")) from None
    mode_text = sim.get("scheduling_mode", SchedulingMode.TIME_SHARED.value).strip().lower()
    try:
        mode = SchedulingMode(mode_text)
    except ValueError:
        raise ConfigSchemaError(f"unknown scheduling mode {mode_text!r}",
                                sim.path("scheduling_mode")) from None
    threshold = _number(sim.get("throttle_threshold", "1"), sim.path("throttle_threshold"), True)
    duration = _number(sim.get("duration_hours", "24"), sim.path("duration_hours"))
    seed = _number(sim.get("seed", "0"), sim.path("seed"), True)
    sim.check_unknown()

    if "latency" in parser:
        lat = _Section("latency", parser["latency"])
        jitter = _number(lat.get("jitter_ms", "0"), lat.path("jitter_ms"))
        rows = []
        for i in range(max(regions, 0)):
            key = f"region{i}"
            row = _numbers(lat.get(key, required=True), lat.path(key))
            rows.append(row)
        lat.check_unknown()
        latency = LatencyMatrix(tuple(rows), jitter)
    else:
        latency = LatencyMatrix(tuple((0,) * regions for _ in range(max(regions, 0))))

    availability = AvailabilityConfig()
    if "availability" in parser:
        av = _Section("availability", parser["availability"])
        availability = AvailabilityConfig(
            enabled=_bool(av.get("enabled", "false"), av.path("enabled")),
            threshold=_number(av.get("threshold", "0.95"), av.path("threshold")),
            measurement_period_min=_number(av.get("measurement_period_min", "60"),
                                           av.path("measurement_period_min")),
        )
        av.check_unknown()

    user_bases = []
    data_centers = []
    for name in parser.sections():
        if name.startswith(_UB_PREFIX):
            s = _Section(name, parser[name])
            ub = UserBase(
                id=name[len(_UB_PREFIX):].strip(),
                region=_number(s.get("region", required=True), s.path("region"), True),
                users_peak=_number(s.get("users_peak", "1000"), s.path("users_peak"), True),
                users_offpeak=_number(s.get("users_offpeak", "100"), s.path("users_offpeak"), True),
                peak_hours=(_number(s.get("peak_start", "3"), s.path("peak_start"), True),
                            _number(s.get("peak_end", "9"), s.path("peak_end"), True)),
                requests_per_user_per_hour=_number(
                    s.get("requests_per_user_per_hour", "12"),
                    s.path("requests_per_user_per_hour")),
                request_size=_number(s.get("request_size", "100"), s.path("request_size"), True),
                request_length=_number(s.get("request_length", "100"), s.path("request_length")),
            )
            s.check_unknown()
            user_bases.append(ub)
        elif name.startswith(_DC_PREFIX):
            s = _Section(name, parser[name])
            mips = _numbers(s.get("vm_mips", required=True), s.path("vm_mips"))
            n = len(mips)

            def column(key, default, integer=False):
                raw = s.get(key)
                if raw is None:
                    return (default,) * n
                values = _numbers(raw, s.path(key), integer)
                if len(values) != n:
                    raise ConfigSchemaError(
                        f"expected {n} values (one per VM), got {len(values)}", s.path(key))
                return values

            memory = column("vm_memory", VmSpec.memory, True)
            bandwidth = column("vm_bandwidth", VmSpec.bandwidth, True)
            loss = column("vm_loss_rate", 0)
            down = column("vm_downtime_min", 0)
            vms = tuple(VmSpec(i, mips[i], memory[i], bandwidth[i], loss[i], down[i])
                        for i in range(n))
            dc = DataCenter(
                id=name[len(_DC_PREFIX):].strip(),
                region=_number(s.get("region", required=True), s.path("region"), True),
                vms=vms,
            )
            s.check_unknown()
            data_centers.append(dc)

    return SimulationConfig(
        regions=regions,
        user_bases=tuple(user_bases),
        data_centers=tuple(data_centers),
        latency=latency,
        policy=policy,
        scheduling_mode=mode,
        throttle_threshold=threshold,
        duration=duration,
        seed=seed,
        availability=availability,
    )


def load_config(path) -> SimulationConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------
# validation

def validate_config(cfg: SimulationConfig) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems: list[str] = []
    R = cfg.regions
    if R < 1:
        problems.append(f"simulation: regions must be >= 1 (got {R})")
    if cfg.duration <= 0:
        problems.append(f"simulation: duration must be > 0 (got {cfg.duration})")
    if cfg.throttle_threshold < 1:
        problems.append(
            f"simulation: throttle_threshold must be >= 1 (got {cfg.throttle_threshold})")
    if not 0 <= cfg.seed < 2**64:
        problems.append(f"simulation: seed must fit in 64 bits (got {cfg.seed})")

    delays = cfg.latency.one_way_delay
    if len(delays) != R or any(len(row) != R for row in delays):
        problems.append(f"latency: matrix must be {R}x{R}")
    else:
        for i in range(R):
            for j in range(R):
                if delays[i][j] < 0:
                    problems.append(f"latency: delay[{i}][{j}] must be >= 0")
                if j > i and delays[i][j] != delays[j][i]:
                    problems.append(f"latency: delay[{i}][{j}] != delay[{j}][{i}] (not symmetric)")
    if cfg.latency.jitter_ms < 0:
        problems.append("latency: jitter_ms must be >= 0")

    if not cfg.user_bases:
        problems.append("scenario: at least one user base is required")
    if not cfg.data_centers:
        problems.append("scenario: at least one data center is required")

    seen: set[str] = set()
    for ub in cfg.user_bases:
        who = f"user base {ub.id}"
        if ub.id in seen:
            problems.append(f"{who}: duplicate id")
        seen.add(ub.id)
        if not 0 <= ub.region < R:
            problems.append(f"{who}: region {ub.region} does not exist")
        if not ub.users_peak >= ub.users_offpeak >= 0:
            problems.append(f"{who}: need users_peak >= users_offpeak >= 0")
        if ub.requests_per_user_per_hour < 0:
            problems.append(f"{who}: requests_per_user_per_hour must be >= 0")
        if ub.request_length <= 0:
            problems.append(f"{who}: request_length must be > 0")
        if ub.request_size < 0:
            problems.append(f"{who}: request_size must be >= 0")
        start, end = ub.peak_hours
        if not (0 <= start <= 24 and 0 <= end <= 24):
            problems.append(f"{who}: peak hours must lie in 0..24")

    seen = set()
    av = cfg.availability
    for dc in cfg.data_centers:
        who = f"data center {dc.id}"
        if dc.id in seen:
            problems.append(f"{who}: duplicate id")
        seen.add(dc.id)
        if not 0 <= dc.region < R:
            problems.append(f"{who}: region {dc.region} does not exist")
        if not dc.vms:
            problems.append(f"{who}: at least one VM is required")
        for vm in dc.vms:
            if vm.mips <= 0:
                problems.append(f"{who} VM {vm.id}: mips must be > 0")
            if vm.loss_rate < 0 or vm.downtime_min < 0:
                problems.append(f"{who} VM {vm.id}: loss_rate and downtime_min must be >= 0")
        if av.enabled and dc.vms:
            if av.measurement_period_min > 0 and 0 <= av.threshold <= 1 and not any(
                    is_available(AvailabilityParams(av.measurement_period_min,
                                                    vm.loss_rate, vm.downtime_min),
                                 av.threshold)
                    for vm in dc.vms if vm.loss_rate >= 0 and vm.downtime_min >= 0):
                problems.append(f"{who}: no VM meets the availability threshold")

    if av.enabled:
        if av.measurement_period_min <= 0:
            problems.append("availability: measurement_period_min must be > 0")
        if not 0 <= av.threshold <= 1:
            problems.append("availability: threshold must lie in [0, 1]")
    return problems


# --------------------------------------------------------------------------
# reference scenario

def default_paper_config() -> SimulationConfig:
    """Six regions, each with one user base and one data center of five VMs.

    Unloaded round trips land near 50 ms: 25 ms each way inside a region
    with +/-6 ms jitter per leg, plus 0.5 ms of execution (100 MI on a
    200,000 MIPS VM). Regions are 100 ms apart.
    """
    n = 6
    user_bases = tuple(UserBase(id=f"UB{i + 1}", region=i) for i in range(n))
    data_centers = tuple(
        DataCenter(id=f"DC{i + 1}", region=i, vms=tuple(VmSpec(j) for j in range(5)))
        for i in range(n)
    )
    return SimulationConfig(
        regions=n,
        user_bases=user_bases,
        data_centers=data_centers,
        latency=LatencyMatrix.uniform(n, 25, 100, jitter_ms=6),
    )
