"""Output files for a finished run.

All times are written in milliseconds with exactly three decimals (the
microsecond clock printed without float rounding), so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from cloudlb.engine import format_time
from cloudlb.metrics import SummaryTable, hourly_loading, summarize
from cloudlb.simulation import SimulationResult

__all__ = [
    "RESPONSES_HEADER",
    "SERVICES_HEADER",
    "LOADING_HEADER",
    "ASSIGNMENTS_HEADER",
    "ARRIVALS_HEADER",
    "summary_dict",
    "write_summary",
    "write_responses",
    "write_services",
    "write_loading",
    "write_plot_data",
    "write_assignments",
    "write_arrivals",
    "write_run",
]

RESPONSES_HEADER = ("request_id", "ub", "dc", "created_ms", "returned_ms", "response_ms",
                    "migrations")
SERVICES_HEADER = ("request_id", "dc", "vm", "dc_arrival_ms", "service_start_ms",
                   "service_end_ms", "migration_ms", "queue_wait_ms", "service_ms",
                   "processing_ms")
LOADING_HEADER = ("dc", "hour", "count")
ASSIGNMENTS_HEADER = ("request_id", "dc", "vm", "migrations")
ARRIVALS_HEADER = ("request_id", "ub", "created_ms")


def summary_dict(result: SimulationResult) -> dict:
    cfg = result.config
    tables = summarize(result.store)
    return {
        "scenario": {
            "policy": cfg.policy.value,
            "scheduling_mode": cfg.scheduling_mode.value,
            "seed": cfg.seed,
            "duration_hours": cfg.duration,
            "throttle_threshold": cfg.throttle_threshold,
        },
        "requests": {
            "generated": result.generated,
            "returned": result.returned,
            "dropped": result.dropped,
            "migrated": result.migrated,
        },
        "events": {
            "processed": result.stats.processed,
            "cancelled": result.stats.cancelled,
            "final_clock_ms": format_time(result.stats.clock),
        },
        "peak_present": dict(result.peak_present),
        "tables": {name: t.to_dict() for name, t in tables.items()},
        "loading": hourly_loading(result.store),
    }


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_summary(result: SimulationResult, path) -> dict:
    data = summary_dict(result)
    _dump(data, Path(path))
    return data


def _writer(path: Path, header):
    fh = open(path, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    return fh, w


def write_responses(result: SimulationResult, path) -> None:
    ubs = [ub.id for ub in result.config.user_bases]
    dcs = [dc.id for dc in result.config.data_centers]
    fh, w = _writer(Path(path), RESPONSES_HEADER)
    with fh:
        w.writerows((r.id, ubs[r.source_ub], dcs[r.assigned_dc], format_time(r.created),
                     format_time(r.returned), format_time(r.response), r.migrations)
                    for r in result.requests)


def write_services(result: SimulationResult, path) -> None:
    dcs = [dc.id for dc in result.config.data_centers]
    fh, w = _writer(Path(path), SERVICES_HEADER)
    with fh:
        w.writerows((r.id, dcs[r.assigned_dc], r.assigned_vm, format_time(r.dc_arrival),
                     format_time(r.service_start), format_time(r.service_end),
                     format_time(r.migration_us), format_time(r.queue_wait),
                     format_time(r.service), format_time(r.processing))
                    for r in result.requests)


def write_loading(result: SimulationResult, path) -> None:
    fh, w = _writer(Path(path), LOADING_HEADER)
    with fh:
        for dc, counts in hourly_loading(result.store).items():
            w.writerows((dc, h, c) for h, c in enumerate(counts))


def _table_columns(table: SummaryTable, path: Path, what: str) -> None:
    lines = [f"# {what}: entity index vs average (ms)"]
    if table.empty:
        lines.append("# empty: no samples")
    for i, row in enumerate(table.rows):
        lines.append(f"# {i} = {row.entity}  (min {row.min_ms:.3f}, max {row.max_ms:.3f})")
    lines += [f"{i} {row.avg_ms:.6f}" for i, row in enumerate(table.rows)]
    path.write_text("\n".join(lines) + "\n")


def write_plot_data(result: SimulationResult, out_dir) -> None:
    """Two-column files for the response, processing and loading figures.

    ``fig_loading.dat`` holds one block per data center (hour vs count),
    blocks separated by blank lines.
    """
    out = Path(out_dir)
    tables = summarize(result.store)
    _table_columns(tables["response"], out / "fig_response.dat", "response time per user base")
    _table_columns(tables["processing"], out / "fig_service.dat",
                   "processing time per data center")
    blocks = []
    for dc, counts in hourly_loading(result.store).items():
        blocks.append("\n".join([f"# {dc}: hour vs requests serviced"]
                                + [f"{h} {c}" for h, c in enumerate(counts)]))
    (out / "fig_loading.dat").write_text("\n\n".join(blocks) + "\n")


def write_assignments(result: SimulationResult, path) -> None:
    dcs = [dc.id for dc in result.config.data_centers]
    fh, w = _writer(Path(path), ASSIGNMENTS_HEADER)
    with fh:
        w.writerows((r.id, dcs[r.assigned_dc], r.assigned_vm, r.migrations)
                    for r in result.requests)


def write_arrivals(result: SimulationResult, path) -> None:
    ubs = [ub.id for ub in result.config.user_bases]
    fh, w = _writer(Path(path), ARRIVALS_HEADER)
    with fh:
        w.writerows((r.id, ubs[r.source_ub], format_time(r.created)) for r in result.requests)


def write_run(result: SimulationResult, out_dir, *, assignments: bool = False,
              arrivals: bool = False) -> dict:
    """Write the standard output set into *out_dir*; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_responses(result, out / "responses.csv")
    write_services(result, out / "services.csv")
    write_loading(result, out / "loading.csv")
    write_plot_data(result, out)
    if assignments:
        write_assignments(result, out / "assignments.csv")
    if arrivals:
        write_arrivals(result, out / "arrivals.csv")
    return write_summary(result, out / "summary.json")
