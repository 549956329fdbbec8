import math
from logging import Logger
from typing import (
    Dict,
    List,
    Optional,
    Sequence,
)

import pandas as pd

from src.tools.cachesim import SimReport
from src.tools.orchestrator import IntervalReport
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)

SUMMARY_COLUMNS = [
    "vm_id",
    "requests",
    "reads",
    "read_hits",
    "hit_ratio",
    "mean_latency_us",
    "allocated_blocks",
    "ssd_writes",
    "perf_per_cost",
]


def perf_per_cost(report: IntervalReport) -> Dict[int, float]:
    """
    Returns (1 / mean latency) / allocated blocks for every VM of an interval.

    VMs that ran with no cache space, or whose latency is zero, are left out.
    """
    ppc = {}
    for vm_id, vm_report in sorted(report.vms.items()):
        latency = vm_report.sim.mean_latency_us
        if vm_report.size_blocks <= 0 or latency <= 0:
            logger.debug(f"Interval {report.interval} VM {vm_id} excluded from ppc.")
            continue
        ppc[vm_id] = (1.0 / latency) / vm_report.size_blocks
    return ppc


def aggregate_perf_per_cost(report: IntervalReport) -> Optional[float]:
    values = list(perf_per_cost(report).values())
    return sum(values) / len(values) if values else None


def _summary_row(vm_id, sim: SimReport, allocated: int, intervals: int) -> Dict:
    mean_alloc = allocated / intervals if intervals else 0.0
    latency = sim.mean_latency_us
    ppc = (1.0 / latency) / mean_alloc if latency > 0 and mean_alloc > 0 else math.nan
    return {
        "vm_id": vm_id,
        "requests": sim.requests,
        "reads": sim.reads,
        "read_hits": sim.read_hits,
        "hit_ratio": sim.read_hit_ratio,
        "mean_latency_us": latency,
        "allocated_blocks": allocated,
        "ssd_writes": sim.ssd_writes,
        "perf_per_cost": ppc,
    }


def summarize_run(reports: Sequence[IntervalReport]) -> pd.DataFrame:
    """
    Totals a run per VM plus an ``all`` row.

    allocated_blocks is the sum over intervals of the cache size in effect; perf_per_cost
    uses the mean size over the intervals a VM was active. The ``all`` row averages the
    per-VM perf_per_cost values.
    """
    sims: Dict[int, SimReport] = {}
    allocated: Dict[int, int] = {}
    active: Dict[int, int] = {}
    for report in reports:
        for vm_id, vm_report in report.vms.items():
            sims[vm_id] = sims.get(vm_id, SimReport()) + vm_report.sim
            allocated[vm_id] = allocated.get(vm_id, 0) + vm_report.size_blocks
            active[vm_id] = active.get(vm_id, 0) + 1

    rows: List[Dict] = [
        _summary_row(vm_id, sims[vm_id], allocated[vm_id], active[vm_id])
        for vm_id in sorted(sims)
    ]
    total = SimReport()
    for sim in sims.values():
        total = total + sim
    row = _summary_row("all", total, sum(allocated.values()), 1)
    per_vm = [r["perf_per_cost"] for r in rows if not math.isnan(r["perf_per_cost"])]
    row["perf_per_cost"] = sum(per_vm) / len(per_vm) if per_vm else math.nan
    rows.append(row)

    df = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    logger.info(f"Summarized run: {len(rows) - 1} VMs, {len(reports)} intervals.")
    return df


def _ratio(numerator: float, denominator: float) -> float:
    if math.isnan(numerator) and math.isnan(denominator):
        return 1.0
    if denominator == 0:
        return 1.0 if numerator == 0 else math.nan
    return numerator / denominator


def compare_runs(
    eci_reports: Sequence[IntervalReport], baseline_reports: Sequence[IntervalReport]
) -> pd.DataFrame:
    """
    Builds the side-by-side comparison of two runs over the same traces.

    Args:
        eci_reports (Sequence[IntervalReport]): Reports of the URD-sized run.
        baseline_reports (Sequence[IntervalReport]): Reports of the baseline run.

    Returns:
        pd.DataFrame: One row per VM plus an ``all`` row, with per-side values and the
        perf-per-cost and ssd-writes ratios (ECI / baseline).
    """
    eci = summarize_run(eci_reports).set_index("vm_id")
    base = summarize_run(baseline_reports).set_index("vm_id")
    if list(eci.index) != list(base.index):
        logger.error("Compared runs cover different VMs.")
        raise ValueError("runs cover different VMs")

    rows = []
    for vm_id in eci.index:
        e, b = eci.loc[vm_id], base.loc[vm_id]
        rows.append(
            {
                "vm_id": vm_id,
                "hit_ratio_eci": e["hit_ratio"],
                "hit_ratio_baseline": b["hit_ratio"],
                "mean_latency_eci_us": e["mean_latency_us"],
                "mean_latency_baseline_us": b["mean_latency_us"],
                "allocated_blocks_eci": int(e["allocated_blocks"]),
                "allocated_blocks_baseline": int(b["allocated_blocks"]),
                "ppc_ratio": _ratio(e["perf_per_cost"], b["perf_per_cost"]),
                "ssd_writes_eci": int(e["ssd_writes"]),
                "ssd_writes_baseline": int(b["ssd_writes"]),
                "ssd_writes_ratio": _ratio(e["ssd_writes"], b["ssd_writes"]),
            }
        )
    df = pd.DataFrame(rows)
    logger.info(f"Compared runs over {len(rows) - 1} VMs.")
    return df
