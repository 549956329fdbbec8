import os
from logging import Logger
from typing import (
    Dict,
    List,
    Optional,
    Sequence,
)

import pandas as pd
import ujson

from config.config import RunConfig
from src.tools.cachesim import SimReport
from src.tools.models import (
    AccessClass,
    ClassCounts,
    DistanceMode,
    TraceMeta,
    WritePolicy,
)
from src.tools.orchestrator import IntervalReport
from src.tools.rdist import (
    HitRatioFn,
    ReuseProfile,
)
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)

CLASS_COUNT_COLUMNS = ["vm_id", "interval"] + [cls.value for cls in AccessClass]
HISTOGRAM_COLUMNS = ["vm_id", "mode", "distance", "count"]
HIT_RATIO_COLUMNS = ["vm_id", "breakpoint_blocks", "hit_ratio"]
SIM_COLUMNS = [
    "vm_id",
    "interval",
    "size_blocks",
    "policy",
    "read_hits",
    "read_misses",
    "ssd_writes",
    "hdd_reads",
    "hdd_writes",
    "latency_us",
]
PLAN_COLUMNS = ["interval", "vm_id", "demand_blocks", "alloc_blocks", "feasible"]
POLICY_COLUMNS = ["interval", "vm_id", "write_ratio", "policy"]


def class_counts_row(vm_id: int, interval: int, counts: ClassCounts) -> Dict:
    return {"vm_id": vm_id, "interval": interval, **counts.as_dict()}


def histogram_df(vm_id: int, profile: ReuseProfile) -> pd.DataFrame:
    rows = [
        {"vm_id": vm_id, "mode": mode.value, "distance": distance, "count": count}
        for mode in DistanceMode
        for distance, count in sorted(profile.histogram(mode).items())
    ]
    return pd.DataFrame(rows, columns=HISTOGRAM_COLUMNS)


def hit_ratio_df(vm_id: int, hit_fn: HitRatioFn) -> pd.DataFrame:
    rows = [
        {"vm_id": vm_id, "breakpoint_blocks": b, "hit_ratio": h}
        for b, h in zip(hit_fn.breakpoints, hit_fn.values)
    ]
    return pd.DataFrame(rows, columns=HIT_RATIO_COLUMNS)


def sim_row(
    vm_id: int, interval: int, size_blocks: int, policy: WritePolicy, sim: SimReport
) -> Dict:
    return {
        "vm_id": vm_id,
        "interval": interval,
        "size_blocks": size_blocks,
        "policy": WritePolicy(policy).value,
        "read_hits": sim.read_hits,
        "read_misses": sim.read_misses,
        "ssd_writes": sim.ssd_writes,
        "hdd_reads": sim.hdd_reads,
        "hdd_writes": sim.hdd_writes,
        "latency_us": sim.latency_total_us,
    }


def run_tables(reports: Sequence[IntervalReport]) -> Dict[str, pd.DataFrame]:
    """
    Flattens interval reports into the per-interval CSV tables of a run directory.

    Returns:
        Dict[str, pd.DataFrame]: file name -> table.
    """
    counts, sims, plans, policies = [], [], [], []
    for report in reports:
        for vm_id, vm in sorted(report.vms.items()):
            counts.append(class_counts_row(vm_id, report.interval, vm.counts))
            sims.append(sim_row(vm_id, report.interval, vm.size_blocks, vm.policy, vm.sim))
            plans.append(
                {
                    "interval": report.interval,
                    "vm_id": vm_id,
                    "demand_blocks": vm.demand_blocks,
                    "alloc_blocks": vm.alloc_blocks,
                    "feasible": report.feasible,
                }
            )
            policies.append(
                {
                    "interval": report.interval,
                    "vm_id": vm_id,
                    "write_ratio": vm.write_ratio,
                    "policy": vm.next_policy.value,
                }
            )
    return {
        "class_counts.csv": pd.DataFrame(counts, columns=CLASS_COUNT_COLUMNS),
        "sim.csv": pd.DataFrame(sims, columns=SIM_COLUMNS),
        "plan.csv": pd.DataFrame(plans, columns=PLAN_COLUMNS),
        "policy.csv": pd.DataFrame(policies, columns=POLICY_COLUMNS),
    }


def write_tables(out_dir: str, tables: Dict[str, pd.DataFrame]) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, df in tables.items():
        path = os.path.join(out_dir, name)
        df.to_csv(path, index=False)
        paths.append(path)
        logger.info(f"Saved {len(df)} rows to {path}")
    return paths


def write_run_directory(
    out_dir: str,
    cfg: RunConfig,
    reports: Sequence[IntervalReport],
    trace: TraceMeta,
    timings: Optional[Sequence[float]] = None,
) -> List[str]:
    """
    Writes the per-interval CSVs and a run.meta file capturing the full configuration
    and a description of the replayed trace.

    Per-interval wall times are written only when ``cfg.record_timing`` is set.
    """
    paths = write_tables(out_dir, run_tables(reports))
    meta = {
        "config": cfg.to_dict(),
        "trace": {
            "block_size_bytes": trace.block_size_bytes,
            "vm_count": trace.vm_count,
            "source": trace.source.value,
        },
        "vm_ids": sorted({vm_id for report in reports for vm_id in report.vms}),
        "intervals": len(reports),
    }
    if cfg.record_timing and timings is not None:
        meta["interval_seconds"] = list(timings)
    meta_path = os.path.join(out_dir, "run.meta")
    with open(meta_path, "w", encoding="utf8") as f:
        f.write(ujson.dumps(meta, sort_keys=True, indent=2))
        f.write("\n")
    paths.append(meta_path)
    logger.info(f"Saved run metadata to {meta_path}")
    return paths
