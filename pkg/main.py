import argparse
import os
import sys
from logging import Logger
from typing import (
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
)

import pandas as pd

from config.config import (
    ConfigError,
    Mode,
    RunConfig,
    build_run_config,
    load_config_file,
)
from src.tools.cachesim import (
    CacheConfig,
    policy_sweep,
    simulate,
)
from src.tools.classifier import AccessClassifier
from src.tools.metrics import (
    compare_runs,
    summarize_run,
)
from src.tools.models import (
    DistanceMode,
    IoRequest,
    TraceMeta,
    TraceSource,
    WritePolicy,
)
from src.tools.orchestrator import Orchestrator
from src.tools.rdist import (
    hit_ratio_fn,
    stack_distance,
    trd_based_size,
    urd_based_size,
)
from src.utils.logging_utils import get_logger
from src.utils.reports import (
    CLASS_COUNT_COLUMNS,
    HISTOGRAM_COLUMNS,
    HIT_RATIO_COLUMNS,
    SIM_COLUMNS,
    class_counts_row,
    histogram_df,
    hit_ratio_df,
    sim_row,
    write_run_directory,
    write_tables,
)
from src.utils.trace_io import (
    MsrParser,
    TraceFormatError,
    describe_traces,
    expand_multiblock,
    load_trace,
    sniff_source,
    split_by_vm,
)
from src.utils.workloads import (
    default_mix,
    gen_reuse_stable_mix,
)

logger: Logger = get_logger(name=__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2

# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "block_size": "block_size_bytes",
    "interval_ms": "interval_ms",
    "ticks_per_ms": "ticks_per_ms",
    "capacity_blocks": "capacity_blocks",
    "wthreshold": "wthreshold",
    "cmin": "c_min",
    "t_hdd_us": "t_hdd_us",
    "t_ssd_us": "t_ssd_us",
    "mode": "mode",
    "seed": "seed",
    "profile_window": "profile_window",
    "force_ro": "force_ro_vms",
    "timing": "record_timing",
}


def _common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="YAML key-value sidecar config")
    parent.add_argument("--block-size", type=int, help="block size in bytes")
    parent.add_argument("--interval-ms", type=int, help="interval length in trace milliseconds")
    parent.add_argument("--ticks-per-ms", type=int, help="trace timestamp units per millisecond")
    parent.add_argument("--capacity-blocks", type=int, help="total SSD cache capacity")
    parent.add_argument("--wthreshold", type=float, help="WAW+WAR ratio that selects RO")
    parent.add_argument("--cmin", type=int, help="minimum per-VM allocation in blocks")
    parent.add_argument("--t-hdd-us", type=float, help="HDD access latency")
    parent.add_argument("--t-ssd-us", type=float, help="SSD access latency")
    parent.add_argument("--mode", choices=[m.value for m in Mode])
    parent.add_argument("--seed", type=int)
    parent.add_argument("--profile-window", choices=["interval", "cumulative"])
    parent.add_argument("--force-ro", type=int, action="append", metavar="VM")
    parent.add_argument("--timing", action="store_const", const=True)
    parent.add_argument("--out", default="out", help="output directory")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _common_flags()
    parser = argparse.ArgumentParser(
        prog="eci-cache", description="Request-type-aware SSD cache partitioning toolkit."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    inspect = sub.add_parser("inspect", parents=[parent], help="summarize traces")
    inspect.add_argument("traces", nargs="+")

    profile = sub.add_parser("profile", parents=[parent], help="reuse-distance profile")
    profile.add_argument("trace")

    sim = sub.add_parser("simulate", parents=[parent], help="single-VM cache simulation")
    sim.add_argument("trace")
    sim.add_argument("--size", type=int, required=True, help="cache size in blocks")
    sim.add_argument("--policy", choices=["wb", "wt", "ro", "all"], default="wb")

    for name, helptext in (("run", "orchestrated multi-VM run"), ("compare", "ECI vs baseline")):
        cmd = sub.add_parser(name, parents=[parent], help=helptext)
        cmd.add_argument("traces", nargs="*")
        cmd.add_argument("--synthetic-mix", type=int, metavar="N", help="use an N-VM synthetic mix")
        cmd.add_argument("--intervals", type=int, default=20, help="intervals of the synthetic mix")
    sub.choices["compare"].add_argument(
        "--baseline-mode", choices=[m.value for m in Mode], default=Mode.TRD_BASELINE.value
    )
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {field: getattr(args, flag) for flag, field in _FLAG_FIELDS.items()}
    return build_run_config(load_config_file(args.config), overrides)


def load_traces(paths: Sequence[str], cfg: RunConfig) -> Dict[int, List[IoRequest]]:
    """Loads every trace with one shared VM registry and returns time-sorted per-VM streams."""
    vm_map = cfg.vm_key_map() or None
    parser = MsrParser(cfg.block_size_bytes, vm_map)
    requests: List[IoRequest] = []
    for path in paths:
        requests.extend(load_trace(path, cfg.block_size_bytes, parser))
    return {
        vm_id: sorted(stream, key=lambda req: req.ts)
        for vm_id, stream in split_by_vm(requests).items()
    }


def trace_meta(
    paths: Sequence[str], traces: Dict[int, List[IoRequest]], cfg: RunConfig
) -> TraceMeta:
    sources = {sniff_source(path) for path in paths}
    source = sources.pop() if len(sources) == 1 else TraceSource.MSR_CSV
    return describe_traces(traces, cfg.block_size_bytes, source)


def _workload(
    args: argparse.Namespace, cfg: RunConfig
) -> Tuple[Dict[int, List[IoRequest]], TraceMeta]:
    if args.synthetic_mix:
        traces = gen_reuse_stable_mix(
            default_mix(args.synthetic_mix), args.intervals, cfg.interval_ticks, cfg.seed
        )
        return traces, describe_traces(traces, cfg.block_size_bytes, TraceSource.SYNTHETIC)
    if not args.traces:
        raise ConfigError("give trace files or --synthetic-mix")
    traces = load_traces(args.traces, cfg)
    return traces, trace_meta(args.traces, traces, cfg)


def cmd_inspect(args: argparse.Namespace, cfg: RunConfig) -> int:
    traces = load_traces(args.traces, cfg)
    meta = trace_meta(args.traces, traces, cfg)
    print(
        f"source={meta.source.value} vm_count={meta.vm_count} "
        f"block_size_bytes={meta.block_size_bytes}"
    )
    rows = []
    for vm_id, stream in traces.items():
        blocks = expand_multiblock(stream)
        classifier = AccessClassifier()
        classifier.classify(blocks)
        counts = classifier.take_counts()
        rows.append(class_counts_row(vm_id, 0, counts))
        classes = " ".join(f"{name}={value}" for name, value in counts.as_dict().items())
        print(
            f"vm_id={vm_id} requests={len(stream)} "
            f"distinct_blocks={len({req.block for req in blocks})} {classes}"
        )
    write_tables(args.out, {"class_counts.csv": pd.DataFrame(rows, columns=CLASS_COUNT_COLUMNS)})
    return EXIT_OK


def cmd_profile(args: argparse.Namespace, cfg: RunConfig) -> int:
    traces = load_traces([args.trace], cfg)
    stem = os.path.splitext(os.path.basename(args.trace))[0]
    if not traces:
        print("max_trd=0 max_urd=0 size_trd=0 size_urd=0")
        write_tables(
            args.out,
            {
                f"{stem}_hist.csv": pd.DataFrame(columns=HISTOGRAM_COLUMNS),
                f"{stem}_hrf.csv": pd.DataFrame(columns=HIT_RATIO_COLUMNS),
            },
        )
        return EXIT_OK

    mode = DistanceMode.URD if cfg.mode is Mode.ECI else DistanceMode.TRD
    histograms, hit_fns = [], []
    for vm_id, stream in traces.items():
        profile = stack_distance(AccessClassifier().classify(expand_multiblock(stream)))
        histograms.append(histogram_df(vm_id, profile))
        hit_fns.append(hit_ratio_df(vm_id, hit_ratio_fn(profile, mode)))
        print(
            f"vm_id={vm_id} max_trd={profile.max_trd} max_urd={profile.max_urd} "
            f"size_trd={trd_based_size(profile)} size_urd={urd_based_size(profile)}"
        )
    write_tables(
        args.out,
        {
            f"{stem}_hist.csv": pd.concat(histograms, ignore_index=True),
            f"{stem}_hrf.csv": pd.concat(hit_fns, ignore_index=True),
        },
    )
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, cfg: RunConfig) -> int:
    traces = load_traces([args.trace], cfg)
    rows = []
    for vm_id, stream in traces.items():
        stream = expand_multiblock(stream)
        if args.policy == "all":
            results = policy_sweep(stream, args.size, cfg.t_hdd_us, cfg.t_ssd_us)
        else:
            policy = WritePolicy(args.policy.upper())
            classified = AccessClassifier().classify(stream)
            results = {
                policy: simulate(
                    classified, CacheConfig(args.size, policy, cfg.t_hdd_us, cfg.t_ssd_us)
                )
            }
        for policy, report in results.items():
            rows.append(sim_row(vm_id, 0, args.size, policy, report))
            print(
                f"vm_id={vm_id} policy={policy.value} read_hits={report.read_hits} "
                f"read_misses={report.read_misses} ssd_writes={report.ssd_writes} "
                f"latency_us={report.latency_total_us}"
            )
    write_tables(args.out, {"sim.csv": pd.DataFrame(rows, columns=SIM_COLUMNS)})
    return EXIT_OK


def _run_mode(traces, meta: TraceMeta, cfg: RunConfig, mode: Mode, out_dir: str):
    run_cfg = build_run_config({**cfg.to_dict(), "mode": mode.value}, {})
    orchestrator = Orchestrator(run_cfg)
    reports = orchestrator.run(traces)
    write_run_directory(out_dir, run_cfg, reports, meta, orchestrator.timings)
    return reports


def cmd_run(args: argparse.Namespace, cfg: RunConfig) -> int:
    traces, meta = _workload(args, cfg)
    reports = _run_mode(traces, meta, cfg, cfg.mode, args.out)
    summary = summarize_run(reports)
    write_tables(args.out, {"summary.csv": summary})
    print(summary.to_string(index=False))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, cfg: RunConfig) -> int:
    traces, meta = _workload(args, cfg)
    eci = _run_mode(traces, meta, cfg, Mode.ECI, os.path.join(args.out, "eci"))
    baseline = _run_mode(
        traces, meta, cfg, Mode(args.baseline_mode), os.path.join(args.out, "baseline")
    )
    table = compare_runs(eci, baseline)
    write_tables(args.out, {"compare.csv": table})
    print(table.to_string(index=False))
    return EXIT_OK


COMMANDS = {
    "inspect": cmd_inspect,
    "profile": cmd_profile,
    "simulate": cmd_simulate,
    "run": cmd_run,
    "compare": cmd_compare,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg.validate()
        return COMMANDS[args.command](args, cfg)
    except (TraceFormatError, ConfigError, FileNotFoundError) as e:
        logger.error(f"Input error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:
        logger.exception(f"Run failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
