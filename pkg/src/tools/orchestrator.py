import time
from collections import Counter
from dataclasses import (
    dataclass,
    field,
)
from logging import Logger
from typing import (
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
)

from config.config import (
    ConfigError,
    Mode,
    ProfileWindow,
    RunConfig,
)
from src.tools.cachesim import (
    CacheConfig,
    CacheSimulator,
    SimReport,
)
from src.tools.classifier import (
    AccessClassifier,
    write_ratio,
)
from src.tools.models import (
    ClassCounts,
    DistanceMode,
    IoRequest,
    WritePolicy,
)
from src.tools.partitioner import (
    PartitionProblem,
    VmDemand,
    allocate,
)
from src.tools.policy import PolicyState
from src.tools.rdist import (
    HitRatioFn,
    ReuseProfile,
    ReuseProfiler,
    hit_ratio_fn,
    trd_based_size,
    urd_based_size,
)
from src.utils.logging_utils import get_logger
from src.utils.trace_io import expand_multiblock

logger: Logger = get_logger(name=__name__)


@dataclass
class VmIntervalReport:
    """
    What one VM did in one interval and what was decided for the next one.

    size_blocks and policy are the settings in effect while the interval was replayed;
    alloc_blocks and next_policy are the decisions taken from this interval's profile.
    """

    vm_id: int
    requests: int
    size_blocks: int
    policy: WritePolicy
    sim: SimReport
    counts: ClassCounts
    profile: ReuseProfile
    hit_fn: HitRatioFn
    demand_blocks: int
    alloc_blocks: int
    next_policy: WritePolicy
    write_ratio: Optional[float]


@dataclass
class IntervalReport:
    interval: int
    vms: Dict[int, VmIntervalReport] = field(default_factory=dict)
    feasible: bool = True
    objective_us: float = 0.0

    @property
    def aggregate(self) -> SimReport:
        total = SimReport()
        for vm_report in self.vms.values():
            total = total + vm_report.sim
        return total

    @property
    def aggregate_latency_us(self) -> float:
        return self.aggregate.latency_total_us

    @property
    def aggregate_ssd_writes(self) -> int:
        return self.aggregate.ssd_writes

    @property
    def allocated_blocks(self) -> int:
        return sum(vm_report.size_blocks for vm_report in self.vms.values())


class _VmState:
    def __init__(self, cfg: RunConfig) -> None:
        self.classifier = AccessClassifier()
        self.simulator = CacheSimulator(
            CacheConfig(cfg.c_min, WritePolicy.WB, cfg.t_hdd_us, cfg.t_ssd_us)
        )
        self.profiler: Optional[ReuseProfiler] = None
        self.alloc: Optional[int] = None
        self.last_demand: Optional[VmDemand] = None


class Orchestrator:
    """
    Interval loop: replay each interval under the plan decided from the previous one, then
    profile it and decide sizes and write policies for the next.

    Attributes:
        cfg (RunConfig): Run parameters.
        timings (List[float]): Wall-clock seconds spent per interval.
    """

    def __init__(self, cfg: RunConfig) -> None:
        cfg.validate(vm_count=1)
        self.cfg = cfg
        self.distance_mode = (
            DistanceMode.URD if cfg.mode is Mode.ECI else DistanceMode.TRD
        )
        self.policy_state = PolicyState(cfg.wthreshold, frozenset(cfg.force_ro_vms))
        self.timings: List[float] = []
        self._vms: Dict[int, _VmState] = {}

    def _slice(
        self, streams: Mapping[int, Sequence[IoRequest]]
    ) -> List[Dict[int, List[IoRequest]]]:
        starts = [stream[0].ts for stream in streams.values() if stream]
        if not starts:
            return []
        t0 = min(starts)
        width = self.cfg.interval_ticks
        last = max(stream[-1].ts for stream in streams.values() if stream)
        intervals: List[Dict[int, List[IoRequest]]] = [
            {} for _ in range((last - t0) // width + 1)
        ]
        for vm_id in sorted(streams):
            for req in streams[vm_id]:
                intervals[(req.ts - t0) // width].setdefault(vm_id, []).append(req)
        return intervals

    def _reclaim(self, vm_id: int) -> None:
        state = self._vms[vm_id]
        if state.alloc is not None:
            logger.info(f"VM {vm_id} idle; reclaiming {state.alloc} blocks.")
            state.simulator.resize(0)
            state.alloc = None

    def _sizes_in_effect(self, active: Dict[int, List[IoRequest]]) -> Dict[int, int]:
        """
        Sizes to replay this interval with. VMs that join (or return) start at c_min; when
        that overcommits the SSD the plan is re-solved over the active VMs, with the
        incumbents' last demands and a zero hit function for the newcomers.
        """
        cfg = self.cfg
        sizes: Dict[int, int] = {}
        newcomers = []
        for vm_id in sorted(active):
            state = self._vms.get(vm_id)
            if state is None or state.alloc is None:
                sizes[vm_id] = cfg.c_min
                newcomers.append(vm_id)
            else:
                sizes[vm_id] = state.alloc
        if sum(sizes.values()) <= cfg.capacity_blocks:
            return sizes

        logger.info(
            f"VMs {newcomers} joined with {sum(sizes.values())} > {cfg.capacity_blocks} "
            f"blocks in effect; refitting the plan."
        )
        demands = [
            VmDemand(vm_id, HitRatioFn.zero(), cfg.c_min, cfg.c_min)
            if vm_id in newcomers
            else self._vms[vm_id].last_demand
            for vm_id in sorted(sizes)
        ]
        plan = allocate(
            PartitionProblem(cfg.capacity_blocks, demands, cfg.t_hdd_us, cfg.t_ssd_us)
        )
        return dict(plan.allocations)

    def _profile(self, state: _VmState, classified) -> ReuseProfile:
        if self.cfg.profile_window is ProfileWindow.INTERVAL:
            return ReuseProfiler().feed(classified)
        if state.profiler is None:
            state.profiler = ReuseProfiler()
        live = state.profiler.feed(classified)
        return ReuseProfile(Counter(live.trd_hist), Counter(live.urd_hist), live.total_accesses)

    def _run_interval(
        self, index: int, active: Dict[int, List[IoRequest]]
    ) -> IntervalReport:
        cfg = self.cfg
        for vm_id in self._vms:
            if vm_id not in active:
                self._reclaim(vm_id)

        sizes = self._sizes_in_effect(active)
        replayed = {}
        demands = []
        for vm_id in sorted(active):
            state = self._vms.setdefault(vm_id, _VmState(cfg))
            size = sizes[vm_id]
            policy = (
                self.policy_state.current(vm_id) if cfg.mode is Mode.ECI else WritePolicy.WB
            )
            state.simulator.set_policy(policy)
            state.simulator.resize(size)

            classified = state.classifier.classify(active[vm_id])
            state.simulator.replay(classified)
            profile = self._profile(state, classified)
            hit_fn = hit_ratio_fn(profile, self.distance_mode)
            demand = (
                urd_based_size(profile)
                if self.distance_mode is DistanceMode.URD
                else trd_based_size(profile)
            )
            state.last_demand = VmDemand(vm_id, hit_fn, demand, cfg.c_min)
            demands.append(state.last_demand)
            replayed[vm_id] = (
                size,
                policy,
                state.simulator.take_report(),
                state.classifier.take_counts(),
                profile,
                hit_fn,
                demand,
            )

        plan = allocate(
            PartitionProblem(cfg.capacity_blocks, demands, cfg.t_hdd_us, cfg.t_ssd_us)
        )
        report = IntervalReport(
            interval=index, feasible=plan.feasible, objective_us=plan.objective_us
        )
        for vm_id, (size, policy, sim, counts, profile, hit_fn, demand) in replayed.items():
            if cfg.mode is Mode.ECI:
                decision = self.policy_state.update(vm_id, counts)
                next_policy, ratio = decision.policy, decision.write_ratio
            else:
                next_policy = WritePolicy.WB
                ratio = write_ratio(counts)
            self._vms[vm_id].alloc = plan.allocations[vm_id]
            report.vms[vm_id] = VmIntervalReport(
                vm_id=vm_id,
                requests=len(active[vm_id]),
                size_blocks=size,
                policy=policy,
                sim=sim,
                counts=counts,
                profile=profile,
                hit_fn=hit_fn,
                demand_blocks=demand,
                alloc_blocks=plan.allocations[vm_id],
                next_policy=next_policy,
                write_ratio=ratio,
            )
            logger.debug(
                f"Interval {index} VM {vm_id}: size {size} {policy.value}, "
                f"hits {sim.read_hits}/{sim.reads}, next {plan.allocations[vm_id]} {next_policy.value}"
            )
        return report

    def run(self, traces: Mapping[int, Sequence[IoRequest]]) -> List[IntervalReport]:
        """
        Runs the whole trace interval by interval.

        Args:
            traces (Mapping[int, Sequence[IoRequest]]): vm_id -> time-sorted stream.

        Returns:
            List[IntervalReport]: One report per interval, in interval order.

        Raises:
            ConfigError: If the configuration cannot serve this many VMs.
            ValueError: If a stream is not time-sorted or holds another VM's requests.
        """
        if not traces:
            logger.error("Run requested without any VM trace.")
            raise ConfigError("at least one VM trace is required")
        self.cfg.validate(vm_count=len(traces))

        streams = {}
        for vm_id, stream in traces.items():
            stream = expand_multiblock(stream)
            if any(req.vm_id != vm_id for req in stream):
                logger.error(f"Trace of VM {vm_id} mixes in other VMs' requests.")
                raise ValueError(f"trace of VM {vm_id} holds requests of another VM")
            if any(b.ts < a.ts for a, b in zip(stream, stream[1:])):
                logger.error(f"Trace of VM {vm_id} is out of time order.")
                raise ValueError(f"trace of VM {vm_id} is not time-sorted")
            streams[vm_id] = stream

        reports = []
        for index, active in enumerate(self._slice(streams)):
            started = time.perf_counter()
            report = self._run_interval(index, active)
            self.timings.append(time.perf_counter() - started)
            reports.append(report)
            logger.info(
                f"Interval {index} ({self.cfg.mode.value}): {len(active)} active VMs, "
                f"{report.allocated_blocks} blocks in effect, "
                f"hit ratio {report.aggregate.read_hit_ratio:.3f}, "
                f"feasible={report.feasible}"
            )
        return reports


def run(traces: Mapping[int, Sequence[IoRequest]], cfg: RunConfig) -> List[IntervalReport]:
    return Orchestrator(cfg).run(traces)
