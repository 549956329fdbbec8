from collections import OrderedDict
from dataclasses import (
    dataclass,
    field,
)
from logging import Logger
from typing import (
    Dict,
    Iterable,
)

from src.tools.classifier import (
    AccessClassifier,
    ClassifiedRequest,
)
from src.tools.models import (
    AccessClass,
    ClassCounts,
    IoRequest,
    Op,
    WritePolicy,
)
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)

DEFAULT_T_HDD_US = 5000.0
DEFAULT_T_SSD_US = 100.0


@dataclass
class CacheConfig:
    size_blocks: int
    policy: WritePolicy = WritePolicy.WB
    t_hdd_us: float = DEFAULT_T_HDD_US
    t_ssd_us: float = DEFAULT_T_SSD_US

    def __post_init__(self) -> None:
        self.policy = WritePolicy(self.policy)
        if self.size_blocks < 0:
            raise ValueError(f"size_blocks must be non-negative, got {self.size_blocks}")
        if not 0 <= self.t_ssd_us < self.t_hdd_us:
            raise ValueError(
                f"t_ssd_us ({self.t_ssd_us}) must be below t_hdd_us ({self.t_hdd_us})"
            )


@dataclass
class SimReport:
    read_hits: int = 0
    read_misses: int = 0
    ssd_writes: int = 0
    hdd_reads: int = 0
    hdd_writes: int = 0
    latency_total_us: float = 0.0
    class_counts: ClassCounts = field(default_factory=ClassCounts)

    @property
    def reads(self) -> int:
        return self.read_hits + self.read_misses

    @property
    def requests(self) -> int:
        return self.class_counts.total

    @property
    def read_hit_ratio(self) -> float:
        return self.read_hits / self.reads if self.reads else 0.0

    @property
    def mean_latency_us(self) -> float:
        return self.latency_total_us / self.requests if self.requests else 0.0

    def __add__(self, other: "SimReport") -> "SimReport":
        return SimReport(
            read_hits=self.read_hits + other.read_hits,
            read_misses=self.read_misses + other.read_misses,
            ssd_writes=self.ssd_writes + other.ssd_writes,
            hdd_reads=self.hdd_reads + other.hdd_reads,
            hdd_writes=self.hdd_writes + other.hdd_writes,
            latency_total_us=self.latency_total_us + other.latency_total_us,
            class_counts=self.class_counts + other.class_counts,
        )


class CacheSimulator:
    """
    LRU block cache of one VM with a write-back, write-through or read-only policy.

    The simulator persists across intervals: resizing and policy switches keep whatever
    contents still fit. Counters accumulate until take_report() is called.

    Attributes:
        config (CacheConfig): Current size, policy and device latencies.
        report (SimReport): Counters since the last take_report().
    """

    def __init__(self, config: CacheConfig) -> None:
        self.config = config
        self.report = SimReport()
        # block -> dirty flag, least recently used first
        self._blocks: "OrderedDict[int, bool]" = OrderedDict()

    def __contains__(self, block: int) -> bool:
        return block in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    @property
    def dirty_blocks(self) -> int:
        return sum(self._blocks.values())

    def _evict_lru(self) -> None:
        _, dirty = self._blocks.popitem(last=False)
        if dirty:
            self.report.hdd_writes += 1

    def _insert(self, block: int, dirty: bool) -> None:
        if block in self._blocks:
            self._blocks[block] = self._blocks[block] or dirty
            self._blocks.move_to_end(block)
            return
        while len(self._blocks) >= self.config.size_blocks:
            self._evict_lru()
        self._blocks[block] = dirty

    def resize(self, size_blocks: int) -> None:
        """Shrinking drops blocks from the LRU end; dirty ones are written back."""
        if size_blocks < 0:
            raise ValueError(f"size_blocks must be non-negative, got {size_blocks}")
        while len(self._blocks) > size_blocks:
            self._evict_lru()
        self.config.size_blocks = size_blocks

    def flush(self) -> int:
        flushed = 0
        for block, dirty in self._blocks.items():
            if dirty:
                self._blocks[block] = False
                flushed += 1
        self.report.hdd_writes += flushed
        return flushed

    def set_policy(self, policy: WritePolicy) -> None:
        policy = WritePolicy(policy)
        if policy is self.config.policy:
            return
        if self.config.policy is WritePolicy.WB:
            flushed = self.flush()
            logger.debug(f"Flushed {flushed} dirty blocks before switching to {policy.value}.")
        self.config.policy = policy

    def access(self, req: IoRequest, access_class: AccessClass) -> bool:
        """
        Serves one single-block request.

        Returns:
            bool: Whether the block was resident before the access.
        """
        cfg = self.config
        report = self.report
        report.class_counts.add(access_class)
        resident = req.block in self._blocks

        if req.op is Op.READ:
            if resident:
                report.read_hits += 1
                report.latency_total_us += cfg.t_ssd_us
                self._blocks.move_to_end(req.block)
            else:
                report.read_misses += 1
                report.hdd_reads += 1
                report.latency_total_us += cfg.t_hdd_us
                if cfg.size_blocks > 0:
                    self._insert(req.block, dirty=False)
                    report.ssd_writes += 1
            return resident

        if cfg.size_blocks == 0:
            report.hdd_writes += 1
            report.latency_total_us += cfg.t_hdd_us
        elif cfg.policy is WritePolicy.WB:
            self._insert(req.block, dirty=True)
            report.ssd_writes += 1
            report.latency_total_us += cfg.t_ssd_us
        elif cfg.policy is WritePolicy.WT:
            self._insert(req.block, dirty=False)
            report.ssd_writes += 1
            report.hdd_writes += 1
            report.latency_total_us += cfg.t_hdd_us
        else:
            if resident:
                # invalidate so later reads cannot see stale data
                del self._blocks[req.block]
            report.hdd_writes += 1
            report.latency_total_us += cfg.t_hdd_us
        return resident

    def replay(self, stream: Iterable[ClassifiedRequest]) -> None:
        for req, access_class in stream:
            self.access(req, access_class)

    def take_report(self) -> SimReport:
        report, self.report = self.report, SimReport()
        return report


def simulate(stream: Iterable[ClassifiedRequest], config: CacheConfig) -> SimReport:
    """
    Replays a classified single-VM stream through a fresh cache.

    Args:
        stream (Iterable[ClassifiedRequest]): (request, access class) pairs.
        config (CacheConfig): Cache size, policy and device latencies.

    Returns:
        SimReport: Hit, write and latency counters of the replay.
    """
    simulator = CacheSimulator(
        CacheConfig(config.size_blocks, config.policy, config.t_hdd_us, config.t_ssd_us)
    )
    simulator.replay(stream)
    return simulator.take_report()


def total_writes_model(counts: ClassCounts) -> int:
    """Analytic SSD write count of a write-back cache that never evicts."""
    return (
        counts[AccessClass.CR]
        + counts[AccessClass.CW]
        + counts[AccessClass.WAR]
        + counts[AccessClass.WAW]
    )


def policy_sweep(
    stream: Iterable[IoRequest],
    size_blocks: int,
    t_hdd_us: float = DEFAULT_T_HDD_US,
    t_ssd_us: float = DEFAULT_T_SSD_US,
) -> Dict[WritePolicy, SimReport]:
    """Simulates the same stream under every write policy at a fixed cache size."""
    classified = AccessClassifier().classify(stream)
    results = {}
    for policy in WritePolicy:
        results[policy] = simulate(
            classified, CacheConfig(size_blocks, policy, t_hdd_us, t_ssd_us)
        )
        logger.info(
            f"{policy.value}: hit ratio {results[policy].read_hit_ratio:.3f}, "
            f"ssd_writes {results[policy].ssd_writes}"
        )
    return results

