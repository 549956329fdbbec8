import random
from dataclasses import dataclass
from enum import Enum
from logging import Logger
from typing import (
    Dict,
    List,
    Sequence,
    Tuple,
)

from src.tools.models import (
    IoRequest,
    Op,
)
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)


class CornerCase(str, Enum):
    SEQ_RANDOM = "seq_random"
    RANDOM_SEQ = "random_seq"
    SEMI_SEQUENTIAL = "semi_sequential"


class MixKind(str, Enum):
    WRITE_HEAVY = "write_heavy"
    READ_HEAVY = "read_heavy"


@dataclass
class CornerCaseParams:
    """
    Shape of a corner-case workload.

    Attributes:
        run_length (int): Length of sequential runs, in blocks.
        reuse_set (int): Number of distinct blocks in the random repetitive phase.
        repeats (int): Passes over the reuse set (SeqRandom, RandomSeq) or run intervals (SemiSequential).
        interval_ticks (int): Trace-time length of one interval.
        base_block (int): First block of the address range.
        vm_id (int): VM the requests belong to.
        seed (int): Seed for the random phases.
    """

    run_length: int = 10
    reuse_set: int = 4
    repeats: int = 2
    interval_ticks: int = 1000
    base_block: int = 0
    vm_id: int = 0
    seed: int = 0

    def validate(self, kind: "CornerCase") -> None:
        if self.run_length <= 0 or self.repeats <= 0 or self.interval_ticks <= 0:
            raise ValueError("run_length, repeats and interval_ticks must be positive")
        if kind is not CornerCase.SEMI_SEQUENTIAL:
            if not 0 < self.reuse_set <= self.run_length:
                raise ValueError(
                    f"reuse_set must be in [1, run_length], got {self.reuse_set}"
                )
        if kind is CornerCase.SEQ_RANDOM and self.reuse_set < 2:
            raise ValueError("SeqRandom needs a reuse set of at least two blocks")


@dataclass
class MixProfile:
    kind: MixKind
    read_blocks: int
    write_blocks: int = 0


def _stamp(
    phases: Sequence[Sequence[Tuple[int, Op]]], vm_id: int, interval_ticks: int
) -> List[IoRequest]:
    """Lays each phase out inside its own interval, spreading timestamps evenly."""
    requests = []
    for index, phase in enumerate(phases):
        start = index * interval_ticks
        step = max(1, interval_ticks // max(1, len(phase)))
        for position, (block, op) in enumerate(phase):
            ts = start + min(position * step, interval_ticks - 1)
            requests.append(IoRequest(vm_id=vm_id, ts=ts, block=block, op=op))
    return requests


def gen_corner_case(kind: CornerCase, params: CornerCaseParams) -> List[IoRequest]:
    """
    Generates one of the workloads on which URD-based sizing is known to fail.

    Args:
        kind (CornerCase): Which workload shape to emit.
        params (CornerCaseParams): Interval lengths and address ranges.

    Returns:
        List[IoRequest]: Single-block requests, one interval per phase.

    Raises:
        ValueError: If the address ranges are empty.
    """
    kind = CornerCase(kind)
    params.validate(kind)
    rng = random.Random(params.seed)
    base = params.base_block
    run = list(range(base, base + params.run_length))

    if kind is CornerCase.SEQ_RANDOM:
        subset = rng.sample(run, params.reuse_set)
        phases = [
            [(block, Op.READ) for block in run],
            [(block, Op.READ) for block in subset * params.repeats],
            [(block, Op.READ) for block in subset[:2]],
        ]
    elif kind is CornerCase.RANDOM_SEQ:
        subset = rng.sample(run, params.reuse_set)
        fresh = range(base + params.run_length, base + 2 * params.run_length)
        phases = [
            [(block, Op.READ) for block in subset * params.repeats],
            [(block, Op.WRITE) for block in fresh],
            [(block, Op.READ) for block in subset],
        ]
    else:
        fresh = range(base + params.run_length, base + 2 * params.run_length)
        phases = [[(block, Op.READ) for block in run] for _ in range(params.repeats)]
        phases.append([(block, Op.READ) for block in fresh])
        phases.append([(block, Op.READ) for block in run])

    requests = _stamp(phases, params.vm_id, params.interval_ticks)
    logger.info(
        f"Generated {kind.value} workload: {len(phases)} intervals, {len(requests)} requests."
    )
    return requests


def gen_reuse_stable_mix(
    profiles: Sequence[MixProfile],
    intervals: int,
    interval_ticks: int = 1000,
    seed: int = 0,
) -> Dict[int, List[IoRequest]]:
    """
    Builds a multi-VM workload whose reuse structure repeats identically every interval.

    Write-heavy VMs write their write set, read their read set twice, then rewrite the
    write set, so write reuses span the whole interval while read reuses stay short.
    Read-heavy VMs read their read set twice.

    Args:
        profiles (Sequence[MixProfile]): One profile per VM; the index is the vm_id.
        intervals (int): Number of intervals to emit.
        interval_ticks (int): Trace-time length of one interval.
        seed (int): Seed for the per-VM block orderings.

    Returns:
        Dict[int, List[IoRequest]]: vm_id -> time-ordered stream.
    """
    if intervals <= 0:
        raise ValueError(f"intervals must be positive, got {intervals}")
    rng = random.Random(seed)
    traces = {}
    for vm_id, profile in enumerate(profiles):
        if profile.read_blocks <= 0:
            raise ValueError(f"VM {vm_id}: read_blocks must be positive")
        reads = rng.sample(range(profile.read_blocks), profile.read_blocks)
        writes = [
            profile.read_blocks + block
            for block in rng.sample(range(profile.write_blocks), profile.write_blocks)
        ]
        read_pass = [(block, Op.READ) for block in reads]
        if profile.kind is MixKind.WRITE_HEAVY:
            if not writes:
                raise ValueError(f"VM {vm_id}: write-heavy profile needs write_blocks")
            write_pass = [(block, Op.WRITE) for block in writes]
            phase = write_pass + read_pass + read_pass + write_pass
        else:
            phase = read_pass + read_pass
        traces[vm_id] = _stamp([phase] * intervals, vm_id, interval_ticks)

    logger.info(
        f"Generated reuse-stable mix: {len(traces)} VMs x {intervals} intervals."
    )
    return traces


def default_mix(vm_count: int, read_blocks: int = 8, write_blocks: int = 24) -> List[MixProfile]:
    """Alternates write-heavy and read-heavy VMs, starting with a write-heavy one."""
    return [
        MixProfile(MixKind.WRITE_HEAVY, read_blocks, write_blocks)
        if vm_id % 2 == 0
        else MixProfile(MixKind.READ_HEAVY, read_blocks)
        for vm_id in range(vm_count)
    ]
